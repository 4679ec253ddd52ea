"""Signaling and data packet records plus the byte-size model used for overhead accounting.

All four signaling packets are broadcast and carry the sender's hello sequence
number (``hsn``).  Sizes follow a fixed rule: an 8-byte header plus 4 bytes
for every node id, sequence number or counter field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

HEADER_BYTES = 8
FIELD_BYTES = 4
DATA_PAYLOAD_BYTES = 512
DEFAULT_TTL = 64


@dataclass(frozen=True)
class Rreq:
    rid: int
    origin: int
    origin_seq: int
    dest: int
    dest_seq: int
    hops_to_origin: int
    hsn: int

    kind = "RREQ"

    def __post_init__(self):
        if self.hops_to_origin < 0:
            raise ValueError("hops_to_origin must be non-negative")


@dataclass(frozen=True)
class Rrep:
    dest: int
    dest_seq: int
    hops_to_dest: int
    ldn: tuple[int, ...]
    hsn: int
    # only set by the AODV engine, which unicasts replies back toward the requester
    origin: int | None = None

    kind = "RREP"

    def __post_init__(self):
        if self.hops_to_dest < 0:
            raise ValueError("hops_to_dest must be non-negative")
        object.__setattr__(self, "ldn", tuple(self.ldn))


@dataclass(frozen=True)
class Rerr:
    hsn: int
    unreachable: tuple[tuple[int, int], ...]

    kind = "RERR"

    def __post_init__(self):
        entries = tuple((int(d), int(s)) for d, s in self.unreachable)
        if not entries:
            raise ValueError("RERR must list at least one unreachable destination")
        object.__setattr__(self, "unreachable", entries)

    @property
    def dests(self) -> list[int]:
        return [d for d, _ in self.unreachable]


@dataclass(frozen=True)
class Hello:
    hsn: int

    kind = "HELLO"


@dataclass(frozen=True)
class DataPacket:
    src: int
    dest: int
    seq_no: int
    created_at: float
    size_bytes: int = DATA_PAYLOAD_BYTES
    ttl: int = field(default=DEFAULT_TTL, compare=False)

    kind = "DATA"

    def __post_init__(self):
        if self.size_bytes != DATA_PAYLOAD_BYTES:
            raise ValueError(f"data packets are {DATA_PAYLOAD_BYTES} bytes")

    @property
    def key(self) -> tuple[int, int, int]:
        """Identity of a data packet across hops (ttl changes, the key does not)."""
        return (self.src, self.dest, self.seq_no)


SignalingPacket = Union[Rreq, Rrep, Rerr, Hello]
Packet = Union[Rreq, Rrep, Rerr, Hello, DataPacket]

SIGNALING_KINDS = ("RREQ", "RREP", "RERR", "HELLO")


def is_signaling(packet: Packet) -> bool:
    return packet.kind in SIGNALING_KINDS


def wire_size(packet: Packet) -> int:
    if isinstance(packet, Hello):
        n = 1
    elif isinstance(packet, Rreq):
        n = 7
    elif isinstance(packet, Rrep):
        n = 4 + len(packet.ldn) + (packet.origin is not None)
    elif isinstance(packet, Rerr):
        n = 1 + 2 * len(packet.unreachable)
    elif isinstance(packet, DataPacket):
        return HEADER_BYTES + packet.size_bytes
    else:
        raise TypeError(f"not a packet: {packet!r}")
    return HEADER_BYTES + FIELD_BYTES * n


def trace_fields(packet: Packet) -> list[str]:
    """``key=value`` tokens describing a packet in a trace line (stable order)."""
    if isinstance(packet, Rreq):
        return [
            f"rid={packet.rid}",
            f"origin={packet.origin}",
            f"on={packet.origin_seq}",
            f"dest={packet.dest}",
            f"dn={packet.dest_seq}",
            f"ho={packet.hops_to_origin}",
            f"hsn={packet.hsn}",
        ]
    if isinstance(packet, Rrep):
        out = [
            f"dest={packet.dest}",
            f"dn={packet.dest_seq}",
            f"hd={packet.hops_to_dest}",
            "ldn=" + ",".join(str(n) for n in packet.ldn),
            f"hsn={packet.hsn}",
        ]
        if packet.origin is not None:
            out.append(f"origin={packet.origin}")
        return out
    if isinstance(packet, Rerr):
        lua = ",".join(f"{d}:{s}" for d, s in packet.unreachable)
        return [f"hsn={packet.hsn}", f"lua={lua}"]
    if isinstance(packet, Hello):
        return [f"hsn={packet.hsn}"]
    if isinstance(packet, DataPacket):
        return [
            f"src={packet.src}",
            f"dest={packet.dest}",
            f"seq={packet.seq_no}",
            f"created={packet.created_at:.6f}",
            f"ttl={packet.ttl}",
        ]
    raise TypeError(f"not a packet: {packet!r}")
