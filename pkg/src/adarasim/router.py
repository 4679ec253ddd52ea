"""Machinery shared by the ADARA and AODV engines.

A router is a deterministic state machine: every handler takes the current
simulation time and returns a :class:`NodeOutput` describing what the node
wants transmitted, delivered or dropped.  The simulator owns the medium and
decides who actually hears what.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field, replace

from .messages import DataPacket, Hello, Packet, Rerr, Rrep, Rreq, SignalingPacket
from .route_state import RouteEntry, RoutingTable

INF = float("inf")


class DropReason(str, enum.Enum):
    BUFFER_FULL = "BufferFull"
    BUFFER_TIMEOUT = "BufferTimeout"
    NO_ROUTE = "NoRoute"
    TTL_EXPIRED = "TtlExpired"
    DISCOVERY_FAILED = "DiscoveryFailed"
    LINK_FAILURE = "LinkFailure"


@dataclass
class ProtocolParams:
    hello_interval: float = 1.0
    allowed_hello_loss: int = 2
    active_route_timeout: float = 10.0
    prt_lifetime: float = 6.0
    rreq_retries: int = 2
    discovery_timeout: float = 2.0
    buffer_capacity: int = 64
    buffer_max_age: float = 30.0
    invalid_gc_time: float = 60.0
    # ADARA only: a retransmitted RREQ also moves the precursor neighbor
    update_neighbor_on_retransmission: bool = True
    # ADARA only: "literal" also forwards RREPs at non-designated nodes
    # holding more than one precursor tuple; "prose" forwards only when designated
    rrep_forward_rule: str = "literal"

    def __post_init__(self):
        if self.rrep_forward_rule not in ("literal", "prose"):
            raise ValueError(f"unknown rrep_forward_rule {self.rrep_forward_rule!r}")
        if self.hello_interval <= 0 or self.buffer_capacity <= 0:
            raise ValueError("hello_interval and buffer_capacity must be positive")

    @property
    def neighbor_hold_time(self) -> float:
        return 3 * self.hello_interval

    @property
    def neighbor_timeout(self) -> float:
        return self.allowed_hello_loss * self.hello_interval


@dataclass
class NodeOutput:
    broadcasts: list[SignalingPacket] = field(default_factory=list)
    unicasts: list[tuple[int, Packet]] = field(default_factory=list)
    # one transmission that only the listed neighbors process (AODV RERR)
    multicasts: list[tuple[frozenset[int], SignalingPacket]] = field(default_factory=list)
    delivered: list[DataPacket] = field(default_factory=list)
    dropped: list[tuple[DataPacket, DropReason]] = field(default_factory=list)

    def extend(self, other: NodeOutput) -> None:
        self.broadcasts += other.broadcasts
        self.unicasts += other.unicasts
        self.multicasts += other.multicasts
        self.delivered += other.delivered
        self.dropped += other.dropped

    def __bool__(self) -> bool:
        return bool(
            self.broadcasts or self.unicasts or self.multicasts or self.delivered or self.dropped
        )


@dataclass
class PendingDiscovery:
    retries: int
    next_timeout: float


class RouterBase:
    """Send buffer, discovery retries, neighbor liveness and data forwarding.

    Subclasses supply the control-plane handlers and the few hooks below
    (``_originate_rreq``, ``_link_down``, ``_report_no_route``, ``_hello_tick``,
    ``_expire_tables``).
    """

    engine = "base"

    def __init__(self, node_id: int, params: ProtocolParams | None = None):
        self.id = node_id
        self.params = params or ProtocolParams()
        self.own_seq = 0
        self.rt = RoutingTable(node_id, gc_after=self.params.invalid_gc_time)
        self.rt.put(RouteEntry(node_id, 0, 0, node_id, lifetime=INF))
        self.send_buffer: deque[tuple[DataPacket, float]] = deque()
        self.pending_discoveries: dict[int, PendingDiscovery] = {}
        self.neighbor_last_heard: dict[int, float] = {}

    def __repr__(self):
        return f"<{type(self).__name__} {self.id}>"

    # sequence numbers

    def _set_seq(self, value: int) -> None:
        if value < self.own_seq:
            raise ValueError("sequence numbers never decrease")
        self.own_seq = value
        self.rt.lookup(self.id).dest_seq = value

    def originate_rrep_seq(self, rreq_dn: int) -> int:
        """Sequence number a destination puts in its reply."""
        self._set_seq(max(self.own_seq, rreq_dn) + 1)
        return self.own_seq

    # dispatch

    def handle(self, packet: Packet, sender: int, now: float) -> NodeOutput:
        if isinstance(packet, DataPacket):
            return self.handle_data(packet, sender, now)
        if isinstance(packet, Rreq):
            return self.handle_rreq(packet, sender, now)
        if isinstance(packet, Rrep):
            return self.handle_rrep(packet, sender, now)
        if isinstance(packet, Rerr):
            return self.handle_rerr(packet, sender, now)
        if isinstance(packet, Hello):
            return self.handle_hello(packet, sender, now)
        raise TypeError(f"unknown packet {packet!r}")

    def handle_rreq(self, rreq: Rreq, sender: int, now: float) -> NodeOutput:
        raise NotImplementedError

    def handle_rrep(self, rrep: Rrep, sender: int, now: float) -> NodeOutput:
        raise NotImplementedError

    def handle_rerr(self, rerr: Rerr, sender: int, now: float) -> NodeOutput:
        raise NotImplementedError

    def handle_hello(self, hello: Hello, sender: int, now: float) -> NodeOutput:
        self._heard(sender, hello.hsn, now)
        return NodeOutput()

    def _heard(self, sender: int, hsn: int, now: float) -> None:
        self.rt.process_hello(sender, hsn, now, self.params.neighbor_hold_time)
        self.neighbor_last_heard[sender] = now

    # data plane

    def enqueue_data(self, pkt: DataPacket, now: float) -> NodeOutput:
        if pkt.src != self.id:
            raise ValueError("enqueue_data takes packets sourced at this node")
        out = NodeOutput()
        route = self.rt.usable(pkt.dest, now)
        if route is not None:
            self._send_data(pkt, route, now, out)
        else:
            self._buffer(pkt, now, out)
        return out

    def handle_data(self, pkt: DataPacket, sender: int, now: float) -> NodeOutput:
        out = NodeOutput()
        if pkt.dest == self.id:
            out.delivered.append(pkt)
            return out
        pkt = replace(pkt, ttl=pkt.ttl - 1)
        if pkt.ttl <= 0:
            out.dropped.append((pkt, DropReason.TTL_EXPIRED))
            return out
        route = self.rt.usable(pkt.dest, now)
        if route is not None:
            self._send_data(pkt, route, now, out)
        else:
            self._report_no_route(pkt.dest, sender, now, out)
            out.dropped.append((pkt, DropReason.NO_ROUTE))
        return out

    def on_link_failure(
        self, neighbor: int, packet: Packet, now: float, prev_hop: int | None = None
    ) -> NodeOutput:
        """The medium could not deliver a unicast to ``neighbor``."""
        out = NodeOutput()
        relay_dest = None
        if isinstance(packet, DataPacket) and packet.src != self.id:
            relay_dest = packet.dest
        self._link_down(neighbor, now, out, extra_dest=relay_dest, notify=prev_hop)
        if isinstance(packet, DataPacket):
            if packet.src == self.id:
                self._buffer(packet, now, out)
            else:
                out.dropped.append((packet, DropReason.LINK_FAILURE))
        return out

    def _send_data(self, pkt: DataPacket, route: RouteEntry, now: float, out: NodeOutput) -> None:
        out.unicasts.append((route.next_hop, pkt))
        self.rt.refresh(pkt.dest, now, self.params.active_route_timeout)

    def _buffer(self, pkt: DataPacket, now: float, out: NodeOutput) -> None:
        if len(self.send_buffer) >= self.params.buffer_capacity:
            old, _ = self.send_buffer.popleft()
            out.dropped.append((old, DropReason.BUFFER_FULL))
        self.send_buffer.append((pkt, now))
        if pkt.dest not in self.pending_discoveries:
            self._start_discovery(pkt.dest, now, out)

    def _start_discovery(self, dest: int, now: float, out: NodeOutput) -> None:
        self.pending_discoveries[dest] = PendingDiscovery(0, now + self.params.discovery_timeout)
        self._originate_rreq(dest, now, out)

    def _flush(self, dest: int, now: float, out: NodeOutput) -> None:
        """Send every buffered packet for ``dest`` if a route is now usable."""
        route = self.rt.usable(dest, now)
        if route is None:
            return
        self.pending_discoveries.pop(dest, None)
        keep: deque[tuple[DataPacket, float]] = deque()
        for pkt, t in self.send_buffer:
            if pkt.dest == dest:
                self._send_data(pkt, route, now, out)
            else:
                keep.append((pkt, t))
        self.send_buffer = keep

    def buffered(self, dest: int | None = None) -> list[DataPacket]:
        return [p for p, _ in self.send_buffer if dest is None or p.dest == dest]

    # timers

    def on_timer(self, now: float) -> NodeOutput:
        out = NodeOutput()
        limit = self.params.neighbor_timeout
        for nb in sorted(self.neighbor_last_heard):
            if now - self.neighbor_last_heard[nb] > limit:
                self._link_down(nb, now, out)
        self._expire_tables(now)
        for dest in sorted(self.pending_discoveries):
            pending = self.pending_discoveries[dest]
            if self.rt.usable(dest, now) is not None:
                self._flush(dest, now, out)
                continue
            if now < pending.next_timeout:
                continue
            if pending.retries < self.params.rreq_retries:
                pending.retries += 1
                pending.next_timeout = now + self.params.discovery_timeout
                self._originate_rreq(dest, now, out)
            else:
                del self.pending_discoveries[dest]
                self._drop_buffered(lambda p, t: p.dest == dest, DropReason.DISCOVERY_FAILED, out)
        max_age = self.params.buffer_max_age
        self._drop_buffered(lambda p, t: now - t > max_age, DropReason.BUFFER_TIMEOUT, out)
        self._hello_tick(now, out)
        return out

    def _drop_buffered(self, pred, reason: DropReason, out: NodeOutput) -> None:
        keep: deque[tuple[DataPacket, float]] = deque()
        for pkt, t in self.send_buffer:
            if pred(pkt, t):
                out.dropped.append((pkt, reason))
            else:
                keep.append((pkt, t))
        self.send_buffer = keep

    # hooks

    def _originate_rreq(self, dest: int, now: float, out: NodeOutput) -> None:
        raise NotImplementedError

    def _link_down(
        self,
        neighbor: int,
        now: float,
        out: NodeOutput,
        extra_dest: int | None = None,
        notify: int | None = None,
    ) -> None:
        raise NotImplementedError

    def _report_no_route(self, dest: int, sender: int, now: float, out: NodeOutput) -> None:
        raise NotImplementedError

    def _hello_tick(self, now: float, out: NodeOutput) -> None:
        raise NotImplementedError

    def _expire_tables(self, now: float) -> None:
        self.rt.expire(now)

    def _known_seq(self, dest: int) -> int:
        entry = self.rt.lookup(dest)
        return entry.dest_seq if entry is not None else 0

    def _wanted_seq(self, dest: int, now: float) -> int:
        """Sequence number a new request asks for.

        Once our route is dead, only something fresher than it can help, so
        holders of the same stale information must not answer.
        """
        entry = self.rt.lookup(dest)
        if entry is None:
            return 0
        return entry.dest_seq if entry.usable(now) else entry.dest_seq + 1
