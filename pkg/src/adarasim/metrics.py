"""Metrics computed from trace text, plus the routing-loop monitor.

Everything here is a pure function of either the trace lines or a snapshot
of the routing tables, so results can be recomputed offline.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .messages import SIGNALING_KINDS
from .route_state import RoutingTable

EVENTS = {"TX", "RECV", "DROP", "ORIG", "LOOP"}


class TraceFormatError(ValueError):
    def __init__(self, lineno: int, line: str, why: str):
        super().__init__(f"line {lineno}: {why}: {line!r}")
        self.lineno = lineno


@dataclass
class TraceRecord:
    time: float
    node: int
    event: str
    kind: str
    fields: dict[str, str]


def parse_line(line: str, lineno: int) -> TraceRecord:
    parts = line.rstrip("\n").split("\t")
    if len(parts) < 4:
        raise TraceFormatError(lineno, line, "expected at least 4 tab-separated columns")
    try:
        t = float(parts[0])
        node = int(parts[1])
    except ValueError:
        raise TraceFormatError(lineno, line, "bad time or node id") from None
    if parts[2] not in EVENTS:
        raise TraceFormatError(lineno, line, f"unknown event {parts[2]!r}")
    fields = {}
    for tok in parts[4:]:
        k, sep, v = tok.partition("=")
        if not sep or not k:
            raise TraceFormatError(lineno, line, f"field {tok!r} is not key=value")
        fields[k] = v
    return TraceRecord(t, node, parts[2], parts[3], fields)


def parse_trace(lines: Iterable[str]) -> Iterable[tuple[int, TraceRecord]]:
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        yield lineno, parse_line(line, lineno)


def _lines(trace: str | Iterable[str]) -> Iterable[str]:
    return trace.splitlines() if isinstance(trace, str) else trace


@dataclass
class RunMetrics:
    pdr: float | None
    avg_delay: float | None
    signaling_counts: dict[str, int] = field(default_factory=dict)
    signaling_bytes: int = 0
    drops: dict[str, int] = field(default_factory=dict)
    sent: int = 0
    delivered: int = 0
    loop_violations: int = 0

    @property
    def total_signaling(self) -> int:
        return sum(self.signaling_counts.values())


def compute_metrics(trace: str | Iterable[str]) -> RunMetrics:
    """PDR, mean end-to-end delay (buffering included) and signaling counts."""
    counts = {k: 0 for k in sorted(SIGNALING_KINDS)}
    sig_bytes = 0
    drops: Counter[str] = Counter()
    originated = set()
    delivered: dict[tuple, float] = {}
    loops = 0
    for lineno, rec in parse_trace(_lines(trace)):
        try:
            if rec.event == "TX" and rec.kind in counts:
                counts[rec.kind] += 1
                sig_bytes += int(rec.fields["bytes"])
            elif rec.event == "ORIG":
                originated.add((rec.fields["src"], rec.fields["dest"], rec.fields["seq"]))
            elif rec.event == "RECV":
                key = (rec.fields["src"], rec.fields["dest"], rec.fields["seq"])
                if key not in delivered:
                    delivered[key] = rec.time - float(rec.fields["created"])
            elif rec.event == "DROP":
                drops[rec.fields["reason"]] += 1
            elif rec.event == "LOOP":
                loops += 1
        except (KeyError, ValueError) as exc:
            raise TraceFormatError(lineno, f"{rec}", f"missing or bad field ({exc})") from None
    sent = len(originated)
    pdr = len(delivered) / sent if sent else None
    avg = sum(delivered.values()) / len(delivered) if delivered else None
    return RunMetrics(pdr, avg, counts, sig_bytes, dict(sorted(drops.items())), sent, len(delivered), loops)


# loop monitoring


def find_loop(tables: Mapping[int, RoutingTable], dest: int, now: float) -> list[int] | None:
    """Return a next-hop cycle toward ``dest`` among usable entries, if any.

    Any cycle is reported.  A cycle can only form if the (seq, -hops) order
    failed to increase somewhere along it, so this is at least as strict as
    checking the order hop by hop.
    """
    succ = {}
    for node, rt in tables.items():
        if node == dest:
            continue
        e = rt.usable(dest, now)
        if e is not None:
            succ[node] = e.next_hop
    state: dict[int, int] = {}
    for start in sorted(succ):
        if start in state:
            continue
        path = []
        n = start
        while n in succ and n not in state:
            state[n] = 1
            path.append(n)
            n = succ[n]
        if n in state and state[n] == 1:
            return path[path.index(n):]
        for p in path:
            state[p] = 2
    return None


def loop_monitor(tables: Mapping[int, RoutingTable], dest: int, now: float) -> bool:
    """True when no routing loop exists toward ``dest``."""
    return find_loop(tables, dest, now) is None


# offline checks


def check_trace(trace: str | Iterable[str]) -> list[str]:
    """Re-verify trace-level invariants; returns a list of problems (empty on success)."""
    problems = []
    last_t = float("-inf")
    last_hsn: dict[int, int] = {}
    forwarded: set[tuple[int, str, str]] = set()
    originated = set()
    received = set()
    try:
        records = list(parse_trace(_lines(trace)))
    except TraceFormatError as exc:
        return [str(exc)]
    for lineno, rec in records:
        if rec.time < last_t:
            problems.append(f"line {lineno}: time goes backwards")
        last_t = rec.time
        if rec.event == "LOOP":
            problems.append(f"line {lineno}: routing loop toward {rec.fields.get('dest')}")
        elif rec.event == "TX" and rec.kind in SIGNALING_KINDS:
            hsn = int(rec.fields.get("hsn", -1))
            if hsn < last_hsn.get(rec.node, 0):
                problems.append(f"line {lineno}: node {rec.node} hsn decreased to {hsn}")
            last_hsn[rec.node] = max(hsn, last_hsn.get(rec.node, 0))
            if rec.kind == "RREQ":
                key = (rec.node, rec.fields["origin"], rec.fields["rid"])
                if key in forwarded:
                    problems.append(
                        f"line {lineno}: node {rec.node} sent RREQ {key[1]}:{key[2]} twice"
                    )
                forwarded.add(key)
        elif rec.event == "ORIG":
            originated.add((rec.fields["src"], rec.fields["dest"], rec.fields["seq"]))
        elif rec.event == "RECV":
            key = (rec.fields["src"], rec.fields["dest"], rec.fields["seq"])
            if key not in originated:
                problems.append(f"line {lineno}: delivery of a packet never originated")
            if key in received:
                problems.append(f"line {lineno}: packet delivered twice")
            received.add(key)
    return problems
