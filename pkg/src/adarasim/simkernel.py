"""Deterministic discrete-event kernel.

Events are totally ordered by ``(time, seq)``.  The radio is an idealized
unit disk (or an explicit adjacency list for scripted scenarios) without
collisions; every random draw comes from a purpose-specific generator so the
routing engine cannot perturb mobility or traffic.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Protocol

import numpy as np

from .messages import DataPacket, Packet, is_signaling, trace_fields, wire_size
from .router import NodeOutput, RouterBase


class EventKind(enum.IntEnum):
    PACKET_DELIVERY = 0
    TIMER_TICK = 1
    WAYPOINT_ARRIVAL = 2
    TRAFFIC_EMIT = 3
    MONITOR_PROBE = 4


@dataclass(order=True)
class SimEvent:
    time: float
    seq: int
    kind: EventKind = field(compare=False)
    payload: Any = field(compare=False, default=None)


class CausalityError(RuntimeError):
    pass


class EventQueue:
    def __init__(self):
        self._heap: list[SimEvent] = []
        self._seq = 0
        self.now = 0.0

    def __len__(self):
        return len(self._heap)

    def push(self, time: float, kind: EventKind, payload: Any = None) -> SimEvent:
        if time < self.now:
            raise CausalityError(f"event at {time} scheduled in the past (now={self.now})")
        ev = SimEvent(time, self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def pop(self) -> SimEvent:
        ev = heapq.heappop(self._heap)
        self.now = ev.time
        return ev

    def peek_time(self) -> float:
        return self._heap[0].time if self._heap else math.inf


# radio


@dataclass(frozen=True)
class RadioModel:
    range: float = 250.0
    prop_delay: float = 0.001
    jitter: float = 0.010
    loss_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.loss_prob < 1.0:
            raise ValueError("loss_prob must lie in [0, 1)")
        if self.range <= 0:
            raise ValueError("range must be positive")
        if self.prop_delay < 0 or self.jitter < 0:
            raise ValueError("delays must be non-negative")


class Medium(Protocol):
    def in_range(self, a: int, b: int, t: float) -> bool: ...

    def neighbors(self, node: int, t: float) -> list[int]: ...


class StaticGraphMedium:
    """Fixed symmetric adjacency, for hand-built topologies.

    ``delays`` optionally overrides the propagation delay of individual
    links (same value in both directions).
    """

    def __init__(
        self,
        node_count: int,
        links: Iterable[tuple[int, int]],
        delays: dict[tuple[int, int], float] | None = None,
    ):
        self.adj: dict[int, set[int]] = {i: set() for i in range(node_count)}
        for a, b in links:
            if a == b:
                raise ValueError("self links are not allowed")
            self.adj[a].add(b)
            self.adj[b].add(a)
        self.delays: dict[frozenset[int], float] = {}
        for (a, b), d in (delays or {}).items():
            if b not in self.adj[a] or d < 0:
                raise ValueError(f"bad delay for link {(a, b)}")
            self.delays[frozenset((a, b))] = d

    def link_delay(self, a: int, b: int) -> float | None:
        return self.delays.get(frozenset((a, b)))

    def in_range(self, a: int, b: int, t: float) -> bool:
        return b in self.adj[a]

    def neighbors(self, node: int, t: float) -> list[int]:
        return sorted(self.adj[node])


class UnitDiskMedium:
    def __init__(self, mobility: list[RandomWaypoint], radius: float):
        self.mobility = mobility
        self.radius = radius

    def position(self, node: int, t: float) -> tuple[float, float]:
        return self.mobility[node].position_at(t)

    def in_range(self, a: int, b: int, t: float) -> bool:
        xa, ya = self.position(a, t)
        xb, yb = self.position(b, t)
        return math.hypot(xa - xb, ya - yb) <= self.radius

    def neighbors(self, node: int, t: float) -> list[int]:
        x, y = self.position(node, t)
        out = []
        for other in range(len(self.mobility)):
            if other == node:
                continue
            ox, oy = self.position(other, t)
            if math.hypot(x - ox, y - oy) <= self.radius:
                out.append(other)
        return out


# mobility


@dataclass
class MobilityState:
    """One leg of random-waypoint motion.

    The node leaves ``position`` at ``leg_start``, travels to ``waypoint`` at
    ``speed`` and stays there until ``pause_until``.
    """

    position: tuple[float, float]
    waypoint: tuple[float, float]
    speed: float
    pause_until: float
    leg_start: float = 0.0

    def arrival_time(self) -> float:
        if self.speed <= 0:
            return math.inf
        return self.leg_start + math.dist(self.position, self.waypoint) / self.speed


class RandomWaypoint:
    """Random-waypoint motion for one node, driven by its own generator.

    Each node owns its generator, so the path does not depend on when or how
    often positions are queried.
    """

    def __init__(
        self,
        area: tuple[float, float],
        v_max: float,
        pause_time: float,
        rng: np.random.Generator,
        start: tuple[float, float] | None = None,
    ):
        if v_max < 0 or pause_time < 0:
            raise ValueError("v_max and pause_time must be non-negative")
        self.area = area
        self.v_max = v_max
        self.pause_time = pause_time
        self.rng = rng
        pos = start if start is not None else self._draw_point()
        if v_max == 0:
            self.state = MobilityState(pos, pos, 0.0, math.inf, 0.0)
        else:
            self.state = self._new_leg(pos, 0.0)

    def _draw_point(self) -> tuple[float, float]:
        w, h = self.area
        return (float(self.rng.uniform(0.0, w)), float(self.rng.uniform(0.0, h)))

    def _new_leg(self, pos: tuple[float, float], t: float) -> MobilityState:
        waypoint = self._draw_point()
        # uniform on (0, v_max]: 1 - U[0,1) is never zero
        speed = float(self.v_max * (1.0 - self.rng.random()))
        st = MobilityState(pos, waypoint, speed, 0.0, t)
        st.pause_until = st.arrival_time() + self.pause_time
        return st

    def step(self, now: float) -> MobilityState:
        """Advance to the leg whose travel or pause contains ``now``."""
        while now >= self.state.pause_until:
            st = self.state
            self.state = self._new_leg(st.waypoint, st.pause_until)
        return self.state

    def position_at(self, t: float) -> tuple[float, float]:
        st = self.step(t)
        if st.speed <= 0 or t >= st.arrival_time():
            return st.waypoint
        dist = math.dist(st.position, st.waypoint)
        frac = (t - st.leg_start) * st.speed / dist
        x0, y0 = st.position
        x1, y1 = st.waypoint
        return (x0 + (x1 - x0) * frac, y0 + (y1 - y0) * frac)


def step_mobility(model: RandomWaypoint, now: float) -> MobilityState:
    return model.step(now)


# traffic


@dataclass
class OnOffFlow:
    src: int
    dest: int
    start: float
    stop: float
    rate: float = 15.0
    on_time: float = 1.0
    off_time: float = 1.0
    emitted: int = 0

    def emission_time(self, k: int) -> float:
        per_on = int(round(self.rate * self.on_time))
        cycle, i = divmod(k, per_on)
        return self.start + cycle * (self.on_time + self.off_time) + i / self.rate

    def next_time(self) -> float:
        t = self.emission_time(self.emitted)
        return t if t < self.stop else math.inf

    def traffic_tick(self, now: float) -> list[DataPacket]:
        """Packets whose emission time is due at ``now``."""
        out = []
        while True:
            t = self.emission_time(self.emitted)
            if t > now + 1e-12 or t >= self.stop:
                break
            out.append(DataPacket(self.src, self.dest, self.emitted, t))
            self.emitted += 1
        return out


# the simulator


class TraceLog:
    """Accumulates tab-separated trace lines."""

    def __init__(self):
        self.lines: list[str] = []

    def header(self, **meta) -> None:
        self.lines.append("# " + " ".join(f"{k}={v}" for k, v in meta.items()))

    def emit(self, t: float, node: int, event: str, kind: str, fields: list[str]) -> None:
        self.lines.append("\t".join([f"{t:.6f}", str(node), event, kind, *fields]))

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


class Simulator:
    def __init__(
        self,
        routers: list[RouterBase],
        medium: Medium,
        radio: RadioModel,
        radio_rng: np.random.Generator,
        trace: TraceLog | None = None,
        monitor: Callable[[Simulator, float], None] | None = None,
        monitor_interval: float = 0.0,
        check_symmetry: bool = True,
    ):
        self.routers = routers
        self.medium = medium
        self.radio = radio
        self.rng = radio_rng
        self.trace = trace or TraceLog()
        self.queue = EventQueue()
        self.monitor = monitor
        self.monitor_interval = monitor_interval
        self.check_symmetry = check_symmetry
        self.busy_until = [0.0] * len(routers)
        self.flows: list[OnOffFlow] = []

    @property
    def now(self) -> float:
        return self.queue.now

    # scheduling helpers

    def start_timers(self, first_ticks: list[float]) -> None:
        for node, t in enumerate(first_ticks):
            if math.isfinite(t):
                self.queue.push(t, EventKind.TIMER_TICK, node)

    def add_flow(self, flow: OnOffFlow) -> None:
        self.flows.append(flow)
        t = flow.next_time()
        if math.isfinite(t):
            self.queue.push(t, EventKind.TRAFFIC_EMIT, flow)

    def schedule_send(self, t: float, src: int, dest: int, seq_no: int) -> None:
        self.queue.push(t, EventKind.TRAFFIC_EMIT, DataPacket(src, dest, seq_no, t))

    def schedule_arrivals(self) -> None:
        """One event per leg change; positions themselves are computed lazily."""
        if isinstance(self.medium, UnitDiskMedium):
            for node, model in enumerate(self.medium.mobility):
                t = model.state.pause_until
                if math.isfinite(t):
                    self.queue.push(max(t, self.now), EventKind.WAYPOINT_ARRIVAL, node)

    # transmission

    def _tx_time(self, node: int) -> float:
        """When ``node`` actually transmits; transmissions of one node never overlap."""
        jitter = float(self.rng.uniform(0.0, self.radio.jitter)) if self.radio.jitter > 0 else 0.0
        t = max(self.now, self.busy_until[node]) + jitter
        self.busy_until[node] = t
        return t

    def _arrival(self, tx: float, a: int, b: int) -> float:
        custom = getattr(self.medium, "link_delay", None)
        d = custom(a, b) if custom is not None else None
        return tx + (self.radio.prop_delay if d is None else d)

    def _lost(self) -> bool:
        return self.radio.loss_prob > 0 and float(self.rng.random()) < self.radio.loss_prob

    def _trace_tx(self, node: int, packet: Packet, to: str) -> None:
        fields = trace_fields(packet) + [f"to={to}", f"bytes={wire_size(packet)}"]
        self.trace.emit(self.now, node, "TX", packet.kind, fields)

    def broadcast(self, origin: int, packet: Packet, only: frozenset[int] | None = None) -> int:
        """Schedule deliveries to every in-range neighbor; returns how many were scheduled."""
        to = "*" if only is None else ",".join(str(n) for n in sorted(only))
        self._trace_tx(origin, packet, to)
        tx = self._tx_time(origin)
        count = 0
        for nb in self.medium.neighbors(origin, self.now):
            if self.check_symmetry and not self.medium.in_range(nb, origin, self.now):
                raise AssertionError(f"asymmetric link {origin}->{nb}")
            if only is not None and nb not in only:
                continue
            if self._lost():
                continue
            self.queue.push(self._arrival(tx, origin, nb), EventKind.PACKET_DELIVERY, (nb, origin, packet))
            count += 1
        return count

    def unicast(self, origin: int, next_hop: int, packet: Packet, prev_hop: int | None = None) -> bool:
        if next_hop == origin:
            raise ValueError("a node cannot unicast to itself")
        if not self.medium.in_range(origin, next_hop, self.now):
            self._apply(origin, self.routers[origin].on_link_failure(next_hop, packet, self.now, prev_hop))
            return False
        self._trace_tx(origin, packet, str(next_hop))
        tx = self._tx_time(origin)
        if not self._lost():
            self.queue.push(self._arrival(tx, origin, next_hop), EventKind.PACKET_DELIVERY, (next_hop, origin, packet))
        return True

    def _apply(self, node: int, out: NodeOutput, prev_hop: int | None = None) -> None:
        for pkt in out.broadcasts:
            self.broadcast(node, pkt)
        for recipients, pkt in out.multicasts:
            self.broadcast(node, pkt, only=recipients)
        for pkt in out.delivered:
            self.trace.emit(
                self.now,
                node,
                "RECV",
                "DATA",
                [f"src={pkt.src}", f"dest={pkt.dest}", f"seq={pkt.seq_no}", f"created={pkt.created_at:.6f}"],
            )
        for pkt, reason in out.dropped:
            self.trace.emit(
                self.now,
                node,
                "DROP",
                "DATA",
                [f"src={pkt.src}", f"dest={pkt.dest}", f"seq={pkt.seq_no}", f"reason={reason.value}"],
            )
        for nh, pkt in out.unicasts:
            self.unicast(node, nh, pkt, prev_hop)

    # main loop

    def run(self, until: float) -> None:
        if self.monitor is not None and self.monitor_interval > 0:
            self.queue.push(self.monitor_interval, EventKind.MONITOR_PROBE)
        q = self.queue
        while q.peek_time() <= until:
            ev = q.pop()
            kind = ev.kind
            if kind is EventKind.PACKET_DELIVERY:
                receiver, sender, packet = ev.payload
                prev = sender if isinstance(packet, DataPacket) else None
                self._apply(receiver, self.routers[receiver].handle(packet, sender, ev.time), prev)
            elif kind is EventKind.TIMER_TICK:
                node = ev.payload
                self._apply(node, self.routers[node].on_timer(ev.time))
                q.push(ev.time + self.routers[node].params.hello_interval, EventKind.TIMER_TICK, node)
            elif kind is EventKind.TRAFFIC_EMIT:
                if isinstance(ev.payload, OnOffFlow):
                    flow = ev.payload
                    packets = flow.traffic_tick(ev.time)
                    t = flow.next_time()
                    if math.isfinite(t):
                        q.push(t, EventKind.TRAFFIC_EMIT, flow)
                else:
                    packets = [ev.payload]
                for pkt in packets:
                    self._originate_data(pkt)
            elif kind is EventKind.WAYPOINT_ARRIVAL:
                model = self.medium.mobility[ev.payload]
                t = model.step(ev.time).pause_until
                if math.isfinite(t):
                    q.push(t, EventKind.WAYPOINT_ARRIVAL, ev.payload)
            elif kind is EventKind.MONITOR_PROBE:
                self.monitor(self, ev.time)
                q.push(ev.time + self.monitor_interval, EventKind.MONITOR_PROBE)
        q.now = max(q.now, until)

    def _originate_data(self, pkt: DataPacket) -> None:
        self.trace.emit(
            self.now,
            pkt.src,
            "ORIG",
            "DATA",
            [f"src={pkt.src}", f"dest={pkt.dest}", f"seq={pkt.seq_no}", f"created={pkt.created_at:.6f}"],
        )
        self._apply(pkt.src, self.routers[pkt.src].enqueue_data(pkt, self.now))


def count_transmissions(trace_lines: Iterable[str]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for line in trace_lines:
        if line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) > 3 and parts[2] == "TX":
            counts[parts[3]] = counts.get(parts[3], 0) + 1
    return counts


__all__ = [
    "EventKind",
    "SimEvent",
    "EventQueue",
    "CausalityError",
    "RadioModel",
    "StaticGraphMedium",
    "UnitDiskMedium",
    "MobilityState",
    "RandomWaypoint",
    "step_mobility",
    "OnOffFlow",
    "TraceLog",
    "Simulator",
    "count_transmissions",
    "is_signaling",
]
