"""Scenario configuration and run orchestration.

A scenario is a flat set of keys (loadable from YAML).  One master seed is
split into independent mobility, traffic, radio and protocol streams so the
choice of engine never changes node paths or the traffic schedule.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .adara import AdaraNode
from .aodv import AodvNode
from .metrics import RunMetrics, compute_metrics, find_loop
from .router import ProtocolParams, RouterBase
from .simkernel import (
    OnOffFlow,
    RadioModel,
    RandomWaypoint,
    Simulator,
    StaticGraphMedium,
    TraceLog,
    UnitDiskMedium,
)

ENGINES = {"adara": AdaraNode, "aodv": AodvNode}
TOPOLOGIES = ("random_waypoint", "static", "graph")
_PROTOCOL_KEYS = {f.name for f in dataclasses.fields(ProtocolParams)}


class ConfigError(ValueError):
    pass


@dataclass
class Scenario:
    engine: str = "adara"
    seed: int = 1
    node_count: int = 25
    area: tuple[float, float] = (300.0, 1000.0)
    topology: str = "random_waypoint"
    v_max: float = 20.0
    pause_time: float = 0.0
    flows: int = 10
    rate: float = 15.0
    on_time: float = 1.0
    off_time: float = 1.0
    hotspot_prob: float = 0.5
    # flows start uniformly in [traffic_start, traffic_start + start_spread]
    traffic_start: float = 1.0
    start_spread: float = 5.0
    duration: float = 120.0
    radio_range: float = 250.0
    prop_delay: float = 0.001
    jitter: float = 0.010
    loss_prob: float = 0.0
    strict_paper_mode: bool = False
    # None: the first timer tick of each node is drawn in [0, hello_interval)
    hello_start: float | None = None
    monitor_interval: float = 0.1
    # graph topology only: [a, b] or [a, b, delay_seconds]
    links: list[tuple] = field(default_factory=list)
    # scripted single packets: (time, src, dest)
    sends: list[tuple[float, int, int]] = field(default_factory=list)
    protocol: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.area = tuple(float(x) for x in self.area)
        self.links = [
            (int(l[0]), int(l[1])) + ((float(l[2]),) if len(l) > 2 else ()) for l in self.links
        ]
        self.sends = [(float(t), int(s), int(d)) for t, s, d in self.sends]
        self.validate()

    def validate(self) -> None:
        if self.engine not in ENGINES:
            raise ConfigError(f"engine must be one of {sorted(ENGINES)}, got {self.engine!r}")
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"topology must be one of {TOPOLOGIES}")
        if self.node_count < 2:
            raise ConfigError("node_count must be at least 2")
        if self.flows < 0 or (self.flows > 0 and self.rate <= 0):
            raise ConfigError("flows must be non-negative and rate positive")
        if self.flows > self.node_count - 1:
            raise ConfigError("at most node_count - 1 flows (one per non-hotspot source)")
        if not 0.0 <= self.hotspot_prob <= 1.0:
            raise ConfigError("hotspot_prob must lie in [0, 1]")
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        if len(self.area) != 2 or min(self.area) <= 0:
            raise ConfigError("area must be two positive lengths")
        if self.v_max < 0 or self.pause_time < 0:
            raise ConfigError("v_max and pause_time must be non-negative")
        if self.on_time <= 0 or self.off_time < 0:
            raise ConfigError("on_time must be positive and off_time non-negative")
        unknown = set(self.protocol) - _PROTOCOL_KEYS
        if unknown:
            raise ConfigError(f"unknown protocol keys: {sorted(unknown)}")
        for link in self.links:
            a, b = link[:2]
            if not (0 <= a < self.node_count and 0 <= b < self.node_count) or a == b:
                raise ConfigError(f"bad link {(a, b)}")
            if len(link) > 2 and link[2] < 0:
                raise ConfigError(f"negative delay on link {(a, b)}")
        for t, s, d in self.sends:
            if t < 0 or s == d or not (0 <= s < self.node_count and 0 <= d < self.node_count):
                raise ConfigError(f"bad scripted send {(t, s, d)}")
        try:
            RadioModel(self.radio_range, self.prop_delay, self.jitter, self.loss_prob)
            self.params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def hotspot(self) -> int:
        return self.node_count - 1

    def params(self) -> ProtocolParams:
        overrides = dict(self.protocol)
        if self.strict_paper_mode:
            overrides.setdefault("update_neighbor_on_retransmission", False)
        return ProtocolParams(**overrides)

    def with_(self, **changes) -> Scenario:
        return dataclasses.replace(self, **changes)


def load_scenario(path: str | Path) -> Scenario:
    data = yaml.safe_load(Path(path).read_text()) or {}
    return scenario_from_dict(data)


def scenario_from_dict(data: dict[str, Any]) -> Scenario:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of keys to values")
    known = {f.name for f in dataclasses.fields(Scenario)}
    data = dict(data)
    # protocol timers may be given flat as well
    protocol = dict(data.pop("protocol", None) or {})
    for key in list(data):
        if key in _PROTOCOL_KEYS and key not in known:
            protocol[key] = data.pop(key)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return Scenario(protocol=protocol, **data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def coerce_value(sc: Scenario, key: str, text: str) -> Any:
    """Parse a command-line override using the type of the current value."""
    if key in _PROTOCOL_KEYS:
        current = getattr(sc.params(), key)
    elif key in {f.name for f in dataclasses.fields(Scenario)}:
        current = getattr(sc, key)
    else:
        raise ConfigError(f"unknown parameter {key!r}")
    if isinstance(current, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float) or current is None:
        return float(text)
    if isinstance(current, str):
        return text
    return yaml.safe_load(text)


def override(sc: Scenario, key: str, value: Any) -> Scenario:
    if key in _PROTOCOL_KEYS:
        return sc.with_(protocol={**sc.protocol, key: value})
    return sc.with_(**{key: value})


# building and running


@dataclass
class Streams:
    mobility: np.random.SeedSequence
    traffic: np.random.Generator
    radio: np.random.Generator
    protocol: np.random.Generator


def split_seed(seed: int) -> Streams:
    mob, traffic, radio, proto = np.random.SeedSequence(seed).spawn(4)
    return Streams(
        mob,
        np.random.default_rng(traffic),
        np.random.default_rng(radio),
        np.random.default_rng(proto),
    )


def make_flows(sc: Scenario, rng: np.random.Generator) -> list[OnOffFlow]:
    """Sources are distinct non-hotspot nodes in a seeded order.

    With the same seed, the sources of a k-flow scenario are a prefix of
    those of any larger one.
    """
    order = [int(x) for x in rng.permutation(sc.node_count - 1)]
    starts = rng.uniform(sc.traffic_start, sc.traffic_start + sc.start_spread, size=sc.node_count - 1)
    hot = rng.random(size=sc.node_count - 1)
    picks = rng.integers(0, sc.node_count - 1, size=sc.node_count - 1)
    flows = []
    for i in range(sc.flows):
        src = order[i]
        if hot[i] < sc.hotspot_prob:
            dest = sc.hotspot
        else:
            # uniform over every node except the source
            dest = int(picks[i])
            if dest >= src:
                dest += 1
        flows.append(
            OnOffFlow(src, dest, float(starts[i]), sc.duration, sc.rate, sc.on_time, sc.off_time)
        )
    return flows


def build_simulation(sc: Scenario, monitor: bool = True) -> Simulator:
    streams = split_seed(sc.seed)
    params = sc.params()
    routers: list[RouterBase] = [ENGINES[sc.engine](i, params) for i in range(sc.node_count)]
    radio = RadioModel(sc.radio_range, sc.prop_delay, sc.jitter, sc.loss_prob)
    if sc.topology == "graph":
        delays = {(l[0], l[1]): l[2] for l in sc.links if len(l) > 2}
        medium = StaticGraphMedium(sc.node_count, [l[:2] for l in sc.links], delays)
    else:
        v_max = sc.v_max if sc.topology == "random_waypoint" else 0.0
        mobility = [
            RandomWaypoint(sc.area, v_max, sc.pause_time, np.random.default_rng(s))
            for s in streams.mobility.spawn(sc.node_count)
        ]
        medium = UnitDiskMedium(mobility, sc.radio_range)
    trace = TraceLog()
    trace.header(engine=sc.engine, seed=sc.seed, nodes=sc.node_count, topology=sc.topology)
    sim = Simulator(
        routers,
        medium,
        radio,
        streams.radio,
        trace,
        monitor=loop_probe if monitor else None,
        monitor_interval=sc.monitor_interval if monitor else 0.0,
    )
    if sc.hello_start is None:
        ticks = [float(x) for x in streams.protocol.uniform(0.0, params.hello_interval, sc.node_count)]
    else:
        ticks = [sc.hello_start] * sc.node_count
    sim.start_timers(ticks)
    sim.schedule_arrivals()
    for flow in make_flows(sc, streams.traffic):
        sim.add_flow(flow)
    for k, (t, src, dest) in enumerate(sc.sends):
        sim.schedule_send(t, src, dest, k)
    return sim


def loop_probe(sim: Simulator, now: float) -> None:
    """Monitor hook: trace a LOOP line for every destination with a next-hop cycle."""
    tables = {r.id: r.rt for r in sim.routers}
    dests = sorted({e.dest for rt in tables.values() for e in rt})
    for d in dests:
        cycle = find_loop(tables, d, now)
        if cycle is not None:
            sim.trace.emit(now, cycle[0], "LOOP", "RT", [f"dest={d}", "cycle=" + ",".join(map(str, cycle))])


def run_scenario(sc: Scenario, monitor: bool = True) -> tuple[str, RunMetrics]:
    sim = build_simulation(sc, monitor)
    sim.run(sc.duration)
    text = sim.trace.text()
    return text, compute_metrics(text)


def metrics_row(sc: Scenario, m: RunMetrics) -> dict[str, Any]:
    c = m.signaling_counts
    return {
        "engine": sc.engine,
        "seed": sc.seed,
        "node_count": sc.node_count,
        "v_max": sc.v_max,
        "pause": sc.pause_time,
        "flows": sc.flows,
        "pdr": "" if m.pdr is None else f"{m.pdr:.6f}",
        "avg_delay_s": "" if m.avg_delay is None else f"{m.avg_delay:.6f}",
        "rreq": c.get("RREQ", 0),
        "rrep": c.get("RREP", 0),
        "rerr": c.get("RERR", 0),
        "hello": c.get("HELLO", 0),
        "total_signaling": m.total_signaling,
        "bytes": m.signaling_bytes,
    }


CSV_HEADER = list(metrics_row(Scenario(flows=0), RunMetrics(None, None)).keys())
