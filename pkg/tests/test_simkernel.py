import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adarasim.messages import DataPacket, Hello
from adarasim.router import ProtocolParams
from adarasim.adara import AdaraNode
from adarasim.simkernel import (
    CausalityError,
    EventKind,
    EventQueue,
    OnOffFlow,
    RadioModel,
    RandomWaypoint,
    Simulator,
    StaticGraphMedium,
    UnitDiskMedium,
    step_mobility,
)


def static_disk(points, radius=250.0):
    models = [
        RandomWaypoint((2000.0, 2000.0), 0.0, 0.0, np.random.default_rng(i), start=p)
        for i, p in enumerate(points)
    ]
    return UnitDiskMedium(models, radius)


def make_sim(medium, n, jitter=0.0, loss=0.0):
    routers = [AdaraNode(i, ProtocolParams()) for i in range(n)]
    radio = RadioModel(250.0, 0.001, jitter, loss)
    return Simulator(routers, medium, radio, np.random.default_rng(0))


# event queue


def test_queue_orders_by_time_then_insertion():
    q = EventQueue()
    q.push(2.0, EventKind.TIMER_TICK, "late")
    q.push(1.0, EventKind.TIMER_TICK, "a")
    q.push(1.0, EventKind.PACKET_DELIVERY, "b")
    assert [q.pop().payload for _ in range(3)] == ["a", "b", "late"]


def test_queue_rejects_events_in_the_past():
    q = EventQueue()
    q.push(5.0, EventKind.TIMER_TICK)
    q.pop()
    with pytest.raises(CausalityError):
        q.push(4.0, EventKind.TIMER_TICK)


@settings(max_examples=200)
@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=50))
def test_queue_pops_sorted(times):
    q = EventQueue()
    for t in times:
        q.push(t, EventKind.TIMER_TICK)
    out = [q.pop() for _ in times]
    assert [(e.time, e.seq) for e in out] == sorted((e.time, e.seq) for e in out)
    assert len({e.seq for e in out}) == len(times)


# radio


def test_radio_rejects_certain_loss():
    with pytest.raises(ValueError):
        RadioModel(loss_prob=1.0)
    with pytest.raises(ValueError):
        RadioModel(range=0.0)


def test_broadcast_reaches_every_neighbor_in_range():
    medium = static_disk([(0, 0), (100, 0), (0, 100), (200, 0), (251, 0)])
    sim = make_sim(medium, 5)
    # nodes 1..3 are within 250 m, node 4 is 251 m away
    assert sim.broadcast(0, Hello(hsn=1)) == 3
    targets = sorted(sim.queue.pop().payload[0] for _ in range(3))
    assert targets == [1, 2, 3]
    assert len(sim.queue) == 0


def test_range_boundary_is_inclusive_at_250_and_excludes_251():
    medium = static_disk([(0, 0), (250, 0), (0, 251)])
    assert medium.in_range(0, 1, 0.0)
    assert not medium.in_range(0, 2, 0.0)


def test_jitter_is_shared_by_all_receivers_of_one_transmission():
    medium = static_disk([(0, 0), (10, 0), (20, 0), (30, 0)])
    sim = make_sim(medium, 4, jitter=0.01)
    sim.broadcast(0, Hello(hsn=1))
    times = {sim.queue.pop().time for _ in range(3)}
    assert len(times) == 1
    (t,) = times
    assert 0.001 <= t < 0.011


def test_transmissions_of_one_node_do_not_overlap():
    medium = static_disk([(0, 0), (10, 0)])
    sim = make_sim(medium, 2, jitter=0.01)
    sim.broadcast(0, Hello(hsn=1))
    sim.broadcast(0, Hello(hsn=2))
    first, second = sim.queue.pop(), sim.queue.pop()
    assert first.payload[2].hsn == 1 and second.payload[2].hsn == 2
    assert second.time >= first.time


def test_unicast_in_range_delivers_after_prop_delay():
    medium = StaticGraphMedium(2, [(0, 1)])
    sim = make_sim(medium, 2)
    pkt = DataPacket(0, 1, 0, 0.0)
    assert sim.unicast(0, 1, pkt)
    ev = sim.queue.pop()
    assert ev.time == pytest.approx(0.001)
    assert ev.payload == (1, 0, pkt)


def test_unicast_to_self_is_rejected():
    sim = make_sim(StaticGraphMedium(2, [(0, 1)]), 2)
    with pytest.raises(ValueError):
        sim.unicast(0, 0, DataPacket(0, 1, 0, 0.0))


def test_unicast_out_of_range_signals_link_failure():
    # node 1 sits 300 m away: the hop is gone, nothing is delivered
    medium = static_disk([(0, 0), (300, 0)])
    sim = make_sim(medium, 2)
    calls = []
    router = sim.routers[0]
    orig = router.on_link_failure

    def spy(nh, pkt, now, prev=None):
        calls.append(nh)
        return orig(nh, pkt, now, prev)

    router.on_link_failure = spy
    assert not sim.unicast(0, 1, DataPacket(0, 1, 0, 0.0))
    assert calls == [1]
    assert all(ev.kind is not EventKind.PACKET_DELIVERY for ev in sim.queue._heap)


def test_per_link_delay_override():
    medium = StaticGraphMedium(3, [(0, 1), (0, 2)], {(0, 2): 0.005})
    sim = make_sim(medium, 3)
    sim.broadcast(0, Hello(hsn=1))
    arrivals = sorted((ev.time, ev.payload[0]) for ev in (sim.queue.pop(), sim.queue.pop()))
    assert arrivals == [(pytest.approx(0.001), 1), (pytest.approx(0.005), 2)]


def test_static_graph_rejects_self_links():
    with pytest.raises(ValueError):
        StaticGraphMedium(2, [(1, 1)])


# mobility


def test_zero_speed_means_static_forever():
    m = RandomWaypoint((300, 1000), 0.0, 0.0, np.random.default_rng(3))
    p0 = m.position_at(0.0)
    assert m.position_at(1e6) == p0
    assert math.isinf(m.state.pause_until)


def test_long_pause_allows_at_most_one_leg():
    m = RandomWaypoint((300, 1000), 20.0, 900.0, np.random.default_rng(5))
    first = m.state
    step_mobility(m, 899.0)
    # the first leg's travel takes well under 900 s, then it pauses 900 s
    assert m.state is first
    assert m.position_at(899.0) == first.waypoint


def test_position_follows_closed_form_kinematics():
    m = RandomWaypoint((300, 1000), 20.0, 0.0, np.random.default_rng(11))
    st0 = m.state
    arrival = st0.arrival_time()
    dx = st0.waypoint[0] - st0.position[0]
    dy = st0.waypoint[1] - st0.position[1]
    norm = math.hypot(dx, dy)
    for frac in (0.0, 0.25, 0.5, 0.9):
        t = frac * arrival
        x, y = m.position_at(t)
        assert x == pytest.approx(st0.position[0] + t * st0.speed * dx / norm)
        assert y == pytest.approx(st0.position[1] + t * st0.speed * dy / norm)


@settings(max_examples=100)
@given(
    seed=st.integers(0, 10_000),
    v_max=st.floats(0.5, 30.0),
    pause=st.floats(0.0, 20.0),
    times=st.lists(st.floats(0.0, 500.0), min_size=1, max_size=20),
)
def test_mobility_stays_in_area_and_under_speed_limit(seed, v_max, pause, times):
    w, h = 300.0, 1000.0
    m = RandomWaypoint((w, h), v_max, pause, np.random.default_rng(seed))
    for t in sorted(times):
        x, y = m.position_at(t)
        assert -1e-9 <= x <= w + 1e-9 and -1e-9 <= y <= h + 1e-9
        assert 0.0 < m.state.speed <= v_max


def test_path_does_not_depend_on_query_pattern():
    a = RandomWaypoint((300, 1000), 20.0, 2.0, np.random.default_rng(9))
    b = RandomWaypoint((300, 1000), 20.0, 2.0, np.random.default_rng(9))
    for t in np.linspace(0, 200, 400):
        a.position_at(float(t))
    assert a.position_at(200.0) == b.position_at(200.0)


# traffic


def test_one_on_second_emits_fifteen_packets():
    f = OnOffFlow(0, 1, start=0.0, stop=1.0)
    assert len(f.traffic_tick(1.0)) == 15


def test_off_second_emits_nothing():
    f = OnOffFlow(0, 1, start=0.0, stop=100.0)
    f.traffic_tick(0.999)
    assert f.traffic_tick(1.999) == []


def test_ten_second_flow_emits_seventy_five_packets():
    f = OnOffFlow(0, 1, start=0.0, stop=10.0)
    pkts = f.traffic_tick(10.0)
    assert len(pkts) == 75
    gaps = np.diff([p.created_at for p in pkts[:15]])
    assert np.allclose(gaps, 1 / 15)


def test_flow_inside_simulator_matches_closed_form():
    sim = make_sim(StaticGraphMedium(2, [(0, 1)]), 2)
    sim.add_flow(OnOffFlow(0, 1, start=0.5, stop=10.5))
    sim.run(20.0)
    origs = [l for l in sim.trace.lines if "\tORIG\t" in l]
    assert len(origs) == 75


# symmetry and determinism


@settings(max_examples=50)
@given(st.integers(0, 1000), st.floats(0.0, 100.0))
def test_unit_disk_is_symmetric(seed, t):
    models = [RandomWaypoint((300, 1000), 20.0, 0.0, np.random.default_rng(seed + i)) for i in range(8)]
    medium = UnitDiskMedium(models, 250.0)
    for a in range(8):
        for b in medium.neighbors(a, t):
            assert a in medium.neighbors(b, t)
