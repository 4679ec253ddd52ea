import pytest

from adarasim.messages import Rreq
from adarasim.route_state import (
    AggregateOutcome,
    PendingRequestTable,
    RouteEntry,
    RoutingTable,
)

S, A, B, M, N, D = 0, 1, 2, 3, 4, 9


def rreq(origin, rid, dest=D):
    return Rreq(rid=rid, origin=origin, origin_seq=0, dest=dest, dest_seq=0, hops_to_origin=0, hsn=0)


# routing table


def test_hello_installs_neighbor_route():
    rt = RoutingTable(owner=5)
    rt.process_hello(1, 5, now=0.0, hold_time=3.0)
    e = rt.lookup(1)
    assert (e.dest_seq, e.hop_count, e.next_hop, e.valid) == (5, 1, 1, True)
    assert e.lifetime == 3.0


def test_hello_revalidates_invalid_entry():
    rt = RoutingTable(owner=5)
    rt.process_hello(1, 5, 0.0, 3.0)
    rt.invalidate(rt.lookup(1), 1.0)
    rt.process_hello(1, 6, 2.0, 3.0)
    assert rt.lookup(1).valid and rt.lookup(1).dest_seq == 6


def test_hello_last_write_wins():
    rt = RoutingTable(owner=5)
    rt.process_hello(1, 5, 0.0, 3.0)
    rt.process_hello(1, 7, 0.5, 3.0)
    assert rt.lookup(1).dest_seq == 7


def test_own_hello_rejected():
    with pytest.raises(ValueError):
        RoutingTable(owner=5).process_hello(5, 1, 0.0, 3.0)


def test_put_enforces_hop_invariants():
    rt = RoutingTable(owner=5)
    with pytest.raises(ValueError):
        rt.put(RouteEntry(3, 0, 0, 3))
    with pytest.raises(ValueError):
        rt.put(RouteEntry(3, 0, 1, 4))
    with pytest.raises(ValueError):
        rt.put(RouteEntry(5, 0, 2, 4))


def test_offer_freshness_rule():
    rt = RoutingTable(owner=5)
    assert rt.offer(D, 2, 3, M, 0.0, 10.0)
    assert not rt.offer(D, 1, 1, N, 0.0, 10.0)  # older
    assert not rt.offer(D, 2, 3, N, 0.0, 10.0)  # same seq, same hops
    assert rt.offer(D, 2, 2, N, 0.0, 10.0)  # same seq, shorter
    assert rt.lookup(D).next_hop == N
    assert rt.offer(D, 3, 5, M, 0.0, 10.0)  # newer wins even if longer


def test_offer_revives_dead_route_at_equal_seq_and_length():
    rt = RoutingTable(owner=5)
    rt.offer(D, 2, 2, M, 0.0, 10.0)
    rt.expire(11.0)
    assert rt.offer(D, 2, 2, N, 11.0, 10.0)
    assert rt.usable(D, 11.0).next_hop == N


def test_offer_refuses_longer_route_at_equal_seq_even_when_dead():
    # two neighbours whose routes died together must not adopt each other
    rt = RoutingTable(owner=5)
    rt.offer(D, 2, 2, M, 0.0, 10.0)
    rt.expire(11.0)
    assert not rt.offer(D, 2, 3, N, 11.0, 10.0)
    assert rt.usable(D, 11.0) is None


def test_expire_keeps_sequence_number():
    rt = RoutingTable(owner=5)
    rt.offer(D, 4, 2, M, 0.0, 10.0)
    rt.expire(10.0)
    assert rt.lookup(D).valid  # boundary: still alive
    rt.expire(11.0)
    e = rt.lookup(D)
    assert not e.valid and e.dest_seq == 4
    assert rt.usable(D, 11.0) is None


def test_invalid_entries_garbage_collected():
    rt = RoutingTable(owner=5, gc_after=60.0)
    rt.offer(D, 4, 2, M, 0.0, 10.0)
    rt.expire(11.0)
    rt.expire(71.0)
    assert D in rt
    rt.expire(71.5)
    assert D not in rt


def test_entry_past_lifetime_not_usable_even_before_expire():
    rt = RoutingTable(owner=5)
    rt.offer(D, 4, 2, M, 0.0, 10.0)
    assert rt.usable(D, 10.5) is None


def test_invalidate_via_listed_dest():
    rt = RoutingTable(owner=5)
    rt.offer(D, 1, 2, M, 0.0, 10.0)
    rt.lookup(D).precursors.add(7)
    affected = rt.invalidate_via(M, [D], 1.0)
    assert [e.dest for e in affected] == [D]
    assert affected[0].precursors == {7}
    assert not rt.lookup(D).valid


def test_invalidate_via_other_next_hop_is_noop():
    rt = RoutingTable(owner=5)
    rt.offer(D, 1, 2, 7, 0.0, 10.0)
    assert rt.invalidate_via(M, [D], 1.0) == []
    assert rt.lookup(D).valid


def test_link_down_invalidates_all_routes_via_neighbor():
    rt = RoutingTable(owner=5)
    rt.process_hello(M, 0, 0.0, 3.0)
    rt.offer(D, 1, 2, M, 0.0, 10.0)
    rt.offer(8, 1, 3, M, 0.0, 10.0)
    rt.offer(7, 1, 2, N, 0.0, 10.0)
    affected = rt.invalidate_via(M, None, 1.0)
    assert sorted(e.dest for e in affected) == [M, 8, D]
    assert rt.lookup(7).valid


def test_dump_is_stable():
    rt = RoutingTable(owner=5)
    rt.offer(D, 1, 2, M, 0.0, 10.0)
    rt.lookup(D).precursors |= {4, 2}
    assert rt.lookup(D).dump() == "9\t1\t2\t3\t2,4\t10.000000\t1"


# pending request table


def test_aggregate_new_entry_on_empty_table():
    prt = PendingRequestTable()
    assert prt.aggregate(rreq(S, 1), S, 0.0) is AggregateOutcome.NEW_ENTRY
    assert prt.count(D) == 1


def test_aggregate_second_origin_is_aggregated():
    prt = PendingRequestTable()
    prt.aggregate(rreq(S, 1), S, 0.0)
    assert prt.aggregate(rreq(B, 1), B, 0.1) is AggregateOutcome.AGGREGATED
    assert [(t.origin, t.precursor_neighbor) for t in prt.lookup(D).tuples] == [(S, S), (B, B)]


def test_aggregate_replica_is_duplicate():
    prt = PendingRequestTable()
    prt.aggregate(rreq(S, 1), M, 0.0)
    before = prt.dump()
    assert prt.aggregate(rreq(S, 1), N, 0.1) is AggregateOutcome.DUPLICATE
    assert prt.dump() == before


def test_aggregate_retransmission_updates_rid():
    prt = PendingRequestTable()
    prt.aggregate(rreq(S, 3), M, 0.0)
    assert prt.aggregate(rreq(S, 4), M, 1.0) is AggregateOutcome.RETRANSMISSION
    t = prt.lookup(D).tuples[0]
    assert (t.origin, t.rid, t.precursor_neighbor) == (S, 4, M)
    assert prt.lookup(D).lifetime == 1.0 + prt.lifetime


def test_retransmission_neighbor_update_toggle():
    on = PendingRequestTable(update_neighbor_on_retransmission=True)
    off = PendingRequestTable(update_neighbor_on_retransmission=False)
    for prt in (on, off):
        prt.aggregate(rreq(S, 3), M, 0.0)
        prt.aggregate(rreq(S, 4), N, 1.0)
    assert on.lookup(D).tuples[0].precursor_neighbor == N
    assert off.lookup(D).tuples[0].precursor_neighbor == M
    assert off.lookup(D).tuples[0].rid == 4


def test_late_replica_of_older_request_is_duplicate():
    prt = PendingRequestTable()
    prt.aggregate(rreq(S, 3), M, 0.0)
    prt.aggregate(rreq(S, 4), N, 1.0)
    before = prt.dump()
    assert prt.aggregate(rreq(S, 3), M, 1.1) is AggregateOutcome.DUPLICATE
    assert prt.dump() == before
    prt.take_precursors(D)
    assert prt.aggregate(rreq(S, 3), M, 1.2) is AggregateOutcome.DUPLICATE
    assert prt.aggregate(rreq(S, 5), M, 1.2) is AggregateOutcome.NEW_ENTRY


def test_outcome_forwarding_flags():
    assert AggregateOutcome.DUPLICATE.suppresses_forwarding
    assert AggregateOutcome.AGGREGATED.suppresses_forwarding
    assert not AggregateOutcome.NEW_ENTRY.suppresses_forwarding
    assert not AggregateOutcome.RETRANSMISSION.suppresses_forwarding


def test_take_precursors_returns_neighbors_and_removes_entry():
    prt = PendingRequestTable()
    prt.aggregate(rreq(S, 1), M, 0.0)
    prt.aggregate(rreq(A, 1), 8, 0.0)
    assert prt.take_precursors(D) == [M, 8]
    assert D not in prt


def test_take_precursors_absent_dest():
    prt = PendingRequestTable()
    assert prt.take_precursors(D) == []
    assert len(prt) == 0


def test_take_precursors_dedups_shared_neighbor():
    prt = PendingRequestTable()
    prt.aggregate(rreq(S, 1), M, 0.0)
    prt.aggregate(rreq(B, 1), M, 0.0)
    assert prt.take_precursors(D) == [M]


def test_answered_requests_stay_duplicates():
    prt = PendingRequestTable(lifetime=6.0)
    prt.aggregate(rreq(S, 1), M, 0.0)
    prt.take_precursors(D)
    assert prt.aggregate(rreq(S, 1), N, 0.5) is AggregateOutcome.DUPLICATE
    prt.expire(6.5)
    assert prt.aggregate(rreq(S, 1), N, 6.5) is AggregateOutcome.NEW_ENTRY


def test_prt_expiry_boundary_and_removal():
    prt = PendingRequestTable(lifetime=10.0)
    prt.aggregate(rreq(S, 1), M, 0.0)
    prt.expire(10.0)
    assert D in prt
    assert prt.expire(11.0) == [D]
    assert D not in prt
    assert prt.aggregate(rreq(S, 1), M, 11.0) is AggregateOutcome.NEW_ENTRY
