"""Routing table (RT) and pending request table (PRT).

Both tables are owned by exactly one router and mutated in place.  The PRT is
where route requests get aggregated: one entry per destination holding a
precursor tuple per requesting origin.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .messages import Rreq


@dataclass
class RouteEntry:
    dest: int
    dest_seq: int
    hop_count: int
    next_hop: int
    precursors: set[int] = field(default_factory=set)
    lifetime: float = 0.0
    valid: bool = True
    # time the entry stopped being valid; used for garbage collection
    invalid_since: float | None = None

    def usable(self, now: float) -> bool:
        return self.valid and now <= self.lifetime

    def dump(self) -> str:
        prec = ",".join(str(p) for p in sorted(self.precursors))
        return (
            f"{self.dest}\t{self.dest_seq}\t{self.hop_count}\t{self.next_hop}\t"
            f"{prec}\t{self.lifetime:.6f}\t{int(self.valid)}"
        )


class RoutingTable:
    """Per-destination routes with soft-state lifetimes.

    Expired routes are marked invalid rather than deleted so their sequence
    numbers keep guarding later freshness comparisons; they are garbage
    collected ``gc_after`` seconds after becoming invalid.
    """

    def __init__(self, owner: int, gc_after: float = 60.0):
        self.owner = owner
        self.gc_after = gc_after
        self._entries: dict[int, RouteEntry] = {}

    def __contains__(self, dest: int) -> bool:
        return dest in self._entries

    def __iter__(self) -> Iterator[RouteEntry]:
        return iter(list(self._entries.values()))

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, dest: int) -> RouteEntry | None:
        return self._entries.get(dest)

    def usable(self, dest: int, now: float) -> RouteEntry | None:
        entry = self._entries.get(dest)
        if entry is not None and entry.usable(now):
            return entry
        return None

    def put(self, entry: RouteEntry) -> RouteEntry:
        if (entry.hop_count == 0) != (entry.dest == self.owner):
            raise ValueError("hop_count is 0 exactly for the self route")
        if entry.hop_count == 1 and entry.next_hop != entry.dest:
            raise ValueError("a 1-hop route must use the destination as next hop")
        self._entries[entry.dest] = entry
        return entry

    def process_hello(self, sender: int, hsn: int, now: float, hold_time: float) -> RouteEntry:
        """Install or refresh the one-hop route to ``sender``.

        The sequence number is taken from the hello unconditionally; the
        medium delivers each link in order so it never goes backwards.
        """
        if sender == self.owner:
            raise ValueError("a router does not process its own hello")
        entry = self._entries.get(sender)
        if entry is None:
            entry = RouteEntry(sender, hsn, 1, sender)
            self._entries[sender] = entry
        entry.hop_count = 1
        entry.next_hop = sender
        entry.dest_seq = hsn
        entry.valid = True
        entry.invalid_since = None
        entry.lifetime = max(entry.lifetime, now + hold_time)
        return entry

    def offer(
        self,
        dest: int,
        dest_seq: int,
        hop_count: int,
        next_hop: int,
        now: float,
        lifetime: float,
    ) -> bool:
        """Install a route if it is fresher than what is stored.

        Fresher means a higher sequence number, or the same one with fewer
        hops.  A stored route that is no longer usable may also be replaced
        by an equal one that is no longer.  Accepting anything worse would
        let two nodes whose routes died together adopt each other.  Returns
        True when the table changed.
        """
        entry = self._entries.get(dest)
        if entry is not None:
            newer = dest_seq > entry.dest_seq
            same = dest_seq == entry.dest_seq
            shorter = hop_count < entry.hop_count
            revive = hop_count == entry.hop_count and not entry.usable(now)
            if not (newer or (same and (shorter or revive))):
                return False
            entry.dest_seq = dest_seq
            entry.hop_count = hop_count
            entry.next_hop = next_hop
            entry.valid = True
            entry.invalid_since = None
            entry.lifetime = max(entry.lifetime, now + lifetime)
            return True
        self.put(RouteEntry(dest, dest_seq, hop_count, next_hop, lifetime=now + lifetime))
        return True

    def refresh(self, dest: int, now: float, lifetime: float) -> None:
        entry = self._entries.get(dest)
        if entry is not None and entry.valid:
            entry.lifetime = max(entry.lifetime, now + lifetime)

    def invalidate(self, entry: RouteEntry, now: float) -> None:
        entry.valid = False
        entry.invalid_since = now

    def invalidate_via(
        self,
        broken_next_hop: int,
        unreachable: Iterable[int] | None,
        now: float,
    ) -> list[RouteEntry]:
        """Invalidate valid routes through ``broken_next_hop``.

        With ``unreachable=None`` every route using that next hop is affected
        (local link failure); otherwise only the listed destinations are.
        Returns copies of the affected entries taken before invalidation so
        callers can inspect their precursor sets.  Precursors are cleared on
        the live entries since nobody routes through a dead route.
        """
        wanted = None if unreachable is None else set(unreachable)
        affected = []
        for entry in self._entries.values():
            if not entry.valid or entry.next_hop != broken_next_hop or entry.dest == self.owner:
                continue
            if wanted is not None and entry.dest not in wanted:
                continue
            affected.append(
                RouteEntry(
                    entry.dest,
                    entry.dest_seq,
                    entry.hop_count,
                    entry.next_hop,
                    set(entry.precursors),
                    entry.lifetime,
                    True,
                )
            )
            self.invalidate(entry, now)
            entry.precursors.clear()
        return affected

    def expire(self, now: float) -> list[RouteEntry]:
        """Mark routes past their lifetime invalid; drop long-dead ones.

        Returns the entries that became invalid in this call.
        """
        newly = []
        for dest in list(self._entries):
            entry = self._entries[dest]
            if dest == self.owner:
                continue
            if entry.valid and now > entry.lifetime:
                self.invalidate(entry, now)
                newly.append(entry)
            elif not entry.valid and entry.invalid_since is not None:
                if now - entry.invalid_since > self.gc_after:
                    del self._entries[dest]
        return newly

    def dump(self) -> str:
        return "\n".join(e.dump() for e in sorted(self._entries.values(), key=lambda e: e.dest))


@dataclass
class PrecursorTuple:
    origin: int
    rid: int
    precursor_neighbor: int
    # freshest destination sequence number the request asked for
    dest_seq: int = 0


@dataclass
class PendingRequestEntry:
    dest: int
    tuples: list[PrecursorTuple]
    lifetime: float

    def origins(self) -> set[int]:
        return {t.origin for t in self.tuples}

    def asked_seq(self) -> int:
        return max((t.dest_seq for t in self.tuples), default=-1)


class AggregateOutcome(enum.Enum):
    DUPLICATE = "Duplicate"
    RETRANSMISSION = "Retransmission"
    AGGREGATED = "Aggregated"
    NEW_ENTRY = "NewEntry"

    @property
    def suppresses_forwarding(self) -> bool:
        return self in (AggregateOutcome.DUPLICATE, AggregateOutcome.AGGREGATED)


class PendingRequestTable:
    """Aggregates route requests per destination.

    ``update_neighbor_on_retransmission`` also moves the precursor neighbor of
    a retransmitted request to the neighbor the new copy came from (the node
    may have moved).  Turn it off to update only the request id.

    Tuples handed out by :meth:`take_precursors` are remembered until their
    entry would have expired so late replicas of an answered request are
    still recognised as duplicates.
    """

    def __init__(self, lifetime: float = 6.0, update_neighbor_on_retransmission: bool = True):
        self.lifetime = lifetime
        self.update_neighbor_on_retransmission = update_neighbor_on_retransmission
        self._entries: dict[int, PendingRequestEntry] = {}
        # (origin, dest) -> (highest answered rid, forget after)
        self._answered: dict[tuple[int, int], tuple[int, float]] = {}

    def __contains__(self, dest: int) -> bool:
        return dest in self._entries

    def __iter__(self) -> Iterator[PendingRequestEntry]:
        return iter(list(self._entries.values()))

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, dest: int) -> PendingRequestEntry | None:
        return self._entries.get(dest)

    def count(self, dest: int) -> int:
        entry = self._entries.get(dest)
        return len(entry.tuples) if entry else 0

    def _is_duplicate(self, origin: int, rid: int, dest: int) -> bool:
        # request ids only grow, so an older id than one already seen is a late replica
        answered = self._answered.get((origin, dest))
        if answered is not None and rid <= answered[0]:
            return True
        for entry in self._entries.values():
            for t in entry.tuples:
                if t.origin == origin and (t.rid == rid or (entry.dest == dest and rid < t.rid)):
                    return True
        return False

    def aggregate(self, rreq: Rreq, sender: int, now: float) -> AggregateOutcome:
        if self._is_duplicate(rreq.origin, rreq.rid, rreq.dest):
            return AggregateOutcome.DUPLICATE
        entry = self._entries.get(rreq.dest)
        if entry is not None:
            entry.lifetime = now + self.lifetime
            for t in entry.tuples:
                if t.origin == rreq.origin:
                    t.rid = rreq.rid
                    t.dest_seq = max(t.dest_seq, rreq.dest_seq)
                    if self.update_neighbor_on_retransmission:
                        t.precursor_neighbor = sender
                    return AggregateOutcome.RETRANSMISSION
            entry.tuples.append(PrecursorTuple(rreq.origin, rreq.rid, sender, rreq.dest_seq))
            return AggregateOutcome.AGGREGATED
        self._entries[rreq.dest] = PendingRequestEntry(
            rreq.dest, [PrecursorTuple(rreq.origin, rreq.rid, sender, rreq.dest_seq)], now + self.lifetime
        )
        return AggregateOutcome.NEW_ENTRY

    def take_precursors(self, dest: int, dest_seq: int | None = None) -> list[int]:
        """Remove the tuples for ``dest`` and return their distinct precursor neighbors.

        With ``dest_seq`` only the requests that a reply carrying that sequence
        number satisfies are taken; the rest keep waiting for a fresher one.
        """
        entry = self._entries.get(dest)
        if entry is None:
            return []
        if dest_seq is None:
            taken, kept = entry.tuples, []
        else:
            taken = [t for t in entry.tuples if t.dest_seq <= dest_seq]
            kept = [t for t in entry.tuples if t.dest_seq > dest_seq]
        if kept:
            entry.tuples = kept
        else:
            del self._entries[dest]
        out: list[int] = []
        for t in taken:
            prev = self._answered.get((t.origin, dest))
            rid = t.rid if prev is None else max(t.rid, prev[0])
            self._answered[(t.origin, dest)] = (rid, entry.lifetime)
            if t.precursor_neighbor not in out:
                out.append(t.precursor_neighbor)
        return out

    def expire(self, now: float) -> list[int]:
        """Delete entries past their lifetime; returns the removed destinations."""
        gone = [d for d, e in self._entries.items() if now > e.lifetime]
        for d in gone:
            del self._entries[d]
        for key in [k for k, (_, exp) in self._answered.items() if now > exp]:
            del self._answered[key]
        return gone

    def dump(self) -> str:
        lines = []
        for entry in sorted(self._entries.values(), key=lambda e: e.dest):
            tuples = ",".join(f"{t.origin}:{t.rid}:{t.precursor_neighbor}" for t in entry.tuples)
            lines.append(f"{entry.dest}\t{tuples}\t{entry.lifetime:.6f}")
        return "\n".join(lines)
