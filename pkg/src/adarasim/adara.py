"""ADARA: on-demand routing with route-request aggregation.

Every signaling packet is broadcast and carries the sender's current
sequence number, which doubles as its hello sequence number.  Relays that
already forwarded a request for a destination aggregate later requests for
it instead of flooding them again, and replies travel back only through the
designated neighbors recorded while aggregating.
"""

from __future__ import annotations

from dataclasses import replace

from .messages import Hello, Rerr, Rrep, Rreq, SignalingPacket
from .route_state import AggregateOutcome, PendingRequestTable, RouteEntry
from .router import NodeOutput, ProtocolParams, RouterBase

_EPS = 1e-9


class AdaraNode(RouterBase):
    engine = "adara"

    def __init__(self, node_id: int, params: ProtocolParams | None = None):
        super().__init__(node_id, params)
        self.next_rid = 1
        self.prt = PendingRequestTable(
            self.params.prt_lifetime, self.params.update_neighbor_on_retransmission
        )
        self.last_broadcast_at = float("-inf")

    @property
    def hsn(self) -> int:
        return self.own_seq

    def _broadcast(self, out: NodeOutput, packet: SignalingPacket, now: float) -> None:
        out.broadcasts.append(packet)
        self.last_broadcast_at = now

    # route discovery

    def _originate_rreq(self, dest: int, now: float, out: NodeOutput) -> None:
        rreq = Rreq(
            rid=self.next_rid,
            origin=self.id,
            origin_seq=self.own_seq,
            dest=dest,
            dest_seq=self._wanted_seq(dest, now),
            hops_to_origin=0,
            hsn=self.hsn,
        )
        self.next_rid += 1
        # our own tuple makes echoes of this request duplicates here
        self.prt.aggregate(rreq, self.id, now)
        self._broadcast(out, rreq, now)

    def handle_rreq(self, rreq: Rreq, sender: int, now: float) -> NodeOutput:
        out = NodeOutput()
        self._heard(sender, rreq.hsn, now)
        pending = self.prt.lookup(rreq.dest)
        asked = pending.asked_seq() if pending is not None else -1
        outcome = self.prt.aggregate(rreq, sender, now)
        if rreq.origin != self.id:
            self.rt.offer(
                rreq.origin,
                rreq.origin_seq,
                rreq.hops_to_origin + 1,
                sender,
                now,
                self.params.active_route_timeout,
            )
        if outcome is AggregateOutcome.DUPLICATE:
            return out
        route = self.rt.usable(rreq.dest, now)
        if rreq.dest == self.id or (route is not None and route.dest_seq >= rreq.dest_seq):
            self._reply(rreq, sender, route, now, out)
        elif not outcome.suppresses_forwarding or (
            # nobody upstream asked for a route this fresh, so the reply we wait for won't do
            outcome is AggregateOutcome.AGGREGATED and rreq.dest_seq > asked
        ):
            fwd = replace(rreq, hops_to_origin=rreq.hops_to_origin + 1, hsn=self.hsn)
            self._broadcast(out, fwd, now)
        return out

    def _reply(self, rreq: Rreq, sender: int, route: RouteEntry, now: float, out: NodeOutput) -> None:
        if route.dest == self.id:
            seq, hops = self.originate_rrep_seq(rreq.dest_seq), 0
        else:
            seq, hops = route.dest_seq, route.hop_count
        ldn = [p for p in self.prt.take_precursors(rreq.dest, seq) if p != self.id] or [sender]
        if route.dest != self.id:
            route.precursors.update(ldn)
        self._broadcast(out, Rrep(rreq.dest, seq, hops, tuple(ldn), self.hsn), now)

    def handle_rrep(self, rrep: Rrep, sender: int, now: float) -> NodeOutput:
        out = NodeOutput()
        self._heard(sender, rrep.hsn, now)
        if rrep.dest == self.id:
            return out
        stored = self.rt.lookup(rrep.dest)
        if stored is not None and rrep.dest_seq < stored.dest_seq:
            return out
        self.rt.offer(
            rrep.dest,
            rrep.dest_seq,
            rrep.hops_to_dest + 1,
            sender,
            now,
            self.params.active_route_timeout,
        )
        route = self.rt.usable(rrep.dest, now)
        if route is None:
            return out
        designated = self.id in rrep.ldn
        if designated or (
            self.params.rrep_forward_rule == "literal" and self.prt.count(rrep.dest) > 1
        ):
            ldn = [p for p in self.prt.take_precursors(rrep.dest, route.dest_seq) if p != self.id]
            # an origin with nobody else waiting has nothing to pass on
            if ldn:
                route.precursors.update(ldn)
                fwd = Rrep(rrep.dest, route.dest_seq, route.hop_count, tuple(ldn), self.hsn)
                self._broadcast(out, fwd, now)
        self._flush(rrep.dest, now, out)
        return out

    # errors

    def handle_rerr(self, rerr: Rerr, sender: int, now: float) -> NodeOutput:
        out = NodeOutput()
        self._heard(sender, rerr.hsn, now)
        affected = self.rt.invalidate_via(sender, rerr.dests, now)
        if any(e.precursors for e in affected):
            self._broadcast(out, Rerr(self.hsn, rerr.unreachable), now)
        return out

    def _link_down(self, neighbor, now, out, extra_dest=None, notify=None) -> None:
        self.neighbor_last_heard.pop(neighbor, None)
        affected = self.rt.invalidate_via(neighbor, None, now)
        lua = [(e.dest, e.dest_seq) for e in affected if e.precursors]
        if extra_dest is not None and all(d != extra_dest for d, _ in lua):
            lua.append((extra_dest, self._known_seq(extra_dest)))
        if lua:
            self._broadcast(out, Rerr(self.hsn, lua), now)

    def _report_no_route(self, dest: int, sender: int, now: float, out: NodeOutput) -> None:
        self._broadcast(out, Rerr(self.hsn, [(dest, self._known_seq(dest))]), now)

    # timers

    def _expire_tables(self, now: float) -> None:
        self.rt.expire(now)
        self.prt.expire(now)

    def _hello_tick(self, now: float, out: NodeOutput) -> None:
        # any broadcast within the last interval already proved we are alive
        if now - self.last_broadcast_at >= self.params.hello_interval - _EPS:
            self._set_seq(self.own_seq + 1)
            self._broadcast(out, Hello(self.hsn), now)
