"""Reference AODV engine used as the comparison baseline.

Requests are flooded and de-duplicated per (source, broadcast id); replies
are unicast back along the reverse route; errors go to precursors only.
Hellos are periodic and never suppressed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .messages import Hello, Rerr, Rrep, Rreq
from .router import NodeOutput, ProtocolParams, RouterBase


@dataclass
class RreqRecord:
    source: int
    broadcast_id: int
    expiry: float


class AodvNode(RouterBase):
    engine = "aodv"

    def __init__(self, node_id: int, params: ProtocolParams | None = None):
        super().__init__(node_id, params)
        self.broadcast_id = 0
        self.rreq_records: dict[tuple[int, int], RreqRecord] = {}
        # (origin, dest, dest_seq) of replies already forwarded, with expiry
        self.rrep_seen: dict[tuple[int, int, int], float] = {}

    def _remember(self, source: int, bid: int, now: float) -> None:
        self.rreq_records[(source, bid)] = RreqRecord(source, bid, now + self.params.prt_lifetime)

    def _originate_rreq(self, dest: int, now: float, out: NodeOutput) -> None:
        self._set_seq(self.own_seq + 1)
        self.broadcast_id += 1
        self._remember(self.id, self.broadcast_id, now)
        out.broadcasts.append(
            Rreq(
                rid=self.broadcast_id,
                origin=self.id,
                origin_seq=self.own_seq,
                dest=dest,
                dest_seq=self._wanted_seq(dest, now),
                hops_to_origin=0,
                hsn=self.own_seq,
            )
        )

    def handle_rreq(self, rreq: Rreq, sender: int, now: float) -> NodeOutput:
        out = NodeOutput()
        self._heard(sender, rreq.hsn, now)
        key = (rreq.origin, rreq.rid)
        if key in self.rreq_records:
            return out
        self._remember(rreq.origin, rreq.rid, now)
        timeout = self.params.active_route_timeout
        self.rt.offer(rreq.origin, rreq.origin_seq, rreq.hops_to_origin + 1, sender, now, timeout)
        reverse = self.rt.usable(rreq.origin, now)
        back = reverse.next_hop if reverse is not None else sender
        if rreq.dest == self.id:
            seq = self.originate_rrep_seq(rreq.dest_seq)
            out.unicasts.append((back, Rrep(self.id, seq, 0, (), self.own_seq, origin=rreq.origin)))
            return out
        route = self.rt.usable(rreq.dest, now)
        if route is not None and route.dest_seq >= rreq.dest_seq:
            route.precursors.add(back)
            if reverse is not None:
                reverse.precursors.add(route.next_hop)
            rrep = Rrep(rreq.dest, route.dest_seq, route.hop_count, (), self.own_seq, origin=rreq.origin)
            out.unicasts.append((back, rrep))
            return out
        out.broadcasts.append(
            replace(rreq, hops_to_origin=rreq.hops_to_origin + 1, hsn=self.own_seq)
        )
        return out

    def handle_rrep(self, rrep: Rrep, sender: int, now: float) -> NodeOutput:
        out = NodeOutput()
        self._heard(sender, rrep.hsn, now)
        if rrep.dest == self.id:
            return out
        timeout = self.params.active_route_timeout
        self.rt.offer(rrep.dest, rrep.dest_seq, rrep.hops_to_dest + 1, sender, now, timeout)
        route = self.rt.usable(rrep.dest, now)
        if route is None or route.dest_seq > rrep.dest_seq:
            # stale: we already know a fresher route
            return out
        key = (rrep.origin, rrep.dest, rrep.dest_seq)
        if rrep.origin is not None and rrep.origin != self.id and key not in self.rrep_seen:
            # only the first copy of a reply is forwarded
            self.rrep_seen[key] = now + self.params.prt_lifetime
            reverse = self.rt.usable(rrep.origin, now)
            if reverse is not None:
                route.precursors.add(reverse.next_hop)
                reverse.precursors.add(sender)
                fwd = replace(rrep, hops_to_dest=route.hop_count, hsn=self.own_seq)
                out.unicasts.append((reverse.next_hop, fwd))
        self._flush(rrep.dest, now, out)
        return out

    def handle_rerr(self, rerr: Rerr, sender: int, now: float) -> NodeOutput:
        out = NodeOutput()
        self._heard(sender, rerr.hsn, now)
        advertised = dict(rerr.unreachable)
        affected = self.rt.invalidate_via(sender, advertised, now)
        for e in affected:
            live = self.rt.lookup(e.dest)
            live.dest_seq = max(live.dest_seq, advertised[e.dest])
        self._send_rerr(affected, None, None, now, out)
        return out

    def _send_rerr(self, affected, extra_dest, notify, now, out: NodeOutput) -> None:
        recipients: set[int] = set()
        lua = []
        for e in affected:
            if e.precursors:
                recipients |= e.precursors
                lua.append((e.dest, self.rt.lookup(e.dest).dest_seq))
        if notify is not None and extra_dest is not None:
            recipients.add(notify)
            if all(d != extra_dest for d, _ in lua):
                lua.append((extra_dest, self._known_seq(extra_dest)))
        recipients.discard(self.id)
        if lua and recipients:
            out.multicasts.append((frozenset(recipients), Rerr(self.own_seq, lua)))

    def _link_down(self, neighbor, now, out, extra_dest=None, notify=None) -> None:
        self.neighbor_last_heard.pop(neighbor, None)
        affected = self.rt.invalidate_via(neighbor, None, now)
        self._send_rerr(affected, extra_dest, notify, now, out)

    def _report_no_route(self, dest: int, sender: int, now: float, out: NodeOutput) -> None:
        out.multicasts.append((frozenset({sender}), Rerr(self.own_seq, [(dest, self._known_seq(dest))])))

    def _expire_tables(self, now: float) -> None:
        self.rt.expire(now)
        for key in [k for k, r in self.rreq_records.items() if now > r.expiry]:
            del self.rreq_records[key]
        for key in [k for k, exp in self.rrep_seen.items() if now > exp]:
            del self.rrep_seen[key]

    def _hello_tick(self, now: float, out: NodeOutput) -> None:
        out.broadcasts.append(Hello(self.own_seq))
