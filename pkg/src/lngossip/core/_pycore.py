"""Pure-Python simulation core.

Reference implementation of the event loop; the compiled kernel in
`_kernel.pyx` mirrors it operation-for-operation. All state mutation is
integer arithmetic over pre-drawn randomness, so the two cores produce
identical results (enforced by the equivalence tests).
"""

from __future__ import annotations

import heapq
import math
from typing import Dict, List, Tuple

import numpy as np

from .plan import (
    FLOODING,
    K_NODE_ANN,
    K_UPDATE,
    P_NO_ROUTE,
    P_STALE_FAILURE,
    P_SUCCESS,
    RECONCILIATION,
    SPANNING,
    STAGGERED,
    WAIT_BUCKETS,
    RawResult,
    SimPlan,
)

IMPL = "python"

EV_ARRIVAL = 0
EV_INV = 1
EV_REQ = 2
EV_TICK = 3
EV_SUBBATCH = 4
EV_ROTATE = 5
EV_KEEPALIVE = 6
EV_RECON = 7
EV_PAYMENT = 8
EV_INJECT = 9



def _batching(n: int, min_batch: int, max_batches: int) -> Tuple[int, int]:
    if n == 0:
        return (min_batch, 0)
    if max_batches <= 1:
        return (n, 1)
    bs = -(-n // max_batches)
    if bs < min_batch:
        bs = min_batch
    return (bs, -(-n // bs))


def _ceil_isqrt(x: int) -> int:
    r = math.isqrt(x)
    return r if r * r == x else r + 1


def _capacity(la: int, lb: int, margin_milli: int) -> int:
    lo = la if la < lb else lb
    term = -(-_ceil_isqrt(margin_milli * margin_milli * lo) // 1000)
    c = abs(la - lb) + term
    return c if c > 1 else 1


class _Core:
    """One simulation run; holds all mutable state."""

    def __init__(self, plan: SimPlan):
        self.plan = plan
        p = plan
        self.n = p.n_nodes
        self.E = p.n_dedges
        self.T = len(p.tr_time_us)
        self.m_cap = p.m_cap
        self.duration = p.duration_us
        self.latency = p.latency_us
        self.bw = p.bandwidth_bps
        n, E, T, m_cap = self.n, self.E, self.T, self.m_cap

        self.adj_ptr = p.adj_ptr.tolist()
        self.adj_nbr = p.adj_nbr.tolist()
        self.adj_dedge = p.adj_dedge.tolist()

        self.base_present = p.base_present.tolist()
        self.base_ts = p.base_ts.tolist()
        self.base_disabled = p.base_disabled.tolist()
        self.base_cltv = p.base_cltv.tolist()
        self.base_hmin = p.base_hmin.tolist()
        self.base_hmax = p.base_hmax.tolist()
        self.base_fbase = p.base_fbase.tolist()
        self.base_fppm = p.base_fppm.tolist()

        def padded(arr, fill):
            out = arr.tolist()
            out.extend([fill] * (m_cap - T))
            return out

        self.msg_kind = padded(p.tr_kind, 0)
        self.msg_ref = padded(p.tr_ref, -1)
        self.msg_origin = padded(p.tr_origin, 0)
        self.msg_ts = padded(p.tr_ts, 0)
        self.msg_disabled = padded(p.tr_disabled, 0)
        self.msg_cltv = padded(p.tr_cltv, 0)
        self.msg_hmin = padded(p.tr_hmin, 0)
        self.msg_hmax = padded(p.tr_hmax, -1)
        self.msg_fbase = padded(p.tr_fbase, 0)
        self.msg_fppm = padded(p.tr_fppm, 0)
        self.msg_size = padded(p.tr_size, 0)
        self.msg_created = padded(p.tr_time_us, 0)
        self.m_used = T

        view_row = [0 if self.base_present[e] else -1 for e in range(E)]
        self.view = view_row * n
        self.gt = list(view_row)

        self.pending = [0] * n
        self.bytes_in = [0] * n
        self.bytes_out = [0] * n

        self.seen = bytearray(m_cap * n)
        self.seen_count = bytearray(m_cap * n)
        self.first_seen = np.full(m_cap * n, -1, dtype=np.int64)
        self.broadcast_us = np.full(m_cap, -1, dtype=np.int64)
        self.requested = bytearray(m_cap * n) if p.inv_mode else None

        syn_ptr = p.syn_ptr.tolist()
        syn_flat = p.syn_flat.tolist()
        self.syncers: List[List[int]] = [
            syn_flat[syn_ptr[u] : syn_ptr[u + 1]] for u in range(n)
        ]
        self.subs: List[List[int]] = [[] for _ in range(n)]
        self.sub_start: List[List[int]] = [[] for _ in range(n)]
        for v in range(n):
            for u in self.syncers[v]:
                self.subs[u].append(v)
                self.sub_start[u].append(0)

        self.tree_ptr = p.tree_ptr.tolist()
        self.tree_nbr = p.tree_nbr.tolist()

        self.queues: List[Dict[int, list]] = [dict() for _ in range(n)]
        self.rf: List[Dict[int, List[int]]] = [dict() for _ in range(n)]
        self.nann_last: List[Dict[int, int]] = [dict() for _ in range(n)]
        self.cann_seen: List[set] = [set() for _ in range(n)]
        self.virt_last: List[Dict[int, int]] = [dict() for _ in range(n)]
        self.ticking = [False] * n
        self.rot_pos = [0] * n
        self.buckets: Dict[int, list] = {}
        self.ev_space = E + p.n_virtual + 1

        self.side_batches: List[tuple] = []
        self.side_invs: List[List[int]] = []
        self.side_reqs: List[List[int]] = []

        self.R = len(p.rp_u)
        self.rp_u = p.rp_u.tolist()
        self.rp_v = p.rp_v.tolist()
        self.rp_phase = p.rp_phase_us.tolist()
        self.delta: List[List[int]] = [[] for _ in range(2 * self.R)]
        self.pair_active = [False] * self.R
        self.pair_rounds = [0] * self.R
        self.node_pairs: List[List[Tuple[int, int]]] = [[] for _ in range(n)]
        for q in range(self.R):
            self.node_pairs[self.rp_u[q]].append((q, 0))
            self.node_pairs[self.rp_v[q]].append((q, 1))

        self.stg_phase = p.stg_phase_us.tolist()
        self.rot_words = p.rot_words.tolist()
        self.word_idx = 0

        self.waiting_hist = [0] * WAIT_BUCKETS
        self.waiting_count = 0
        self.waiting_max = -(1 << 62)
        self.waiting_min = 1 << 62

        self.P = len(p.pay_time_us)
        self.pay_time = p.pay_time_us.tolist()
        self.pay_src = p.pay_src.tolist()
        self.pay_dst = p.pay_dst.tolist()
        self.pay_amt = p.pay_amount.tolist()
        self.pay_status = np.zeros(self.P, dtype=np.int8)
        self.pay_unconv = np.zeros(self.P, dtype=np.uint8)
        self.pay_fee = np.zeros(self.P, dtype=np.int64)
        self.pay_hops = np.zeros(self.P, dtype=np.int16)

        # channel endpoints for route walk-back
        C = E // 2
        self.chan_a = [0] * C
        self.chan_b = [0] * C
        for u in range(n):
            for j in range(self.adj_ptr[u], self.adj_ptr[u + 1]):
                e = self.adj_dedge[j]
                if (e & 1) == 0:
                    self.chan_a[e >> 1] = u
                    self.chan_b[e >> 1] = self.adj_nbr[j]

        self.dj_fee = [0] * n
        self.dj_hops = [0] * n
        self.dj_pred = [-1] * n
        self.dj_stamp = [0] * n
        self.dj_round = 0

        self.heap: List[tuple] = []
        self.seq = 0
        self.clock = 0

        self.counters = {
            "deliveries": 0,
            "dup_arrivals": 0,
            "stale_drops": 0,
            "rate_drops": 0,
            "keepalive_relay_drops": 0,
            "ann_dup_drops": 0,
            "bytes_full": 0,
            "bytes_inv": 0,
            "bytes_req_ids": 0,
            "bytes_sketch": 0,
            "inv_entries": 0,
            "inv_requests": 0,
            "injections": 0,
            "gt_applied": 0,
            "gt_stale": 0,
            "unknown_ref_updates": 0,
            "keepalives_emitted": 0,
            "keepalive_capacity_hits": 0,
            "recon_rounds": 0,
            "recon_extra_attempts": 0,
            "recon_transfers": 0,
            "events": 0,
        }
        self.recon_log: List[tuple] = []

    # -- scheduling -------------------------------------------------------

    def push(self, t: int, kind: int, a: int, b: int, c: int) -> None:
        heapq.heappush(self.heap, (t, self.seq, kind, a, b, c))
        self.seq += 1

    @staticmethod
    def next_grid(now: int, phase: int, interval: int) -> int:
        if now < phase:
            return phase
        return phase + ((now - phase) // interval + 1) * interval

    # -- policy versions ----------------------------------------------------

    def ver_ts(self, e: int, ver: int) -> int:
        return self.base_ts[e] if ver == 0 else self.msg_ts[ver - 1]

    def ver_disabled(self, e: int, ver: int) -> int:
        return self.base_disabled[e] if ver == 0 else self.msg_disabled[ver - 1]

    def ver_cltv(self, e: int, ver: int) -> int:
        return self.base_cltv[e] if ver == 0 else self.msg_cltv[ver - 1]

    def ver_hmin(self, e: int, ver: int) -> int:
        return self.base_hmin[e] if ver == 0 else self.msg_hmin[ver - 1]

    def ver_hmax(self, e: int, ver: int) -> int:
        return self.base_hmax[e] if ver == 0 else self.msg_hmax[ver - 1]

    def ver_fbase(self, e: int, ver: int) -> int:
        return self.base_fbase[e] if ver == 0 else self.msg_fbase[ver - 1]

    def ver_fppm(self, e: int, ver: int) -> int:
        return self.base_fppm[e] if ver == 0 else self.msg_fppm[ver - 1]

    def fields_equal_view(self, e: int, ver: int, m: int) -> bool:
        return (
            self.ver_disabled(e, ver) == self.msg_disabled[m]
            and self.ver_cltv(e, ver) == self.msg_cltv[m]
            and self.ver_hmin(e, ver) == self.msg_hmin[m]
            and self.ver_hmax(e, ver) == self.msg_hmax[m]
            and self.ver_fbase(e, ver) == self.msg_fbase[m]
            and self.ver_fppm(e, ver) == self.msg_fppm[m]
        )

    def apply_view(self, v: int, e: int, m: int) -> bool:
        idx = v * self.E + e
        ver = self.view[idx]
        if ver >= 0 and self.msg_ts[m] <= self.ver_ts(e, ver):
            return False
        self.view[idx] = m + 1
        return True

    # -- transport ----------------------------------------------------------

    def deliver(self, f: int, v: int, m: int, now: int) -> None:
        sz = self.msg_size[m]
        if self.broadcast_us[m] < 0:
            self.broadcast_us[m] = now
        arr = now + self.latency + (self.pending[v] + sz) * 1_000_000 // self.bw
        self.pending[v] += sz
        self.bytes_out[f] += sz
        self.counters["bytes_full"] += sz
        self.push(arr, EV_ARRIVAL, m, f, v)

    def deliver_inv(self, f: int, v: int, ids: List[int], now: int) -> None:
        sz = self.plan.inv_entry_bytes * len(ids)
        bus = self.broadcast_us
        for m in ids:
            if bus[m] < 0:
                bus[m] = now
        arr = now + self.latency + (self.pending[v] + sz) * 1_000_000 // self.bw
        self.pending[v] += sz
        self.bytes_out[f] += sz
        self.counters["bytes_inv"] += sz
        self.counters["inv_entries"] += len(ids)
        self.side_invs.append(ids)
        self.push(arr, EV_INV, len(self.side_invs) - 1, f, v)

    def deliver_req(self, v: int, f: int, ids: List[int], now: int) -> None:
        arr = now + self.latency + self.pending[f] * 1_000_000 // self.bw
        self.counters["inv_requests"] += len(ids)
        self.side_reqs.append(ids)
        self.push(arr, EV_REQ, len(self.side_reqs) - 1, v, f)

    # -- staggered broadcast --------------------------------------------------

    def ensure_tick(self, u: int, now: int) -> None:
        if not self.ticking[u]:
            self.ticking[u] = True
            self.push(
                self.next_grid(now, self.stg_phase[u], self.plan.stagger_us),
                EV_TICK, u, 0, 0,
            )

    def enqueue(self, u: int, m: int, now: int, is_origin: bool) -> None:
        ref = self.msg_ref[m]
        kind = self.msg_kind[m]
        key = (ref << 2) | kind
        q = self.queues[u]
        cur = q.get(key)
        if cur is None:
            q[key] = (m, now, is_origin)
        elif self.msg_ts[m] > self.msg_ts[cur[0]]:
            self.rf[u].pop(cur[0], None)
            q[key] = (m, now, is_origin)
        self.ensure_tick(u, now)

    def bucket_admit(self, u: int, ref: int, now: int) -> bool:
        p = self.plan
        interval = p.rate_interval_us
        key = u * self.ev_space + ref
        b = self.buckets.get(key)
        if b is None:
            b = [p.rate_burst * interval, now]
            self.buckets[key] = b
        elif now > b[1]:
            cap = p.rate_burst * interval
            t = b[0] + (now - b[1])
            b[0] = cap if t > cap else t
            b[1] = now
        if b[0] >= interval:
            b[0] -= interval
            return True
        return False

    def origin_recipients(self, u: int) -> List[int]:
        out: List[int] = []
        last = -1
        for i in range(self.adj_ptr[u], self.adj_ptr[u + 1]):
            w = self.adj_nbr[i]
            if w != last:
                out.append(w)
                last = w
        return out

    # -- strategy forwarding ---------------------------------------------------

    def flood_forward(self, v: int, m: int, frm: int, now: int) -> None:
        crt = self.msg_created[m]
        sv = self.subs[v]
        st = self.sub_start[v]
        for i in range(len(sv)):
            w = sv[i]
            if w != frm and crt >= st[i]:
                self.deliver(v, w, m, now)

    def tree_forward(self, v: int, m: int, frm: int, now: int) -> None:
        for j in range(self.tree_ptr[v], self.tree_ptr[v + 1]):
            w = self.tree_nbr[j]
            if w != frm:
                self.deliver(v, w, m, now)

    def push_delta(self, v: int, m: int, exclude_pair: int, now: int) -> None:
        for q, slot in self.node_pairs[v]:
            if q == exclude_pair:
                continue
            self.delta[2 * q + slot].append(m)
            if not self.pair_active[q]:
                self.pair_active[q] = True
                self.push(
                    self.next_grid(now, self.rp_phase[q], self.plan.recon_interval_us),
                    EV_RECON, q, 0, 0,
                )

    def dispatch_origin(self, o: int, m: int, now: int) -> None:
        s = self.plan.strategy
        if s == STAGGERED:
            self.enqueue(o, m, now, True)
        elif s == FLOODING:
            for w in sorted(set(self.subs[o]) | set(self.syncers[o])):
                if w != o:
                    self.deliver(o, w, m, now)
        elif s == SPANNING:
            self.tree_forward(o, m, -1, now)
        else:
            self.push_delta(o, m, -1, now)

    # -- handlers ---------------------------------------------------------------

    def handle_arrival(self, m: int, f: int, v: int, now: int) -> None:
        plan = self.plan
        sz = self.msg_size[m]
        self.pending[v] -= sz
        self.bytes_in[v] += sz
        self.counters["deliveries"] += 1
        idx = m * self.n + v
        if self.seen_count[idx] < 255:
            self.seen_count[idx] += 1
        if self.seen[idx]:
            self.counters["dup_arrivals"] += 1
            if plan.strategy == STAGGERED:
                lst = self.rf[v].get(m)
                if lst is not None:
                    lst.append(f)
            return
        self.seen[idx] = 1
        self.first_seen[idx] = now

        kind = self.msg_kind[m]
        ref = self.msg_ref[m]
        strategy = plan.strategy
        if strategy == STAGGERED:
            if kind == K_UPDATE:
                if 0 <= ref < self.E:
                    vidx = v * self.E + ref
                    ver = self.view[vidx]
                    if ver >= 0:
                        vts = self.ver_ts(ref, ver)
                        if self.msg_ts[m] <= vts:
                            self.counters["stale_drops"] += 1
                            return
                        if plan.rate_burst > 0 and not self.bucket_admit(v, ref, now):
                            self.counters["rate_drops"] += 1
                            return
                        if (
                            plan.ka_relay_min_diff_s > 0
                            and self.msg_ts[m] - vts < plan.ka_relay_min_diff_s
                            and self.fields_equal_view(ref, ver, m)
                        ):
                            self.counters["keepalive_relay_drops"] += 1
                            return
                    elif plan.rate_burst > 0 and not self.bucket_admit(v, ref, now):
                        self.counters["rate_drops"] += 1
                        return
                    self.view[vidx] = m + 1
                else:
                    last = self.virt_last[v].get(ref)
                    if last is not None and self.msg_ts[m] <= last:
                        self.counters["stale_drops"] += 1
                        return
                    if plan.rate_burst > 0 and not self.bucket_admit(v, ref, now):
                        self.counters["rate_drops"] += 1
                        return
                    self.virt_last[v][ref] = self.msg_ts[m]
            elif kind == K_NODE_ANN:
                last = self.nann_last[v].get(ref)
                if last is not None and self.msg_ts[m] <= last:
                    self.counters["ann_dup_drops"] += 1
                    return
                self.nann_last[v][ref] = self.msg_ts[m]
            else:
                if ref in self.cann_seen[v]:
                    self.counters["ann_dup_drops"] += 1
                    return
                self.cann_seen[v].add(ref)
            self.rf[v][m] = [f]
            self.enqueue(v, m, now, False)
        elif strategy == FLOODING:
            if kind == K_UPDATE and 0 <= ref < self.E:
                self.apply_view(v, ref, m)
            self.flood_forward(v, m, f, now)
        elif strategy == SPANNING:
            if kind == K_UPDATE and 0 <= ref < self.E:
                self.apply_view(v, ref, m)
            self.tree_forward(v, m, f, now)

    def handle_tick(self, u: int, now: int) -> None:
        plan = self.plan
        q = self.queues[u]
        if not q:
            if now < self.duration:
                self.push(now + plan.stagger_us, EV_TICK, u, 0, 0)
            else:
                self.ticking[u] = False
            return
        entries = sorted(q.items())
        q.clear()
        bs, nb = _batching(len(entries), plan.min_batch, plan.max_batches)
        rfu = self.rf[u]
        for b in range(nb):
            chunk = entries[b * bs : (b + 1) * bs]
            send_t = now + b * plan.subbatch_us
            resolved = []
            for _key, (m, enq_us, is_origin) in chunk:
                wt = send_t - enq_us
                wb = wt // 1_000_000
                if wb >= WAIT_BUCKETS:
                    wb = WAIT_BUCKETS - 1
                self.waiting_hist[wb] += 1
                self.waiting_count += 1
                if wt > self.waiting_max:
                    self.waiting_max = wt
                if wt < self.waiting_min:
                    self.waiting_min = wt
                if is_origin:
                    recips = self.origin_recipients(u)
                else:
                    excl = rfu.get(m)
                    crt = self.msg_created[m]
                    sv = self.subs[u]
                    st = self.sub_start[u]
                    if excl:
                        recips = [
                            sv[i]
                            for i in range(len(sv))
                            if crt >= st[i] and sv[i] not in excl
                        ]
                    else:
                        recips = [sv[i] for i in range(len(sv)) if crt >= st[i]]
                resolved.append((m, recips))
            self.side_batches.append((u, resolved))
            self.push(send_t, EV_SUBBATCH, len(self.side_batches) - 1, 0, 0)
        for _key, (m, _enq, _orig) in entries:
            rfu.pop(m, None)
        if now < self.duration:
            self.push(now + plan.stagger_us, EV_TICK, u, 0, 0)
        else:
            self.ticking[u] = False

    def handle_subbatch(self, side_idx: int, now: int) -> None:
        u, resolved = self.side_batches[side_idx]
        if self.plan.inv_mode:
            rmap: Dict[int, List[int]] = {}
            for m, recips in resolved:
                for v in recips:
                    lst = rmap.get(v)
                    if lst is None:
                        rmap[v] = [m]
                    else:
                        lst.append(m)
            for v in sorted(rmap):
                self.deliver_inv(u, v, rmap[v], now)
        else:
            for m, recips in resolved:
                for v in recips:
                    self.deliver(u, v, m, now)

    def handle_inv(self, inv_idx: int, f: int, v: int, now: int) -> None:
        ids = self.side_invs[inv_idx]
        sz = self.plan.inv_entry_bytes * len(ids)
        self.pending[v] -= sz
        self.bytes_in[v] += sz
        req = []
        n = self.n
        for m in ids:
            idx = m * n + v
            if not self.seen[idx] and not self.requested[idx]:
                self.requested[idx] = 1
                req.append(m)
        if req:
            self.deliver_req(v, f, req, now)

    def handle_req(self, req_idx: int, v: int, f: int, now: int) -> None:
        for m in self.side_reqs[req_idx]:
            self.deliver(f, v, m, now)

    def handle_rotate(self, u: int, now: int) -> None:
        if now >= self.duration:
            return
        syn = self.syncers[u]
        if syn:
            syn_set = set(syn)
            cands = []
            last = -1
            for i in range(self.adj_ptr[u], self.adj_ptr[u + 1]):
                w = self.adj_nbr[i]
                if w != last:
                    last = w
                    if w not in syn_set:
                        cands.append(w)
            if cands:
                w = cands[self.rot_words[self.word_idx] % len(cands)]
                self.word_idx += 1
                pos = self.rot_pos[u] % len(syn)
                self.rot_pos[u] += 1
                old = syn[pos]
                syn[pos] = w
                i = self.subs[old].index(u)
                self.subs[old].pop(i)
                self.sub_start[old].pop(i)
                self.subs[w].append(u)
                self.sub_start[w].append(now)
        self.push(now + self.plan.rot_interval_us, EV_ROTATE, u, 0, 0)

    def handle_keepalive(self, u: int, now: int) -> None:
        if now >= self.duration:
            return
        plan = self.plan
        now_s = plan.ts_epoch + now // 1_000_000
        for i in range(self.adj_ptr[u], self.adj_ptr[u + 1]):
            e = self.adj_dedge[i]
            ver = self.view[u * self.E + e]
            if ver < 0:
                continue
            vts = self.ver_ts(e, ver)
            if now_s - vts < plan.ka_stale_s:
                continue
            if self.m_used >= self.m_cap:
                self.counters["keepalive_capacity_hits"] += 1
                continue
            m = self.m_used
            self.m_used += 1
            ts = vts + 1 if vts + 1 > now_s else now_s
            self.msg_kind[m] = K_UPDATE
            self.msg_ref[m] = e
            self.msg_origin[m] = u
            self.msg_ts[m] = ts
            self.msg_disabled[m] = self.ver_disabled(e, ver)
            self.msg_cltv[m] = self.ver_cltv(e, ver)
            self.msg_hmin[m] = self.ver_hmin(e, ver)
            self.msg_hmax[m] = self.ver_hmax(e, ver)
            self.msg_fbase[m] = self.ver_fbase(e, ver)
            self.msg_fppm[m] = self.ver_fppm(e, ver)
            self.msg_size[m] = plan.update_size
            self.msg_created[m] = now
            self.counters["keepalives_emitted"] += 1
            cur = self.gt[e]
            if cur < 0 or ts > self.ver_ts(e, cur):
                self.gt[e] = m + 1
            self.view[u * self.E + e] = m + 1
            idx = m * self.n + u
            self.seen[idx] = 1
            self.first_seen[idx] = now
            self.dispatch_origin(u, m, now)
        self.push(now + plan.ka_check_us, EV_KEEPALIVE, u, 0, 0)

    def transfer(self, src: int, dst: int, m: int, q: int, now: int) -> None:
        sz = self.msg_size[m]
        if self.broadcast_us[m] < 0:
            self.broadcast_us[m] = now
        self.bytes_out[src] += sz
        self.bytes_in[dst] += sz
        self.counters["bytes_full"] += sz
        self.counters["deliveries"] += 1
        self.counters["recon_transfers"] += 1
        idx = m * self.n + dst
        if self.seen_count[idx] < 255:
            self.seen_count[idx] += 1
        self.seen[idx] = 1
        self.first_seen[idx] = now
        ref = self.msg_ref[m]
        if self.msg_kind[m] == K_UPDATE and 0 <= ref < self.E:
            self.apply_view(dst, ref, m)
        self.push_delta(dst, m, q, now)

    def handle_recon(self, q: int, now: int) -> None:
        plan = self.plan
        n = self.n
        du = self.delta[2 * q]
        dv = self.delta[2 * q + 1]
        u = self.rp_u[q]
        v = self.rp_v[q]
        um = [m for m in du if not self.seen[m * n + v]]
        vm = [m for m in dv if not self.seen[m * n + u]]
        la, lb = len(du), len(dv)
        d = len(um) + len(vm)
        c = _capacity(la, lb, plan.margin_milli)
        sk = c
        attempts = 1
        while d > c:
            c <<= 1
            sk += c
            attempts += 1
        if (self.pair_rounds[q] & 1) == 0:
            initiator, responder = u, v
        else:
            initiator, responder = v, u
        self.pair_rounds[q] += 1
        sketch_b = sk * plan.sketch_bytes
        self.bytes_out[responder] += sketch_b
        self.bytes_in[initiator] += sketch_b
        self.counters["bytes_sketch"] += sketch_b
        if um:
            rb = 8 * len(um)
            self.bytes_out[v] += rb
            self.bytes_in[u] += rb
            self.counters["bytes_req_ids"] += rb
        if vm:
            rb = 8 * len(vm)
            self.bytes_out[u] += rb
            self.bytes_in[v] += rb
            self.counters["bytes_req_ids"] += rb
        if plan.log_recon:
            self.recon_log.append((now, u, v, la, lb, d, c, attempts, list(um), list(vm)))
        self.delta[2 * q] = []
        self.delta[2 * q + 1] = []
        for m in um:
            self.transfer(u, v, m, q, now)
        for m in vm:
            self.transfer(v, u, m, q, now)
        self.counters["recon_rounds"] += 1
        self.counters["recon_extra_attempts"] += attempts - 1
        if now < self.duration:
            self.push(now + plan.recon_interval_us, EV_RECON, q, 0, 0)
        else:
            self.pair_active[q] = False

    def handle_inject(self, m: int, now: int) -> None:
        o = self.msg_origin[m]
        self.counters["injections"] += 1
        ref = self.msg_ref[m]
        if self.msg_kind[m] == K_UPDATE:
            if 0 <= ref < self.E:
                cur = self.gt[ref]
                if cur < 0 or self.msg_ts[m] > self.ver_ts(ref, cur):
                    self.gt[ref] = m + 1
                    self.counters["gt_applied"] += 1
                else:
                    self.counters["gt_stale"] += 1
                self.apply_view(o, ref, m)
            else:
                self.counters["unknown_ref_updates"] += 1
        idx = m * self.n + o
        self.seen[idx] = 1
        self.first_seen[idx] = now
        self.dispatch_origin(o, m, now)

    def handle_payment(self, i: int, now: int) -> None:
        src = self.pay_src[i]
        dst = self.pay_dst[i]
        amt = self.pay_amt[i]
        E = self.E
        view = self.view
        base = src * E
        self.dj_round += 1
        stamp = self.dj_round
        dj_fee, dj_hops = self.dj_fee, self.dj_hops
        dj_pred, dj_stamp = self.dj_pred, self.dj_stamp
        dj_stamp[src] = stamp
        dj_fee[src] = 0
        dj_hops[src] = 0
        dj_pred[src] = -1
        adj_ptr, adj_nbr, adj_dedge = self.adj_ptr, self.adj_nbr, self.adj_dedge
        h = [(0, 0, src)]
        found = False
        while h:
            fee, hops, x = heapq.heappop(h)
            if fee > dj_fee[x] or (fee == dj_fee[x] and hops > dj_hops[x]):
                continue
            if x == dst:
                found = True
                break
            for j in range(adj_ptr[x], adj_ptr[x + 1]):
                e = adj_dedge[j]
                ver = view[base + e]
                if ver < 0:
                    continue
                if self.ver_disabled(e, ver):
                    continue
                if amt < self.ver_hmin(e, ver):
                    continue
                hx = self.ver_hmax(e, ver)
                if 0 <= hx < amt:
                    continue
                w = adj_nbr[j]
                nf = fee + self.ver_fbase(e, ver) + amt * self.ver_fppm(e, ver) // 1_000_000
                nh = hops + 1
                if dj_stamp[w] != stamp or nf < dj_fee[w] or (
                    nf == dj_fee[w] and nh < dj_hops[w]
                ):
                    dj_stamp[w] = stamp
                    dj_fee[w] = nf
                    dj_hops[w] = nh
                    dj_pred[w] = e
                    heapq.heappush(h, (nf, nh, w))
        if not found:
            self.pay_status[i] = P_NO_ROUTE
            return
        unconv = False
        failed = False
        node = dst
        hops_n = 0
        gt = self.gt
        while node != src:
            e = dj_pred[node]
            hops_n += 1
            gver = gt[e]
            vver = view[base + e]
            if gver >= 0:
                if vver < 0 or self.ver_ts(e, gver) > self.ver_ts(e, vver):
                    unconv = True
                if self.ver_disabled(e, gver):
                    failed = True
                elif vver >= 0:
                    gfee = self.ver_fbase(e, gver) + amt * self.ver_fppm(e, gver) // 1_000_000
                    vfee = self.ver_fbase(e, vver) + amt * self.ver_fppm(e, vver) // 1_000_000
                    if gfee > vfee or self.ver_cltv(e, gver) > self.ver_cltv(e, vver):
                        failed = True
            node = self.chan_a[e >> 1] if (e & 1) == 0 else self.chan_b[e >> 1]
        self.pay_status[i] = P_STALE_FAILURE if failed else P_SUCCESS
        self.pay_unconv[i] = 1 if unconv else 0
        self.pay_fee[i] = dj_fee[dst]
        self.pay_hops[i] = hops_n

    # -- run --------------------------------------------------------------------

    def run(self) -> RawResult:
        plan = self.plan
        if plan.strategy == STAGGERED:
            for u in range(self.n):
                self.ticking[u] = True
                self.push(self.stg_phase[u], EV_TICK, u, 0, 0)
            if plan.rot_interval_us > 0:
                rp = plan.rot_phase_us.tolist()
                for u in range(self.n):
                    self.push(rp[u], EV_ROTATE, u, 0, 0)
        if plan.ka_enabled:
            kp = plan.ka_phase_us.tolist()
            for u in range(self.n):
                self.push(kp[u], EV_KEEPALIVE, u, 0, 0)
        if plan.strategy == RECONCILIATION:
            for q in range(self.R):
                self.pair_active[q] = True
                self.push(self.rp_phase[q], EV_RECON, q, 0, 0)
        for t_idx in range(self.T):
            self.push(self.msg_created[t_idx], EV_INJECT, t_idx, 0, 0)
        for i in range(self.P):
            self.push(self.pay_time[i], EV_PAYMENT, i, 0, 0)

        heap = self.heap
        n_events = 0
        max_events = plan.max_events
        while heap:
            t, _s, kind, a, b, c = heapq.heappop(heap)
            if t < self.clock:
                raise RuntimeError("event time went backwards")
            self.clock = t
            n_events += 1
            if n_events > max_events:
                raise RuntimeError("event budget exceeded; runaway simulation")
            if kind == EV_ARRIVAL:
                self.handle_arrival(a, b, c, t)
            elif kind == EV_SUBBATCH:
                self.handle_subbatch(a, t)
            elif kind == EV_TICK:
                self.handle_tick(a, t)
            elif kind == EV_INV:
                self.handle_inv(a, b, c, t)
            elif kind == EV_REQ:
                self.handle_req(a, b, c, t)
            elif kind == EV_RECON:
                self.handle_recon(a, t)
            elif kind == EV_PAYMENT:
                self.handle_payment(a, t)
            elif kind == EV_INJECT:
                self.handle_inject(a, t)
            elif kind == EV_ROTATE:
                self.handle_rotate(a, t)
            else:
                self.handle_keepalive(a, t)
        self.counters["events"] = n_events

        if any(self.pending):
            raise RuntimeError("pending byte counters nonzero after drain")

        mu = self.m_used
        n = self.n
        return RawResult(
            n_nodes=n,
            m_used=mu,
            bytes_in=np.array(self.bytes_in, dtype=np.int64),
            bytes_out=np.array(self.bytes_out, dtype=np.int64),
            first_seen_us=self.first_seen[: mu * n].copy(),
            seen_count=np.frombuffer(bytes(self.seen_count[: mu * n]), dtype=np.uint8),
            broadcast_us=self.broadcast_us[:mu].copy(),
            msg_kind=np.array(self.msg_kind[:mu], dtype=np.int8),
            msg_size=np.array(self.msg_size[:mu], dtype=np.int32),
            msg_origin=np.array(self.msg_origin[:mu], dtype=np.int32),
            msg_created_us=np.array(self.msg_created[:mu], dtype=np.int64),
            waiting_hist=np.array(self.waiting_hist, dtype=np.int64),
            waiting_count=self.waiting_count,
            waiting_max_us=self.waiting_max if self.waiting_count else 0,
            waiting_min_us=self.waiting_min if self.waiting_count else 0,
            pay_status=self.pay_status,
            pay_unconverged=self.pay_unconv,
            pay_fee=self.pay_fee,
            pay_hops=self.pay_hops,
            counters=self.counters,
            recon_log=_pack_recon_log(self.recon_log) if plan.log_recon else None,
        )


def run_plan(plan: SimPlan) -> RawResult:
    return _Core(plan).run()


def _pack_recon_log(rows: List[tuple]) -> Dict[str, np.ndarray]:
    times, us, vs, las, lbs, ds, cs, ats = [], [], [], [], [], [], [], []
    xfer_ptr = [0]
    xfer_ids: List[int] = []
    xfer_dst: List[int] = []
    for (t, u, v, la, lb, d, c, att, um, vm) in rows:
        times.append(t)
        us.append(u)
        vs.append(v)
        las.append(la)
        lbs.append(lb)
        ds.append(d)
        cs.append(c)
        ats.append(att)
        for m in um:
            xfer_ids.append(m)
            xfer_dst.append(v)
        for m in vm:
            xfer_ids.append(m)
            xfer_dst.append(u)
        xfer_ptr.append(len(xfer_ids))
    return {
        "time_us": np.array(times, dtype=np.int64),
        "u": np.array(us, dtype=np.int32),
        "v": np.array(vs, dtype=np.int32),
        "size_a": np.array(las, dtype=np.int64),
        "size_b": np.array(lbs, dtype=np.int64),
        "diff": np.array(ds, dtype=np.int64),
        "capacity": np.array(cs, dtype=np.int64),
        "attempts": np.array(ats, dtype=np.int64),
        "xfer_ptr": np.array(xfer_ptr, dtype=np.int64),
        "xfer_ids": np.array(xfer_ids, dtype=np.int64),
        "xfer_dst": np.array(xfer_dst, dtype=np.int64),
    }
