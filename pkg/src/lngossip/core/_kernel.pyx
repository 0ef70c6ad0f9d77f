# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation core.

Mirrors `_pycore.py` operation-for-operation: same event ordering, same
integer arithmetic, same pre-drawn randomness. Bit-identical results are
enforced by the equivalence tests; keep the two implementations in lockstep.
"""

from cython.operator cimport dereference as deref, preincrement as inc
from libc.math cimport sqrt
from libc.stdint cimport int8_t, int16_t, int32_t, int64_t, uint8_t, uint64_t
from libcpp.pair cimport pair
from libcpp.queue cimport priority_queue
from libcpp.unordered_map cimport unordered_map
from libcpp.unordered_set cimport unordered_set
from libcpp.vector cimport vector

import numpy as np

from .plan import RawResult, WAIT_BUCKETS

IMPL = "kernel"


# event kinds (same codes as _pycore)
cdef enum:
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

cdef enum:
    K_UPDATE = 0
    K_NODE_ANN = 1
    K_CHAN_ANN = 2

cdef enum:
    S_STAGGERED = 0
    S_FLOODING = 1
    S_SPANNING = 2
    S_RECON = 3

cdef enum:
    P_SUCCESS = 0
    P_NO_ROUTE = 1
    P_STALE_FAILURE = 2

# ((-t, -seq), (kind<<32|a, b<<32|c)) in a max-heap == min-heap on (t, seq)
ctypedef pair[pair[int64_t, int64_t], pair[int64_t, int64_t]] Ev

cdef struct QEntry:
    int32_t m
    int64_t enq
    uint8_t is_origin

cdef struct Bucket:
    int64_t tokens
    int64_t last

cdef struct Batch:
    int32_t sender
    vector[int32_t] msgs
    vector[vector[int32_t]] recips

cdef struct ReconRow:
    int64_t t
    int32_t u
    int32_t v
    int64_t la
    int64_t lb
    int64_t d
    int64_t c
    int64_t attempts
    vector[int32_t] um
    vector[int32_t] vm


cdef int64_t c_isqrt(int64_t x):
    if x <= 0:
        return 0
    cdef int64_t r = <int64_t>sqrt(<double>x)
    while r > 0 and r * r > x:
        r -= 1
    while (r + 1) * (r + 1) <= x:
        r += 1
    return r


cdef int64_t capacity_estimate(int64_t la, int64_t lb, int64_t margin_milli):
    cdef int64_t lo = la if la < lb else lb
    cdef int64_t sq = c_isqrt(margin_milli * margin_milli * lo)
    if sq * sq < margin_milli * margin_milli * lo:
        sq += 1
    cdef int64_t term = (sq + 999) // 1000
    cdef int64_t c = (la - lb if la > lb else lb - la) + term
    return c if c > 1 else 1


cdef void batching(int64_t n, int64_t min_batch, int64_t max_batches,
                   int64_t* bs, int64_t* nb):
    if n == 0:
        bs[0] = min_batch
        nb[0] = 0
        return
    if max_batches <= 1:
        bs[0] = n
        nb[0] = 1
        return
    cdef int64_t b = (n + max_batches - 1) // max_batches
    if b < min_batch:
        b = min_batch
    bs[0] = b
    nb[0] = (n + b - 1) // b


cdef extern from *:
    """
    #include <algorithm>
    #include <vector>
    #include <cstdint>
    static inline void sort_vec_impl(std::vector<int32_t>& v) {
        std::sort(v.begin(), v.end());
    }
    template <typename P>
    static inline void sort_entries_impl(std::vector<P>& v) {
        std::sort(v.begin(), v.end(),
                  [](const P& a, const P& b) { return a.first < b.first; });
    }
    static inline bool contains32_impl(const std::vector<int32_t>& v, int32_t x) {
        for (int32_t y : v) if (y == x) return true;
        return false;
    }
    """
    void sort_vec_impl(vector[int32_t]& v)
    void sort_entries_impl[P](vector[P]& v)
    bint contains32_impl(const vector[int32_t]& v, int32_t x)


cdef inline void sort_vec(vector[int32_t]& v):
    sort_vec_impl(v)


cdef inline void sort_entries(vector[pair[int64_t, QEntry]]& v):
    sort_entries_impl(v)


cdef inline bint contains32(const vector[int32_t]& v, int32_t x):
    return contains32_impl(v, x)



cdef class Kernel:
    cdef object plan
    cdef int64_t n, E, T, m_cap, m_used, duration, latency, bw
    cdef int strategy, inv_mode
    cdef int64_t stagger_us, subbatch_us, min_batch, max_batches
    cdef int64_t rot_interval_us, rate_interval_us, rate_burst
    cdef int64_t ka_enabled, ka_check_us, ka_stale_s, ka_relay_min_diff_s, ts_epoch
    cdef int64_t recon_interval_us, sketch_bytes, margin_milli
    cdef int64_t update_size, inv_entry_bytes, ev_space
    cdef int log_recon

    cdef long long[::1] adj_ptr
    cdef int[::1] adj_nbr
    cdef int[::1] adj_dedge
    cdef unsigned char[::1] base_present
    cdef long long[::1] base_ts
    cdef unsigned char[::1] base_disabled
    cdef long long[::1] base_cltv
    cdef long long[::1] base_hmin
    cdef long long[::1] base_hmax
    cdef long long[::1] base_fbase
    cdef long long[::1] base_fppm
    cdef long long[::1] tree_ptr
    cdef int[::1] tree_nbr

    # message tables (numpy-backed, m_cap capacity)
    cdef object msg_kind_a, msg_ref_a, msg_origin_a, msg_ts_a, msg_disabled_a
    cdef object msg_cltv_a, msg_hmin_a, msg_hmax_a, msg_fbase_a, msg_fppm_a
    cdef object msg_size_a, msg_created_a
    cdef signed char[::1] msg_kind
    cdef int[::1] msg_ref
    cdef int[::1] msg_origin
    cdef long long[::1] msg_ts
    cdef unsigned char[::1] msg_disabled
    cdef long long[::1] msg_cltv
    cdef long long[::1] msg_hmin
    cdef long long[::1] msg_hmax
    cdef long long[::1] msg_fbase
    cdef long long[::1] msg_fppm
    cdef int[::1] msg_size
    cdef long long[::1] msg_created

    cdef object view_a, seen_a, seen_count_a, first_seen_a, broadcast_a, requested_a
    cdef int[::1] view
    cdef unsigned char[::1] seen
    cdef unsigned char[::1] seen_count
    cdef long long[::1] first_seen
    cdef long long[::1] broadcast_us
    cdef unsigned char[::1] requested
    cdef object gt_a
    cdef int[::1] gt

    cdef object pending_a, bytes_in_a, bytes_out_a
    cdef long long[::1] pending
    cdef long long[::1] bytes_in
    cdef long long[::1] bytes_out
    cdef vector[vector[int32_t]] syncers, subs
    cdef vector[vector[int64_t]] sub_start
    cdef vector[unordered_map[int64_t, QEntry]] queues
    cdef vector[unordered_map[int32_t, vector[int32_t]]] rf
    cdef vector[unordered_map[int32_t, int64_t]] nann_last, virt_last
    cdef vector[unordered_set[int32_t]] cann_seen
    cdef object ticking_a, rot_pos_a
    cdef unsigned char[::1] ticking
    cdef long long[::1] rot_pos
    cdef unordered_map[int64_t, Bucket] buckets

    cdef vector[Batch] side_batches
    cdef vector[vector[int32_t]] side_invs, side_reqs

    cdef int64_t R
    cdef int[::1] rp_u
    cdef int[::1] rp_v
    cdef long long[::1] rp_phase
    cdef vector[vector[int32_t]] delta
    cdef object pair_active_a, pair_rounds_a, np_ptr_a, np_pair_a, np_slot_a
    cdef unsigned char[::1] pair_active
    cdef long long[::1] pair_rounds
    cdef long long[::1] np_ptr
    cdef long long[::1] np_pair
    cdef long long[::1] np_slot

    cdef long long[::1] stg_phase
    cdef long long[::1] ka_phase
    cdef long long[::1] rot_phase
    cdef unsigned long long[::1] rot_words
    cdef int64_t word_idx

    cdef object waiting_hist_a
    cdef long long[::1] waiting_hist
    cdef int64_t waiting_count, waiting_max, waiting_min

    cdef int64_t P
    cdef long long[::1] pay_time
    cdef int[::1] pay_src
    cdef int[::1] pay_dst
    cdef long long[::1] pay_amt
    cdef object pay_status_a, pay_unconv_a, pay_fee_a, pay_hops_a
    cdef signed char[::1] pay_status
    cdef unsigned char[::1] pay_unconv
    cdef long long[::1] pay_fee
    cdef short[::1] pay_hops

    cdef object chan_a_a, chan_b_a, dj_fee_a, dj_hops_a, dj_pred_a, dj_stamp_a
    cdef int[::1] chan_a
    cdef int[::1] chan_b
    cdef long long[::1] dj_fee
    cdef long long[::1] dj_hops
    cdef int[::1] dj_pred
    cdef long long[::1] dj_stamp
    cdef int64_t dj_round

    cdef priority_queue[Ev] heap
    cdef int64_t seq, clock

    cdef int64_t c_deliveries, c_dups, c_stale, c_rate, c_kadrop, c_anndup
    cdef int64_t c_bfull, c_binv, c_breq, c_bsketch, c_invent, c_invreq
    cdef int64_t c_inject, c_gtapply, c_gtstale, c_unknown
    cdef int64_t c_kaemit, c_kacap, c_rounds, c_extra, c_xfer

    cdef vector[ReconRow] recon_rows

    def __init__(self, plan):
        self.plan = plan
        self.n = plan.n_nodes
        self.E = plan.n_dedges
        self.T = len(plan.tr_time_us)
        self.m_cap = plan.m_cap
        self.m_used = self.T
        self.duration = plan.duration_us
        self.latency = plan.latency_us
        self.bw = plan.bandwidth_bps
        self.strategy = plan.strategy
        self.inv_mode = plan.inv_mode
        self.stagger_us = plan.stagger_us
        self.subbatch_us = plan.subbatch_us
        self.min_batch = plan.min_batch
        self.max_batches = plan.max_batches
        self.rot_interval_us = plan.rot_interval_us
        self.rate_interval_us = plan.rate_interval_us
        self.rate_burst = plan.rate_burst
        self.ka_enabled = plan.ka_enabled
        self.ka_check_us = plan.ka_check_us
        self.ka_stale_s = plan.ka_stale_s
        self.ka_relay_min_diff_s = plan.ka_relay_min_diff_s
        self.ts_epoch = plan.ts_epoch
        self.recon_interval_us = plan.recon_interval_us
        self.sketch_bytes = plan.sketch_bytes
        self.margin_milli = plan.margin_milli
        self.update_size = plan.update_size
        self.inv_entry_bytes = plan.inv_entry_bytes
        self.ev_space = self.E + plan.n_virtual + 1
        self.log_recon = plan.log_recon

        def i64(a):
            return np.ascontiguousarray(a, dtype=np.int64)

        def i32(a):
            return np.ascontiguousarray(a, dtype=np.int32)

        def u8(a):
            return np.ascontiguousarray(a, dtype=np.uint8)

        self.adj_ptr = i64(plan.adj_ptr)
        self.adj_nbr = i32(plan.adj_nbr)
        self.adj_dedge = i32(plan.adj_dedge)
        self.base_present = u8(plan.base_present)
        self.base_ts = i64(plan.base_ts)
        self.base_disabled = u8(plan.base_disabled)
        self.base_cltv = i64(plan.base_cltv)
        self.base_hmin = i64(plan.base_hmin)
        self.base_hmax = i64(plan.base_hmax)
        self.base_fbase = i64(plan.base_fbase)
        self.base_fppm = i64(plan.base_fppm)
        self.tree_ptr = i64(plan.tree_ptr)
        self.tree_nbr = i32(plan.tree_nbr)

        cdef int64_t m_cap = self.m_cap
        cdef int64_t T = self.T
        self.msg_kind_a = np.zeros(m_cap, dtype=np.int8)
        self.msg_ref_a = np.full(m_cap, -1, dtype=np.int32)
        self.msg_origin_a = np.zeros(m_cap, dtype=np.int32)
        self.msg_ts_a = np.zeros(m_cap, dtype=np.int64)
        self.msg_disabled_a = np.zeros(m_cap, dtype=np.uint8)
        self.msg_cltv_a = np.zeros(m_cap, dtype=np.int64)
        self.msg_hmin_a = np.zeros(m_cap, dtype=np.int64)
        self.msg_hmax_a = np.full(m_cap, -1, dtype=np.int64)
        self.msg_fbase_a = np.zeros(m_cap, dtype=np.int64)
        self.msg_fppm_a = np.zeros(m_cap, dtype=np.int64)
        self.msg_size_a = np.zeros(m_cap, dtype=np.int32)
        self.msg_created_a = np.zeros(m_cap, dtype=np.int64)
        if T:
            self.msg_kind_a[:T] = plan.tr_kind
            self.msg_ref_a[:T] = plan.tr_ref
            self.msg_origin_a[:T] = plan.tr_origin
            self.msg_ts_a[:T] = plan.tr_ts
            self.msg_disabled_a[:T] = plan.tr_disabled
            self.msg_cltv_a[:T] = plan.tr_cltv
            self.msg_hmin_a[:T] = plan.tr_hmin
            self.msg_hmax_a[:T] = plan.tr_hmax
            self.msg_fbase_a[:T] = plan.tr_fbase
            self.msg_fppm_a[:T] = plan.tr_fppm
            self.msg_size_a[:T] = plan.tr_size
            self.msg_created_a[:T] = plan.tr_time_us
        self.msg_kind = self.msg_kind_a
        self.msg_ref = self.msg_ref_a
        self.msg_origin = self.msg_origin_a
        self.msg_ts = self.msg_ts_a
        self.msg_disabled = self.msg_disabled_a
        self.msg_cltv = self.msg_cltv_a
        self.msg_hmin = self.msg_hmin_a
        self.msg_hmax = self.msg_hmax_a
        self.msg_fbase = self.msg_fbase_a
        self.msg_fppm = self.msg_fppm_a
        self.msg_size = self.msg_size_a
        self.msg_created = self.msg_created_a

        cdef int64_t n = self.n
        cdef int64_t E = self.E
        view_row = np.where(np.asarray(plan.base_present) > 0, 0, -1).astype(np.int32)
        self.view_a = np.tile(view_row, n)
        self.view = self.view_a
        self.gt_a = np.zeros(E, dtype=np.int32)
        self.gt = self.gt_a
        cdef int64_t e
        for e in range(E):
            self.gt[e] = 0 if self.base_present[e] else -1

        self.pending_a = np.zeros(n, dtype=np.int64)
        self.pending = self.pending_a
        self.bytes_in_a = np.zeros(n, dtype=np.int64)
        self.bytes_in = self.bytes_in_a
        self.bytes_out_a = np.zeros(n, dtype=np.int64)
        self.bytes_out = self.bytes_out_a

        self.seen_a = np.zeros(m_cap * n, dtype=np.uint8)
        self.seen = self.seen_a
        self.seen_count_a = np.zeros(m_cap * n, dtype=np.uint8)
        self.seen_count = self.seen_count_a
        self.first_seen_a = np.full(m_cap * n, -1, dtype=np.int64)
        self.first_seen = self.first_seen_a
        self.broadcast_a = np.full(m_cap, -1, dtype=np.int64)
        self.broadcast_us = self.broadcast_a
        if self.inv_mode:
            self.requested_a = np.zeros(m_cap * n, dtype=np.uint8)
            self.requested = self.requested_a

        syn_ptr = plan.syn_ptr
        syn_flat = plan.syn_flat
        self.syncers.resize(n)
        self.subs.resize(n)
        self.sub_start.resize(n)
        cdef int64_t u, j
        for u in range(n):
            for j in range(syn_ptr[u], syn_ptr[u + 1]):
                self.syncers[u].push_back(<int32_t>syn_flat[j])
        cdef int64_t v
        cdef int32_t s
        for v in range(n):
            for j in range(<int64_t>self.syncers[v].size()):
                s = self.syncers[v][j]
                self.subs[s].push_back(<int32_t>v)
                self.sub_start[s].push_back(0)

        self.queues.resize(n)
        self.rf.resize(n)
        self.nann_last.resize(n)
        self.virt_last.resize(n)
        self.cann_seen.resize(n)
        self.ticking_a = np.zeros(n, dtype=np.uint8)
        self.ticking = self.ticking_a
        self.rot_pos_a = np.zeros(n, dtype=np.int64)
        self.rot_pos = self.rot_pos_a

        self.R = len(plan.rp_u)
        self.rp_u = i32(plan.rp_u)
        self.rp_v = i32(plan.rp_v)
        self.rp_phase = i64(plan.rp_phase_us)
        self.delta.resize(2 * self.R)
        self.pair_active_a = np.zeros(self.R, dtype=np.uint8)
        self.pair_active = self.pair_active_a
        self.pair_rounds_a = np.zeros(self.R, dtype=np.int64)
        self.pair_rounds = self.pair_rounds_a
        # node -> (pair, slot) CSR, pairs ascending per node (build order)
        cdef int64_t q
        self.np_ptr_a = np.zeros(n + 1, dtype=np.int64)
        self.np_ptr = self.np_ptr_a
        for q in range(self.R):
            self.np_ptr[self.rp_u[q] + 1] += 1
            self.np_ptr[self.rp_v[q] + 1] += 1
        for u in range(n):
            self.np_ptr[u + 1] += self.np_ptr[u]
        self.np_pair_a = np.zeros(2 * self.R, dtype=np.int64)
        self.np_pair = self.np_pair_a
        self.np_slot_a = np.zeros(2 * self.R, dtype=np.int64)
        self.np_slot = self.np_slot_a
        fill = np.zeros(n, dtype=np.int64)
        cdef int64_t pos_
        for q in range(self.R):
            u = self.rp_u[q]
            pos_ = self.np_ptr[u] + fill[u]
            self.np_pair[pos_] = q
            self.np_slot[pos_] = 0
            fill[u] += 1
            v = self.rp_v[q]
            pos_ = self.np_ptr[v] + fill[v]
            self.np_pair[pos_] = q
            self.np_slot[pos_] = 1
            fill[v] += 1

        self.stg_phase = i64(plan.stg_phase_us)
        self.ka_phase = i64(plan.ka_phase_us)
        self.rot_phase = i64(plan.rot_phase_us)
        self.rot_words = np.ascontiguousarray(plan.rot_words, dtype=np.uint64)
        self.word_idx = 0

        self.waiting_hist_a = np.zeros(WAIT_BUCKETS, dtype=np.int64)
        self.waiting_hist = self.waiting_hist_a
        self.waiting_count = 0
        self.waiting_max = -(<int64_t>1 << 62)
        self.waiting_min = <int64_t>1 << 62

        self.P = len(plan.pay_time_us)
        self.pay_time = i64(plan.pay_time_us)
        self.pay_src = i32(plan.pay_src)
        self.pay_dst = i32(plan.pay_dst)
        self.pay_amt = i64(plan.pay_amount)
        self.pay_status_a = np.zeros(self.P, dtype=np.int8)
        self.pay_unconv_a = np.zeros(self.P, dtype=np.uint8)
        self.pay_fee_a = np.zeros(self.P, dtype=np.int64)
        self.pay_hops_a = np.zeros(self.P, dtype=np.int16)
        self.pay_status = self.pay_status_a
        self.pay_unconv = self.pay_unconv_a
        self.pay_fee = self.pay_fee_a
        self.pay_hops = self.pay_hops_a

        cdef int64_t C = E // 2
        self.chan_a_a = np.zeros(C, dtype=np.int32)
        self.chan_a = self.chan_a_a
        self.chan_b_a = np.zeros(C, dtype=np.int32)
        self.chan_b = self.chan_b_a
        for u in range(n):
            for j in range(self.adj_ptr[u], self.adj_ptr[u + 1]):
                e = self.adj_dedge[j]
                if (e & 1) == 0:
                    self.chan_a[e >> 1] = <int32_t>u
                    self.chan_b[e >> 1] = self.adj_nbr[j]

        self.dj_fee_a = np.zeros(n, dtype=np.int64)
        self.dj_fee = self.dj_fee_a
        self.dj_hops_a = np.zeros(n, dtype=np.int64)
        self.dj_hops = self.dj_hops_a
        self.dj_pred_a = np.full(n, -1, dtype=np.int32)
        self.dj_pred = self.dj_pred_a
        self.dj_stamp_a = np.zeros(n, dtype=np.int64)
        self.dj_stamp = self.dj_stamp_a
        self.dj_round = 0

        self.seq = 0
        self.clock = 0
        self.c_deliveries = 0
        self.c_dups = 0
        self.c_stale = 0
        self.c_rate = 0
        self.c_kadrop = 0
        self.c_anndup = 0
        self.c_bfull = 0
        self.c_binv = 0
        self.c_breq = 0
        self.c_bsketch = 0
        self.c_invent = 0
        self.c_invreq = 0
        self.c_inject = 0
        self.c_gtapply = 0
        self.c_gtstale = 0
        self.c_unknown = 0
        self.c_kaemit = 0
        self.c_kacap = 0
        self.c_rounds = 0
        self.c_extra = 0
        self.c_xfer = 0

    # -- scheduling ---------------------------------------------------------

    cdef inline void push(self, int64_t t, int64_t kind, int64_t a, int64_t b, int64_t c):
        cdef Ev ev
        ev.first.first = -t
        ev.first.second = -self.seq
        ev.second.first = (kind << 32) | a
        ev.second.second = (b << 32) | c
        self.heap.push(ev)
        self.seq += 1

    cdef inline int64_t next_grid(self, int64_t now, int64_t phase, int64_t interval):
        if now < phase:
            return phase
        return phase + ((now - phase) // interval + 1) * interval

    # -- policy versions ------------------------------------------------------

    cdef inline int64_t ver_ts(self, int64_t e, int64_t ver):
        return self.base_ts[e] if ver == 0 else self.msg_ts[ver - 1]

    cdef inline int64_t ver_disabled(self, int64_t e, int64_t ver):
        return self.base_disabled[e] if ver == 0 else self.msg_disabled[ver - 1]

    cdef inline int64_t ver_cltv(self, int64_t e, int64_t ver):
        return self.base_cltv[e] if ver == 0 else self.msg_cltv[ver - 1]

    cdef inline int64_t ver_hmin(self, int64_t e, int64_t ver):
        return self.base_hmin[e] if ver == 0 else self.msg_hmin[ver - 1]

    cdef inline int64_t ver_hmax(self, int64_t e, int64_t ver):
        return self.base_hmax[e] if ver == 0 else self.msg_hmax[ver - 1]

    cdef inline int64_t ver_fbase(self, int64_t e, int64_t ver):
        return self.base_fbase[e] if ver == 0 else self.msg_fbase[ver - 1]

    cdef inline int64_t ver_fppm(self, int64_t e, int64_t ver):
        return self.base_fppm[e] if ver == 0 else self.msg_fppm[ver - 1]

    cdef inline bint fields_equal_view(self, int64_t e, int64_t ver, int64_t m):
        return (
            self.ver_disabled(e, ver) == self.msg_disabled[m]
            and self.ver_cltv(e, ver) == self.msg_cltv[m]
            and self.ver_hmin(e, ver) == self.msg_hmin[m]
            and self.ver_hmax(e, ver) == self.msg_hmax[m]
            and self.ver_fbase(e, ver) == self.msg_fbase[m]
            and self.ver_fppm(e, ver) == self.msg_fppm[m]
        )

    cdef inline bint apply_view(self, int64_t v, int64_t e, int64_t m):
        cdef int64_t idx = v * self.E + e
        cdef int64_t ver = self.view[idx]
        if ver >= 0 and self.msg_ts[m] <= self.ver_ts(e, ver):
            return False
        self.view[idx] = <int32_t>(m + 1)
        return True

    # -- transport -------------------------------------------------------------

    cdef void deliver(self, int64_t f, int64_t v, int64_t m, int64_t now):
        cdef int64_t sz = self.msg_size[m]
        if self.broadcast_us[m] < 0:
            self.broadcast_us[m] = now
        cdef int64_t arr = now + self.latency + (self.pending[v] + sz) * 1_000_000 // self.bw
        self.pending[v] += sz
        self.bytes_out[f] += sz
        self.c_bfull += sz
        self.push(arr, EV_ARRIVAL, m, f, v)

    cdef void deliver_inv(self, int64_t f, int64_t v, vector[int32_t]& ids, int64_t now):
        cdef int64_t sz = self.inv_entry_bytes * <int64_t>ids.size()
        cdef size_t i
        for i in range(ids.size()):
            if self.broadcast_us[ids[i]] < 0:
                self.broadcast_us[ids[i]] = now
        cdef int64_t arr = now + self.latency + (self.pending[v] + sz) * 1_000_000 // self.bw
        self.pending[v] += sz
        self.bytes_out[f] += sz
        self.c_binv += sz
        self.c_invent += <int64_t>ids.size()
        self.side_invs.push_back(ids)
        self.push(arr, EV_INV, <int64_t>self.side_invs.size() - 1, f, v)

    cdef void deliver_req(self, int64_t v, int64_t f, vector[int32_t]& ids, int64_t now):
        cdef int64_t arr = now + self.latency + self.pending[f] * 1_000_000 // self.bw
        self.c_invreq += <int64_t>ids.size()
        self.side_reqs.push_back(ids)
        self.push(arr, EV_REQ, <int64_t>self.side_reqs.size() - 1, v, f)

    # -- staggered broadcast ------------------------------------------------------

    cdef inline void ensure_tick(self, int64_t u, int64_t now):
        if not self.ticking[u]:
            self.ticking[u] = 1
            self.push(self.next_grid(now, self.stg_phase[u], self.stagger_us), EV_TICK, u, 0, 0)

    cdef void enqueue(self, int64_t u, int64_t m, int64_t now, bint is_origin):
        cdef int64_t ref = self.msg_ref[m]
        cdef int64_t kind = self.msg_kind[m]
        cdef int64_t key = (ref << 2) | kind
        cdef QEntry entry
        entry.m = <int32_t>m
        entry.enq = now
        entry.is_origin = 1 if is_origin else 0
        cdef unordered_map[int64_t, QEntry].iterator it = self.queues[u].find(key)
        if it == self.queues[u].end():
            self.queues[u][key] = entry
        elif self.msg_ts[m] > self.msg_ts[deref(it).second.m]:
            self.rf[u].erase(deref(it).second.m)
            self.queues[u][key] = entry
        self.ensure_tick(u, now)

    cdef bint bucket_admit(self, int64_t u, int64_t ref, int64_t now):
        cdef int64_t key = u * self.ev_space + ref
        cdef int64_t interval = self.rate_interval_us
        cdef Bucket b
        cdef int64_t cap, t
        cdef unordered_map[int64_t, Bucket].iterator itb = self.buckets.find(key)
        if itb == self.buckets.end():
            b.tokens = self.rate_burst * interval
            b.last = now
        else:
            b = deref(itb).second
            if now > b.last:
                cap = self.rate_burst * interval
                t = b.tokens + (now - b.last)
                b.tokens = cap if t > cap else t
                b.last = now
        if b.tokens >= interval:
            b.tokens -= interval
            self.buckets[key] = b
            return True
        self.buckets[key] = b
        return False

    cdef void origin_recipients(self, int64_t u, vector[int32_t]& out):
        out.clear()
        cdef int64_t i
        cdef int32_t w, last = -1
        for i in range(self.adj_ptr[u], self.adj_ptr[u + 1]):
            w = self.adj_nbr[i]
            if w != last:
                out.push_back(w)
                last = w

    # -- strategy forwarding -----------------------------------------------------

    cdef void flood_forward(self, int64_t v, int64_t m, int64_t frm, int64_t now):
        cdef int64_t crt = self.msg_created[m]
        cdef size_t i
        cdef int32_t w
        for i in range(self.subs[v].size()):
            w = self.subs[v][i]
            if w != frm and crt >= self.sub_start[v][i]:
                self.deliver(v, w, m, now)

    cdef void tree_forward(self, int64_t v, int64_t m, int64_t frm, int64_t now):
        cdef int64_t j
        cdef int32_t w
        for j in range(self.tree_ptr[v], self.tree_ptr[v + 1]):
            w = self.tree_nbr[j]
            if w != frm:
                self.deliver(v, w, m, now)

    cdef void push_delta(self, int64_t v, int64_t m, int64_t exclude_pair, int64_t now):
        cdef int64_t j, q, slot
        for j in range(self.np_ptr[v], self.np_ptr[v + 1]):
            q = self.np_pair[j]
            if q == exclude_pair:
                continue
            slot = self.np_slot[j]
            self.delta[2 * q + slot].push_back(<int32_t>m)
            if not self.pair_active[q]:
                self.pair_active[q] = 1
                self.push(self.next_grid(now, self.rp_phase[q], self.recon_interval_us),
                          EV_RECON, q, 0, 0)

    cdef void dispatch_origin(self, int64_t o, int64_t m, int64_t now):
        cdef vector[int32_t] targets
        cdef size_t i
        cdef size_t k
        cdef int32_t w
        cdef bint dup
        if self.strategy == S_STAGGERED:
            self.enqueue(o, m, now, True)
        elif self.strategy == S_FLOODING:
            # sorted union of subscribers and syncers
            for i in range(self.subs[o].size()):
                targets.push_back(self.subs[o][i])
            for i in range(self.syncers[o].size()):
                targets.push_back(self.syncers[o][i])
            sort_vec(targets)
            w = -1
            for i in range(targets.size()):
                if targets[i] != w:
                    w = targets[i]
                    if w != o:
                        self.deliver(o, w, m, now)
        elif self.strategy == S_SPANNING:
            self.tree_forward(o, m, -1, now)
        else:
            self.push_delta(o, m, -1, now)

    # -- handlers -------------------------------------------------------------------

    cdef void handle_arrival(self, int64_t m, int64_t f, int64_t v, int64_t now):
        cdef int64_t sz = self.msg_size[m]
        self.pending[v] -= sz
        self.bytes_in[v] += sz
        self.c_deliveries += 1
        cdef int64_t idx = m * self.n + v
        if self.seen_count[idx] < 255:
            self.seen_count[idx] += 1
        if self.seen[idx]:
            self.c_dups += 1
            if self.strategy == S_STAGGERED:
                if self.rf[v].count(<int32_t>m):
                    self.rf[v][<int32_t>m].push_back(<int32_t>f)
            return
        self.seen[idx] = 1
        self.first_seen[idx] = now

        cdef int64_t kind = self.msg_kind[m]
        cdef int64_t ref = self.msg_ref[m]
        cdef int64_t vidx, ver, vts, last
        cdef vector[int32_t] senders
        if self.strategy == S_STAGGERED:
            if kind == K_UPDATE:
                if 0 <= ref < self.E:
                    vidx = v * self.E + ref
                    ver = self.view[vidx]
                    if ver >= 0:
                        vts = self.ver_ts(ref, ver)
                        if self.msg_ts[m] <= vts:
                            self.c_stale += 1
                            return
                        if self.rate_burst > 0 and not self.bucket_admit(v, ref, now):
                            self.c_rate += 1
                            return
                        if (
                            self.ka_relay_min_diff_s > 0
                            and self.msg_ts[m] - vts < self.ka_relay_min_diff_s
                            and self.fields_equal_view(ref, ver, m)
                        ):
                            self.c_kadrop += 1
                            return
                    elif self.rate_burst > 0 and not self.bucket_admit(v, ref, now):
                        self.c_rate += 1
                        return
                    self.view[vidx] = <int32_t>(m + 1)
                else:
                    if self.virt_last[v].count(<int32_t>ref) and self.msg_ts[m] <= self.virt_last[v][<int32_t>ref]:
                        self.c_stale += 1
                        return
                    if self.rate_burst > 0 and not self.bucket_admit(v, ref, now):
                        self.c_rate += 1
                        return
                    self.virt_last[v][<int32_t>ref] = self.msg_ts[m]
            elif kind == K_NODE_ANN:
                if self.nann_last[v].count(<int32_t>ref) and self.msg_ts[m] <= self.nann_last[v][<int32_t>ref]:
                    self.c_anndup += 1
                    return
                self.nann_last[v][<int32_t>ref] = self.msg_ts[m]
            else:
                if self.cann_seen[v].count(<int32_t>ref):
                    self.c_anndup += 1
                    return
                self.cann_seen[v].insert(<int32_t>ref)
            senders.push_back(<int32_t>f)
            self.rf[v][<int32_t>m] = senders
            self.enqueue(v, m, now, False)
        elif self.strategy == S_FLOODING:
            if kind == K_UPDATE and 0 <= ref < self.E:
                self.apply_view(v, ref, m)
            self.flood_forward(v, m, f, now)
        elif self.strategy == S_SPANNING:
            if kind == K_UPDATE and 0 <= ref < self.E:
                self.apply_view(v, ref, m)
            self.tree_forward(v, m, f, now)

    cdef void handle_tick(self, int64_t u, int64_t now):
        if self.queues[u].size() == 0:
            if now < self.duration:
                self.push(now + self.stagger_us, EV_TICK, u, 0, 0)
            else:
                self.ticking[u] = 0
            return
        cdef vector[pair[int64_t, QEntry]] entries
        cdef unordered_map[int64_t, QEntry].iterator it = self.queues[u].begin()
        while it != self.queues[u].end():
            entries.push_back(pair[int64_t, QEntry](deref(it).first, deref(it).second))
            inc(it)
        self.queues[u].clear()
        sort_entries(entries)
        cdef int64_t nq = <int64_t>entries.size()
        cdef int64_t bs, nb
        batching(nq, self.min_batch, self.max_batches, &bs, &nb)
        cdef int64_t b, k, send_t, wt, wb, m
        cdef QEntry qe
        cdef Batch batch
        cdef vector[int32_t] recips
        cdef size_t si
        cdef int32_t w
        cdef int64_t crt
        cdef bint has_rf
        for b in range(nb):
            batch.sender = <int32_t>u
            batch.msgs.clear()
            batch.recips.clear()
            send_t = now + b * self.subbatch_us
            k = b * bs
            while k < nq and k < (b + 1) * bs:
                qe = entries[k].second
                m = qe.m
                wt = send_t - qe.enq
                wb = wt // 1_000_000
                if wb >= WAIT_BUCKETS:
                    wb = WAIT_BUCKETS - 1
                self.waiting_hist[wb] += 1
                self.waiting_count += 1
                if wt > self.waiting_max:
                    self.waiting_max = wt
                if wt < self.waiting_min:
                    self.waiting_min = wt
                recips.clear()
                if qe.is_origin:
                    self.origin_recipients(u, recips)
                else:
                    crt = self.msg_created[m]
                    has_rf = self.rf[u].count(<int32_t>m) > 0
                    for si in range(self.subs[u].size()):
                        w = self.subs[u][si]
                        if crt >= self.sub_start[u][si]:
                            if has_rf and contains32(self.rf[u][<int32_t>m], w):
                                continue
                            recips.push_back(w)
                batch.msgs.push_back(<int32_t>m)
                batch.recips.push_back(recips)
                k += 1
            self.side_batches.push_back(batch)
            self.push(send_t, EV_SUBBATCH, <int64_t>self.side_batches.size() - 1, 0, 0)
        for k in range(nq):
            self.rf[u].erase(entries[k].second.m)
        if now < self.duration:
            self.push(now + self.stagger_us, EV_TICK, u, 0, 0)
        else:
            self.ticking[u] = 0

    cdef void handle_subbatch(self, int64_t side_idx, int64_t now):
        cdef Batch* batch = &self.side_batches[side_idx]
        cdef int64_t u = batch.sender
        cdef size_t i, j
        cdef int32_t m, v
        cdef unordered_map[int32_t, vector[int32_t]] rmap
        cdef vector[int32_t] keys
        if self.inv_mode:
            for i in range(batch.msgs.size()):
                m = batch.msgs[i]
                for j in range(batch.recips[i].size()):
                    v = batch.recips[i][j]
                    if rmap.count(v) == 0:
                        keys.push_back(v)
                    rmap[v].push_back(m)
            sort_vec(keys)
            for i in range(keys.size()):
                self.deliver_inv(u, keys[i], rmap[keys[i]], now)
        else:
            for i in range(batch.msgs.size()):
                m = batch.msgs[i]
                for j in range(batch.recips[i].size()):
                    self.deliver(u, batch.recips[i][j], m, now)

    cdef void handle_inv(self, int64_t inv_idx, int64_t f, int64_t v, int64_t now):
        cdef vector[int32_t]* ids = &self.side_invs[inv_idx]
        cdef int64_t sz = self.inv_entry_bytes * <int64_t>ids.size()
        self.pending[v] -= sz
        self.bytes_in[v] += sz
        cdef vector[int32_t] req
        cdef size_t i
        cdef int64_t m, idx
        for i in range(ids.size()):
            m = ids[0][i]
            idx = m * self.n + v
            if not self.seen[idx] and not self.requested[idx]:
                self.requested[idx] = 1
                req.push_back(<int32_t>m)
        if req.size() > 0:
            self.deliver_req(v, f, req, now)

    cdef void handle_req(self, int64_t req_idx, int64_t v, int64_t f, int64_t now):
        cdef vector[int32_t]* ids = &self.side_reqs[req_idx]
        cdef size_t i
        for i in range(ids.size()):
            self.deliver(f, v, ids[0][i], now)

    cdef void handle_rotate(self, int64_t u, int64_t now):
        if now >= self.duration:
            return
        cdef vector[int32_t] cands
        cdef unordered_set[int32_t] syn_set
        cdef size_t i
        cdef int64_t j
        cdef int32_t w, last, old
        cdef int64_t pos
        if self.syncers[u].size() > 0:
            for i in range(self.syncers[u].size()):
                syn_set.insert(self.syncers[u][i])
            last = -1
            for j in range(self.adj_ptr[u], self.adj_ptr[u + 1]):
                w = self.adj_nbr[j]
                if w != last:
                    last = w
                    if syn_set.count(w) == 0:
                        cands.push_back(w)
            if cands.size() > 0:
                w = cands[<size_t>(self.rot_words[self.word_idx] % cands.size())]
                self.word_idx += 1
                pos = self.rot_pos[u] % <int64_t>self.syncers[u].size()
                self.rot_pos[u] += 1
                old = self.syncers[u][pos]
                self.syncers[u][pos] = w
                for i in range(self.subs[old].size()):
                    if self.subs[old][i] == <int32_t>u:
                        self.subs[old].erase(self.subs[old].begin() + i)
                        self.sub_start[old].erase(self.sub_start[old].begin() + i)
                        break
                self.subs[w].push_back(<int32_t>u)
                self.sub_start[w].push_back(now)
        self.push(now + self.rot_interval_us, EV_ROTATE, u, 0, 0)

    cdef void handle_keepalive(self, int64_t u, int64_t now):
        if now >= self.duration:
            return
        cdef int64_t now_s = self.ts_epoch + now // 1_000_000
        cdef int64_t i, e, ver, vts, m, ts, idx
        for i in range(self.adj_ptr[u], self.adj_ptr[u + 1]):
            e = self.adj_dedge[i]
            ver = self.view[u * self.E + e]
            if ver < 0:
                continue
            vts = self.ver_ts(e, ver)
            if now_s - vts < self.ka_stale_s:
                continue
            if self.m_used >= self.m_cap:
                self.c_kacap += 1
                continue
            m = self.m_used
            self.m_used += 1
            ts = vts + 1 if vts + 1 > now_s else now_s
            self.msg_kind[m] = K_UPDATE
            self.msg_ref[m] = <int32_t>e
            self.msg_origin[m] = <int32_t>u
            self.msg_ts[m] = ts
            self.msg_disabled[m] = <uint8_t>self.ver_disabled(e, ver)
            self.msg_cltv[m] = self.ver_cltv(e, ver)
            self.msg_hmin[m] = self.ver_hmin(e, ver)
            self.msg_hmax[m] = self.ver_hmax(e, ver)
            self.msg_fbase[m] = self.ver_fbase(e, ver)
            self.msg_fppm[m] = self.ver_fppm(e, ver)
            self.msg_size[m] = <int32_t>self.update_size
            self.msg_created[m] = now
            self.c_kaemit += 1
            if self.gt[e] < 0 or ts > self.ver_ts(e, self.gt[e]):
                self.gt[e] = <int32_t>(m + 1)
            self.view[u * self.E + e] = <int32_t>(m + 1)
            idx = m * self.n + u
            self.seen[idx] = 1
            self.first_seen[idx] = now
            self.dispatch_origin(u, m, now)
        self.push(now + self.ka_check_us, EV_KEEPALIVE, u, 0, 0)

    cdef void transfer(self, int64_t src, int64_t dst, int64_t m, int64_t q, int64_t now):
        cdef int64_t sz = self.msg_size[m]
        if self.broadcast_us[m] < 0:
            self.broadcast_us[m] = now
        self.bytes_out[src] += sz
        self.bytes_in[dst] += sz
        self.c_bfull += sz
        self.c_deliveries += 1
        self.c_xfer += 1
        cdef int64_t idx = m * self.n + dst
        if self.seen_count[idx] < 255:
            self.seen_count[idx] += 1
        self.seen[idx] = 1
        self.first_seen[idx] = now
        cdef int64_t ref = self.msg_ref[m]
        if self.msg_kind[m] == K_UPDATE and 0 <= ref < self.E:
            self.apply_view(dst, ref, m)
        self.push_delta(dst, m, q, now)

    cdef void handle_recon(self, int64_t q, int64_t now):
        cdef int64_t u = self.rp_u[q]
        cdef int64_t v = self.rp_v[q]
        cdef vector[int32_t] um, vm
        cdef size_t i
        cdef int32_t m
        for i in range(self.delta[2 * q].size()):
            m = self.delta[2 * q][i]
            if not self.seen[<int64_t>m * self.n + v]:
                um.push_back(m)
        for i in range(self.delta[2 * q + 1].size()):
            m = self.delta[2 * q + 1][i]
            if not self.seen[<int64_t>m * self.n + u]:
                vm.push_back(m)
        cdef int64_t la = <int64_t>self.delta[2 * q].size()
        cdef int64_t lb = <int64_t>self.delta[2 * q + 1].size()
        cdef int64_t d = <int64_t>(um.size() + vm.size())
        cdef int64_t c = capacity_estimate(la, lb, self.margin_milli)
        cdef int64_t sk = c
        cdef int64_t attempts = 1
        while d > c:
            c <<= 1
            sk += c
            attempts += 1
        cdef int64_t initiator, responder
        if (self.pair_rounds[q] & 1) == 0:
            initiator = u
            responder = v
        else:
            initiator = v
            responder = u
        self.pair_rounds[q] += 1
        cdef int64_t sketch_b = sk * self.sketch_bytes
        self.bytes_out[responder] += sketch_b
        self.bytes_in[initiator] += sketch_b
        self.c_bsketch += sketch_b
        cdef int64_t rb
        if um.size() > 0:
            rb = 8 * <int64_t>um.size()
            self.bytes_out[v] += rb
            self.bytes_in[u] += rb
            self.c_breq += rb
        if vm.size() > 0:
            rb = 8 * <int64_t>vm.size()
            self.bytes_out[u] += rb
            self.bytes_in[v] += rb
            self.c_breq += rb
        cdef ReconRow row
        if self.log_recon:
            row.t = now
            row.u = <int32_t>u
            row.v = <int32_t>v
            row.la = la
            row.lb = lb
            row.d = d
            row.c = c
            row.attempts = attempts
            row.um = um
            row.vm = vm
            self.recon_rows.push_back(row)
        self.delta[2 * q].clear()
        self.delta[2 * q + 1].clear()
        for i in range(um.size()):
            self.transfer(u, v, um[i], q, now)
        for i in range(vm.size()):
            self.transfer(v, u, vm[i], q, now)
        self.c_rounds += 1
        self.c_extra += attempts - 1
        if now < self.duration:
            self.push(now + self.recon_interval_us, EV_RECON, q, 0, 0)
        else:
            self.pair_active[q] = 0

    cdef void handle_inject(self, int64_t m, int64_t now):
        cdef int64_t o = self.msg_origin[m]
        self.c_inject += 1
        cdef int64_t ref = self.msg_ref[m]
        cdef int64_t cur
        if self.msg_kind[m] == K_UPDATE:
            if 0 <= ref < self.E:
                cur = self.gt[ref]
                if cur < 0 or self.msg_ts[m] > self.ver_ts(ref, cur):
                    self.gt[ref] = <int32_t>(m + 1)
                    self.c_gtapply += 1
                else:
                    self.c_gtstale += 1
                self.apply_view(o, ref, m)
            else:
                self.c_unknown += 1
        cdef int64_t idx = m * self.n + o
        self.seen[idx] = 1
        self.first_seen[idx] = now
        self.dispatch_origin(o, m, now)

    cdef void handle_payment(self, int64_t i, int64_t now):
        cdef int64_t src = self.pay_src[i]
        cdef int64_t dst = self.pay_dst[i]
        cdef int64_t amt = self.pay_amt[i]
        cdef int64_t base = src * self.E
        self.dj_round += 1
        cdef int64_t stamp = self.dj_round
        self.dj_stamp[src] = stamp
        self.dj_fee[src] = 0
        self.dj_hops[src] = 0
        self.dj_pred[src] = -1
        # min-heap on (fee, hops, node) via negated max-heap
        cdef priority_queue[pair[pair[int64_t, int64_t], int64_t]] h
        cdef pair[pair[int64_t, int64_t], int64_t] top
        h.push(pair[pair[int64_t, int64_t], int64_t](
            pair[int64_t, int64_t](0, 0), -src))
        cdef bint found = False
        cdef int64_t fee, hops, x, j, e, ver, hx, nf, nh
        cdef int32_t w
        while h.size() > 0:
            top = h.top()
            h.pop()
            fee = -top.first.first
            hops = -top.first.second
            x = -top.second
            if fee > self.dj_fee[x] or (fee == self.dj_fee[x] and hops > self.dj_hops[x]):
                continue
            if x == dst:
                found = True
                break
            for j in range(self.adj_ptr[x], self.adj_ptr[x + 1]):
                e = self.adj_dedge[j]
                ver = self.view[base + e]
                if ver < 0:
                    continue
                if self.ver_disabled(e, ver):
                    continue
                if amt < self.ver_hmin(e, ver):
                    continue
                hx = self.ver_hmax(e, ver)
                if 0 <= hx < amt:
                    continue
                w = self.adj_nbr[j]
                nf = fee + self.ver_fbase(e, ver) + amt * self.ver_fppm(e, ver) // 1_000_000
                nh = hops + 1
                if self.dj_stamp[w] != stamp or nf < self.dj_fee[w] or (
                    nf == self.dj_fee[w] and nh < self.dj_hops[w]
                ):
                    self.dj_stamp[w] = stamp
                    self.dj_fee[w] = nf
                    self.dj_hops[w] = nh
                    self.dj_pred[w] = <int32_t>e
                    h.push(pair[pair[int64_t, int64_t], int64_t](
                        pair[int64_t, int64_t](-nf, -nh), -w))
        if not found:
            self.pay_status[i] = P_NO_ROUTE
            return
        cdef bint unconv = False
        cdef bint failed = False
        cdef int64_t node = dst
        cdef int64_t hops_n = 0
        cdef int64_t gver, vver, gfee, vfee
        while node != src:
            e = self.dj_pred[node]
            hops_n += 1
            gver = self.gt[e]
            vver = self.view[base + e]
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
        self.pay_fee[i] = self.dj_fee[dst]
        self.pay_hops[i] = <int16_t>hops_n

    # -- run -----------------------------------------------------------------------

    def run(self):
        cdef int64_t u, q, t_idx, i
        if self.strategy == S_STAGGERED:
            for u in range(self.n):
                self.ticking[u] = 1
                self.push(self.stg_phase[u], EV_TICK, u, 0, 0)
            if self.rot_interval_us > 0:
                for u in range(self.n):
                    self.push(self.rot_phase[u], EV_ROTATE, u, 0, 0)
        if self.ka_enabled:
            for u in range(self.n):
                self.push(self.ka_phase[u], EV_KEEPALIVE, u, 0, 0)
        if self.strategy == S_RECON:
            for q in range(self.R):
                self.pair_active[q] = 1
                self.push(self.rp_phase[q], EV_RECON, q, 0, 0)
        for t_idx in range(self.T):
            self.push(self.msg_created[t_idx], EV_INJECT, t_idx, 0, 0)
        for i in range(self.P):
            self.push(self.pay_time[i], EV_PAYMENT, i, 0, 0)

        cdef int64_t n_events = 0
        cdef int64_t max_events = self.plan.max_events
        cdef Ev ev
        cdef int64_t t, w1, w2, kind, a, b, c
        while self.heap.size() > 0:
            ev = self.heap.top()
            self.heap.pop()
            t = -ev.first.first
            w1 = ev.second.first
            w2 = ev.second.second
            kind = w1 >> 32
            a = w1 & 0xFFFFFFFF
            b = w2 >> 32
            c = w2 & 0xFFFFFFFF
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

        cdef int64_t vsum = 0
        for u in range(self.n):
            vsum += self.pending[u]
        if vsum != 0:
            raise RuntimeError("pending byte counters nonzero after drain")

        counters = {
            "deliveries": self.c_deliveries,
            "dup_arrivals": self.c_dups,
            "stale_drops": self.c_stale,
            "rate_drops": self.c_rate,
            "keepalive_relay_drops": self.c_kadrop,
            "ann_dup_drops": self.c_anndup,
            "bytes_full": self.c_bfull,
            "bytes_inv": self.c_binv,
            "bytes_req_ids": self.c_breq,
            "bytes_sketch": self.c_bsketch,
            "inv_entries": self.c_invent,
            "inv_requests": self.c_invreq,
            "injections": self.c_inject,
            "gt_applied": self.c_gtapply,
            "gt_stale": self.c_gtstale,
            "unknown_ref_updates": self.c_unknown,
            "keepalives_emitted": self.c_kaemit,
            "keepalive_capacity_hits": self.c_kacap,
            "recon_rounds": self.c_rounds,
            "recon_extra_attempts": self.c_extra,
            "recon_transfers": self.c_xfer,
            "events": n_events,
        }

        cdef int64_t mu = self.m_used
        bytes_in = self.bytes_in_a
        bytes_out = self.bytes_out_a
        waiting = self.waiting_hist_a

        recon_log = None
        if self.log_recon:
            recon_log = self._pack_recon_log()

        return RawResult(
            n_nodes=self.n,
            m_used=mu,
            bytes_in=bytes_in,
            bytes_out=bytes_out,
            first_seen_us=self.first_seen_a[: mu * self.n].copy(),
            seen_count=self.seen_count_a[: mu * self.n].copy(),
            broadcast_us=self.broadcast_a[:mu].copy(),
            msg_kind=self.msg_kind_a[:mu].copy(),
            msg_size=self.msg_size_a[:mu].copy(),
            msg_origin=self.msg_origin_a[:mu].copy(),
            msg_created_us=self.msg_created_a[:mu].copy(),
            waiting_hist=waiting,
            waiting_count=self.waiting_count,
            waiting_max_us=self.waiting_max if self.waiting_count else 0,
            waiting_min_us=self.waiting_min if self.waiting_count else 0,
            pay_status=self.pay_status_a,
            pay_unconverged=self.pay_unconv_a,
            pay_fee=self.pay_fee_a,
            pay_hops=self.pay_hops_a,
            counters=counters,
            recon_log=recon_log,
        )

    def _pack_recon_log(self):
        cdef size_t i, j
        nrows = self.recon_rows.size()
        times = np.zeros(nrows, dtype=np.int64)
        us = np.zeros(nrows, dtype=np.int32)
        vs = np.zeros(nrows, dtype=np.int32)
        las = np.zeros(nrows, dtype=np.int64)
        lbs = np.zeros(nrows, dtype=np.int64)
        ds = np.zeros(nrows, dtype=np.int64)
        cs = np.zeros(nrows, dtype=np.int64)
        ats = np.zeros(nrows, dtype=np.int64)
        xfer_ptr = np.zeros(nrows + 1, dtype=np.int64)
        xfer_ids = []
        xfer_dst = []
        for i in range(nrows):
            times[i] = self.recon_rows[i].t
            us[i] = self.recon_rows[i].u
            vs[i] = self.recon_rows[i].v
            las[i] = self.recon_rows[i].la
            lbs[i] = self.recon_rows[i].lb
            ds[i] = self.recon_rows[i].d
            cs[i] = self.recon_rows[i].c
            ats[i] = self.recon_rows[i].attempts
            for j in range(self.recon_rows[i].um.size()):
                xfer_ids.append(self.recon_rows[i].um[j])
                xfer_dst.append(self.recon_rows[i].v)
            for j in range(self.recon_rows[i].vm.size()):
                xfer_ids.append(self.recon_rows[i].vm[j])
                xfer_dst.append(self.recon_rows[i].u)
            xfer_ptr[i + 1] = len(xfer_ids)
        return {
            "time_us": times,
            "u": us,
            "v": vs,
            "size_a": las,
            "size_b": lbs,
            "diff": ds,
            "capacity": cs,
            "attempts": ats,
            "xfer_ptr": xfer_ptr,
            "xfer_ids": np.array(xfer_ids, dtype=np.int64),
            "xfer_dst": np.array(xfer_dst, dtype=np.int64),
        }


def run_plan(plan):
    return Kernel(plan).run()
