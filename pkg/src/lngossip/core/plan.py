"""Flat, array-backed run description shared by both simulation cores.

Everything random is pre-drawn in the preparation step (phases, rotation
words, payment endpoints, trace origins), so a core consumes no RNG and the
compiled and pure-Python cores produce bit-identical results.

All times are integer microseconds; policy timestamps are integer seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

# strategy codes (match protocols.Strategy)
STAGGERED = 0
FLOODING = 1
SPANNING = 2
RECONCILIATION = 3

# message kinds (match messages.MsgKind)
K_UPDATE = 0
K_NODE_ANN = 1
K_CHAN_ANN = 2

# payment status codes
P_SUCCESS = 0
P_NO_ROUTE = 1
P_STALE_FAILURE = 2

WAIT_BUCKETS = 200  # waiting-time histogram seconds buckets; last = overflow


@dataclass
class SimPlan:
    # topology
    n_nodes: int
    n_dedges: int  # directed edges = 2 * channels
    n_virtual: int  # extra dedup refs for unknown-channel updates
    adj_ptr: np.ndarray  # int64[n+1]
    adj_nbr: np.ndarray  # int32[], channel neighbors of u (one entry per channel)
    adj_dedge: np.ndarray  # int32[], directed edge out of u for that entry
    base_present: np.ndarray  # uint8[E]
    base_ts: np.ndarray  # int64[E]
    base_disabled: np.ndarray  # uint8[E]
    base_cltv: np.ndarray  # int64[E]
    base_hmin: np.ndarray  # int64[E]
    base_hmax: np.ndarray  # int64[E], -1 = no cap
    base_fbase: np.ndarray  # int64[E]
    base_fppm: np.ndarray  # int64[E]
    # overlay (initial syncer lists, CSR)
    syn_ptr: np.ndarray  # int64[n+1]
    syn_flat: np.ndarray  # int32[]
    # protocol
    strategy: int
    inv_mode: int
    stagger_us: int
    subbatch_us: int
    min_batch: int
    max_batches: int
    rot_interval_us: int  # 0 = off
    rate_interval_us: int
    rate_burst: int  # 0 = off
    ka_enabled: int
    ka_check_us: int
    ka_stale_s: int
    ka_relay_min_diff_s: int  # 0 = off
    ts_epoch: int
    recon_interval_us: int
    sketch_bytes: int
    margin_milli: int
    # spanning tree adjacency (CSR; empty unless strategy == SPANNING)
    tree_ptr: np.ndarray
    tree_nbr: np.ndarray
    # trace messages
    tr_time_us: np.ndarray  # int64[T]
    tr_kind: np.ndarray  # int8[T]
    tr_ref: np.ndarray  # int32[T]: dedge | node | channel | virtual dedge | -1
    tr_origin: np.ndarray  # int32[T]
    tr_ts: np.ndarray  # int64[T]
    tr_disabled: np.ndarray  # uint8[T]
    tr_cltv: np.ndarray  # int64[T]
    tr_hmin: np.ndarray  # int64[T]
    tr_hmax: np.ndarray  # int64[T]
    tr_fbase: np.ndarray  # int64[T]
    tr_fppm: np.ndarray  # int64[T]
    tr_size: np.ndarray  # int32[T]
    m_cap: int  # T + keep-alive headroom
    update_size: int
    inv_entry_bytes: int
    # payments
    pay_time_us: np.ndarray  # int64[P]
    pay_src: np.ndarray  # int32[P]
    pay_dst: np.ndarray  # int32[P]
    pay_amount: np.ndarray  # int64[P]
    # pre-drawn randomness
    stg_phase_us: np.ndarray  # int64[n]
    ka_phase_us: np.ndarray  # int64[n]
    rot_phase_us: np.ndarray  # int64[n]
    rot_words: np.ndarray  # uint64[]
    # reconciliation pairs (undirected overlay edges)
    rp_u: np.ndarray  # int32[R]
    rp_v: np.ndarray  # int32[R]
    rp_phase_us: np.ndarray  # int64[R]
    # engine
    duration_us: int
    latency_us: int
    bandwidth_bps: int
    log_recon: int = 0
    max_events: int = 2_000_000_000


@dataclass
class RawResult:
    n_nodes: int
    m_used: int
    bytes_in: np.ndarray  # int64[n]
    bytes_out: np.ndarray  # int64[n]
    first_seen_us: np.ndarray  # int64[m_used * n] flat, -1 = never
    seen_count: np.ndarray  # uint8[m_used * n] flat
    broadcast_us: np.ndarray  # int64[m_used], -1 = never sent
    msg_kind: np.ndarray  # int8[m_used]
    msg_size: np.ndarray  # int32[m_used]
    msg_origin: np.ndarray  # int32[m_used]
    msg_created_us: np.ndarray  # int64[m_used]
    waiting_hist: np.ndarray  # int64[WAIT_BUCKETS]
    waiting_count: int
    waiting_max_us: int
    waiting_min_us: int
    pay_status: np.ndarray  # int8[P]
    pay_unconverged: np.ndarray  # uint8[P]
    pay_fee: np.ndarray  # int64[P]
    pay_hops: np.ndarray  # int16[P]
    counters: Dict[str, int] = field(default_factory=dict)
    recon_log: Optional[Dict[str, np.ndarray]] = None
