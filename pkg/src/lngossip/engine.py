"""Simulation assembly: configuration -> flat run plan -> core -> report.

One run is strictly single-threaded and deterministic: every random draw
comes from named streams spawned off the run seed, and the chosen core
(compiled or pure Python) performs integer arithmetic only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from . import core as core_mod
from .core.plan import SimPlan
from .messages import DEFAULT_WIRE_SIZES, MsgKind, WireSizes
from .metrics import RunReport, finalize_report
from .protocols import ProtocolSpec, Strategy, build_forest, get_preset
from .topology import NetworkSnapshot, build_overlay, load_snapshot
from .workload import (
    SynthConfig,
    TraceEvent,
    TrafficMix,
    attribute_origin,
    default_mix,
    generate_synthetic,
    load_trace,
)


class ConfigError(ValueError):
    """Raised for inconsistent simulation configurations."""


# named substreams off the run seed; order is part of the determinism contract
_STREAMS = ("synth", "overlay", "phases", "rotation", "origins", "payments")


def _stream(seed: int, name: str) -> np.random.Generator:
    idx = _STREAMS.index(name)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(idx,)))


@dataclass
class SimConfig:
    protocol: Union[str, ProtocolSpec]
    seed: int = 1
    duration: float = 1200.0
    # topology source (exactly one)
    snapshot_path: Optional[str] = None
    snapshot: Optional[NetworkSnapshot] = None
    synth_nodes: Optional[int] = None
    synth_m: int = 4
    # traffic source (exactly one; synthetic traffic requires synthetic topology)
    trace_path: Optional[str] = None
    trace: Optional[List[TraceEvent]] = None
    synth_rate: Optional[float] = None
    synth_messages: Optional[int] = None
    synth_mix: Optional[TrafficMix] = None
    # payments: either a generated count or a loadable schedule
    payments: int = 0
    amount_msat: int = 1000
    payment_schedule_path: Optional[str] = None
    # engine parameters
    bandwidth_bps: int = 1_000_000
    latency_s: float = 0.1
    wire_sizes: WireSizes = field(default_factory=lambda: DEFAULT_WIRE_SIZES)
    keepalive_enabled: bool = False
    keepalive_capacity: int = 100_000
    log_recon: bool = False
    stagger_phase_s: Optional[float] = None  # fixed per-node phase override
    protocol_overrides: Dict[str, object] = field(default_factory=dict)

    def resolve_protocol(self) -> ProtocolSpec:
        if isinstance(self.protocol, ProtocolSpec):
            return self.protocol
        return get_preset(self.protocol, **self.protocol_overrides)

    def validate(self) -> None:
        topo_sources = sum(
            x is not None for x in (self.snapshot_path, self.snapshot, self.synth_nodes)
        )
        if topo_sources != 1:
            raise ConfigError("exactly one topology source required")
        traffic_sources = sum(
            x is not None
            for x in (self.trace_path, self.trace, self.synth_rate, self.synth_messages)
        )
        if self.synth_rate is not None and self.synth_messages is not None:
            traffic_sources -= 1
        if traffic_sources != 1:
            raise ConfigError("exactly one traffic source required")
        if (self.synth_rate is not None or self.synth_messages is not None) and (
            self.synth_nodes is None
        ):
            raise ConfigError("synthetic traffic requires a synthetic topology")
        spec = self.resolve_protocol()
        if spec.inventory_mode and spec.strategy != Strategy.STAGGERED:
            raise ConfigError("inventory mode applies to staggered broadcast only")


def _us(seconds: float) -> int:
    return int(round(seconds * 1e6))


def load_workload(cfg: SimConfig) -> Tuple[NetworkSnapshot, List[TraceEvent]]:
    """Resolve the (snapshot, trace) pair from whichever sources are set."""
    if cfg.snapshot is not None:
        snapshot = cfg.snapshot
    elif cfg.snapshot_path is not None:
        snapshot = load_snapshot(cfg.snapshot_path)
    else:
        rate = cfg.synth_rate
        if rate is None:
            rate = (cfg.synth_messages or 0) / cfg.duration if cfg.duration > 0 else 0.0
        synth_seed = int(_stream(cfg.seed, "synth").integers(0, 2**31 - 1))
        mix = cfg.synth_mix if cfg.synth_mix is not None else default_mix(rate)
        snapshot, trace = generate_synthetic(
            SynthConfig(
                n_nodes=cfg.synth_nodes,
                attach_m=cfg.synth_m,
                duration=cfg.duration,
                mix=mix,
                seed=synth_seed,
                n_messages=cfg.synth_messages,
            )
        )
        return snapshot, trace
    if cfg.trace is not None:
        trace = cfg.trace
    elif cfg.trace_path is not None:
        trace = load_trace(cfg.trace_path)
    else:
        raise ConfigError("loaded topology needs a loaded trace")
    return snapshot, trace


def build_plan(
    cfg: SimConfig,
    snapshot: NetworkSnapshot,
    trace: List[TraceEvent],
) -> SimPlan:
    spec = cfg.resolve_protocol()
    n = snapshot.n_nodes
    C = snapshot.n_channels
    E = 2 * C

    # adjacency, sorted by (neighbor, directed edge) per node
    per_node: List[List[Tuple[int, int]]] = [[] for _ in range(n)]
    for ci, (_scid, a, b) in enumerate(snapshot.channels):
        per_node[a].append((b, 2 * ci))
        per_node[b].append((a, 2 * ci + 1))
    adj_ptr = np.zeros(n + 1, dtype=np.int64)
    adj_nbr = np.zeros(2 * C, dtype=np.int32)
    adj_dedge = np.zeros(2 * C, dtype=np.int32)
    pos = 0
    for u in range(n):
        per_node[u].sort()
        adj_ptr[u] = pos
        for nbr, e in per_node[u]:
            adj_nbr[pos] = nbr
            adj_dedge[pos] = e
            pos += 1
    adj_ptr[n] = pos

    base_present = np.zeros(E, dtype=np.uint8)
    base_ts = np.zeros(E, dtype=np.int64)
    base_disabled = np.zeros(E, dtype=np.uint8)
    base_cltv = np.zeros(E, dtype=np.int64)
    base_hmin = np.zeros(E, dtype=np.int64)
    base_hmax = np.full(E, -1, dtype=np.int64)
    base_fbase = np.zeros(E, dtype=np.int64)
    base_fppm = np.zeros(E, dtype=np.int64)
    for (scid, direction), pol in snapshot.policies.items():
        e = 2 * snapshot.scid_index[scid] + direction
        base_present[e] = 1
        base_ts[e] = pol.timestamp
        base_disabled[e] = 1 if pol.disabled else 0
        base_cltv[e] = pol.cltv_expiry_delta
        base_hmin[e] = pol.htlc_minimum_msat
        base_hmax[e] = -1 if pol.htlc_maximum_msat is None else pol.htlc_maximum_msat
        base_fbase[e] = pol.fee_base_msat
        base_fppm[e] = pol.fee_proportional_millionths

    # trace arrays; unknown channels get virtual dedup refs past the real ones
    T = len(trace)
    tr_time = np.zeros(T, dtype=np.int64)
    tr_kind = np.zeros(T, dtype=np.int8)
    tr_ref = np.full(T, -1, dtype=np.int32)
    tr_origin = np.zeros(T, dtype=np.int32)
    tr_ts = np.zeros(T, dtype=np.int64)
    tr_disabled = np.zeros(T, dtype=np.uint8)
    tr_cltv = np.zeros(T, dtype=np.int64)
    tr_hmin = np.zeros(T, dtype=np.int64)
    tr_hmax = np.full(T, -1, dtype=np.int64)
    tr_fbase = np.zeros(T, dtype=np.int64)
    tr_fppm = np.zeros(T, dtype=np.int64)
    tr_size = np.zeros(T, dtype=np.int32)
    rng_origin = _stream(cfg.seed, "origins")
    virtual: Dict[Tuple[int, int], int] = {}
    virtual_chan: Dict[int, int] = {}
    for i, ev in enumerate(trace):
        tr_time[i] = _us(ev.time)
        tr_kind[i] = int(ev.kind)
        tr_origin[i] = attribute_origin(ev, snapshot, rng_origin)
        tr_size[i] = cfg.wire_sizes.for_kind(ev.kind)
        if ev.kind == MsgKind.CHANNEL_UPDATE:
            ci = snapshot.scid_index.get(ev.scid)
            if ci is not None:
                tr_ref[i] = 2 * ci + ev.direction
            else:
                key = (ev.scid, ev.direction)
                if key not in virtual:
                    virtual[key] = E + len(virtual)
                tr_ref[i] = virtual[key]
            p = ev.policy
            tr_ts[i] = p.timestamp
            tr_disabled[i] = 1 if p.disabled else 0
            tr_cltv[i] = p.cltv_expiry_delta
            tr_hmin[i] = p.htlc_minimum_msat
            tr_hmax[i] = -1 if p.htlc_maximum_msat is None else p.htlc_maximum_msat
            tr_fbase[i] = p.fee_base_msat
            tr_fppm[i] = p.fee_proportional_millionths
        elif ev.kind == MsgKind.NODE_ANNOUNCEMENT:
            tr_ref[i] = ev.node if 0 <= ev.node < n else -1
            tr_ts[i] = ev.timestamp
        else:
            ci = snapshot.scid_index.get(ev.scid)
            if ci is not None:
                tr_ref[i] = ci
            else:
                if ev.scid not in virtual_chan:
                    virtual_chan[ev.scid] = C + len(virtual_chan)
                tr_ref[i] = virtual_chan[ev.scid]

    # overlay
    rng_overlay = _stream(cfg.seed, "overlay")
    if spec.strategy == Strategy.SPANNING_TREE:
        syn_ptr = np.zeros(n + 1, dtype=np.int64)
        syn_flat = np.zeros(0, dtype=np.int32)
    else:
        overlay = build_overlay(
            snapshot,
            spec.syncer_count,
            spec.rotation_interval,
            rng_overlay,
            peer_source=spec.peer_source,
        )
        syn_ptr = np.zeros(n + 1, dtype=np.int64)
        flat: List[int] = []
        for u in range(n):
            syn_ptr[u] = len(flat)
            flat.extend(overlay.syncers[u])
        syn_ptr[n] = len(flat)
        syn_flat = np.array(flat, dtype=np.int32)

    # spanning tree
    if spec.strategy == Strategy.SPANNING_TREE:
        tree = build_forest(snapshot)
        tree_ptr = np.zeros(n + 1, dtype=np.int64)
        tflat: List[int] = []
        for u in range(n):
            tree_ptr[u] = len(tflat)
            tflat.extend(tree.tree_neighbors[u])
        tree_ptr[n] = len(tflat)
        tree_nbr = np.array(tflat, dtype=np.int32)
    else:
        tree_ptr = np.zeros(n + 1, dtype=np.int64)
        tree_nbr = np.zeros(0, dtype=np.int32)

    # reconciliation pairs from the overlay's undirected edge set
    if spec.strategy == Strategy.RECONCILIATION:
        pair_set = set()
        for u in range(n):
            for w in syn_flat[syn_ptr[u] : syn_ptr[u + 1]].tolist():
                pair_set.add((u, w) if u < w else (w, u))
        pairs = sorted(pair_set)
        rp_u = np.array([p[0] for p in pairs], dtype=np.int32)
        rp_v = np.array([p[1] for p in pairs], dtype=np.int32)
    else:
        rp_u = np.zeros(0, dtype=np.int32)
        rp_v = np.zeros(0, dtype=np.int32)

    # phases and rotation words
    duration_us = _us(cfg.duration)
    rng_phase = _stream(cfg.seed, "phases")
    stagger_us = max(1, _us(spec.stagger_interval))
    if cfg.stagger_phase_s is not None:
        stg_phase = np.full(n, _us(cfg.stagger_phase_s), dtype=np.int64)
    else:
        stg_phase = rng_phase.integers(0, stagger_us, size=n, dtype=np.int64)
    ka_check_us = max(1, _us(spec.keepalive_check_interval))
    ka_phase = rng_phase.integers(0, ka_check_us, size=n, dtype=np.int64)
    rot_us = _us(spec.rotation_interval)
    if rot_us > 0:
        rot_phase = rng_phase.integers(0, rot_us, size=n, dtype=np.int64)
    else:
        rot_phase = np.zeros(n, dtype=np.int64)
    recon_us = max(1, _us(spec.reconcile_interval))
    if len(rp_u):
        rp_phase = rng_phase.integers(0, recon_us, size=len(rp_u), dtype=np.int64)
    else:
        rp_phase = np.zeros(0, dtype=np.int64)

    rng_rot = _stream(cfg.seed, "rotation")
    if rot_us > 0 and spec.strategy == Strategy.STAGGERED:
        n_words = n * (duration_us // rot_us + 3)
        rot_words = rng_rot.integers(0, 2**63 - 1, size=n_words, dtype=np.uint64)
    else:
        rot_words = np.zeros(0, dtype=np.uint64)

    # payments
    rng_pay = _stream(cfg.seed, "payments")
    if cfg.payment_schedule_path is not None:
        from .payments import load_payment_schedule

        sched = load_payment_schedule(cfg.payment_schedule_path)
        for a in sched:
            if not (0 <= a.source < n and 0 <= a.destination < n) or a.source == a.destination:
                raise ConfigError(
                    f"payment schedule endpoint out of range: {a.source}->{a.destination}"
                )
        pay_time = np.array([_us(a.time) for a in sched], dtype=np.int64)
        pay_src = np.array([a.source for a in sched], dtype=np.int32)
        pay_dst = np.array([a.destination for a in sched], dtype=np.int32)
        pay_amt = np.array([a.amount_msat for a in sched], dtype=np.int64)
    elif cfg.payments > 0:
        P = cfg.payments
        if n < 2:
            raise ConfigError("payments need at least two nodes")

        pay_time = np.sort(rng_pay.integers(0, max(1, duration_us), size=P, dtype=np.int64))
        pay_src = rng_pay.integers(0, n, size=P, dtype=np.int32)
        raw_dst = rng_pay.integers(0, n - 1, size=P, dtype=np.int32)
        pay_dst = raw_dst + (raw_dst >= pay_src)
        pay_amt = np.full(P, cfg.amount_msat, dtype=np.int64)
    else:
        pay_time = np.zeros(0, dtype=np.int64)
        pay_src = np.zeros(0, dtype=np.int32)
        pay_dst = np.zeros(0, dtype=np.int32)
        pay_amt = np.zeros(0, dtype=np.int64)

    ka_enabled = 1 if cfg.keepalive_enabled else 0
    m_cap = T + (cfg.keepalive_capacity if ka_enabled else 0)

    return SimPlan(
        n_nodes=n,
        n_dedges=E,
        n_virtual=len(virtual) + 1,
        adj_ptr=adj_ptr,
        adj_nbr=adj_nbr,
        adj_dedge=adj_dedge,
        base_present=base_present,
        base_ts=base_ts,
        base_disabled=base_disabled,
        base_cltv=base_cltv,
        base_hmin=base_hmin,
        base_hmax=base_hmax,
        base_fbase=base_fbase,
        base_fppm=base_fppm,
        syn_ptr=syn_ptr,
        syn_flat=syn_flat,
        strategy=int(spec.strategy),
        inv_mode=1 if spec.inventory_mode else 0,
        stagger_us=stagger_us,
        subbatch_us=_us(spec.sub_batch_delay),
        min_batch=spec.min_batch_size,
        max_batches=spec.max_batches,
        rot_interval_us=rot_us if spec.strategy == Strategy.STAGGERED else 0,
        rate_interval_us=_us(spec.rate_limit_interval),
        rate_burst=spec.rate_limit_burst,
        ka_enabled=ka_enabled,
        ka_check_us=ka_check_us,
        ka_stale_s=int(spec.keepalive_staleness),
        ka_relay_min_diff_s=int(spec.keepalive_relay_min_diff),
        ts_epoch=1_700_000_000,
        recon_interval_us=recon_us,
        sketch_bytes=spec.sketch_element_bytes,
        margin_milli=int(round(spec.diff_margin * 1000)),
        tree_ptr=tree_ptr,
        tree_nbr=tree_nbr,
        tr_time_us=tr_time,
        tr_kind=tr_kind,
        tr_ref=tr_ref,
        tr_origin=tr_origin,
        tr_ts=tr_ts,
        tr_disabled=tr_disabled,
        tr_cltv=tr_cltv,
        tr_hmin=tr_hmin,
        tr_hmax=tr_hmax,
        tr_fbase=tr_fbase,
        tr_fppm=tr_fppm,
        tr_size=tr_size,
        m_cap=m_cap,
        update_size=cfg.wire_sizes.channel_update,
        inv_entry_bytes=cfg.wire_sizes.inventory_entry,
        pay_time_us=pay_time,
        pay_src=pay_src,
        pay_dst=pay_dst,
        pay_amount=pay_amt,
        stg_phase_us=stg_phase,
        ka_phase_us=ka_phase,
        rot_phase_us=rot_phase,
        rot_words=rot_words,
        rp_u=rp_u,
        rp_v=rp_v,
        rp_phase_us=rp_phase,
        duration_us=duration_us,
        latency_us=_us(cfg.latency_s),
        bandwidth_bps=cfg.bandwidth_bps,
        log_recon=1 if cfg.log_recon else 0,
    )


@dataclass
class RunArtifacts:
    report: RunReport
    raw: object
    plan: SimPlan
    snapshot: NetworkSnapshot


def run_simulation(cfg: SimConfig, core=None) -> RunArtifacts:
    """Load/generate the workload, run the core, finalize the report."""
    cfg.validate()
    snapshot, trace = load_workload(cfg)
    plan = build_plan(cfg, snapshot, trace)
    runner = core.run_plan if core is not None else core_mod.run_plan
    raw = runner(plan)
    spec = cfg.resolve_protocol()
    report = finalize_report(
        raw,
        protocol=spec.name,
        seed=cfg.seed,
        n_channels=snapshot.n_channels,
        duration_s=cfg.duration,
    )
    return RunArtifacts(report=report, raw=raw, plan=plan, snapshot=snapshot)


def run_comparison(
    base_cfg: SimConfig, preset_names: List[str], jobs: int = 1
) -> List[RunReport]:
    """Run several presets over the identical workload/seed.

    The workload is resolved once; each preset then runs with its own overlay
    parameters. Runs share only immutable inputs, so they may execute in
    parallel processes.
    """
    if len(preset_names) < 2:
        raise ConfigError("comparison needs at least two presets")
    base_cfg.validate()
    snapshot, trace = load_workload(base_cfg)
    cfgs = []
    for name in preset_names:
        cfg = SimConfig(
            protocol=name,
            seed=base_cfg.seed,
            duration=base_cfg.duration,
            snapshot=snapshot,
            trace=trace,
            payments=base_cfg.payments,
            amount_msat=base_cfg.amount_msat,
            bandwidth_bps=base_cfg.bandwidth_bps,
            latency_s=base_cfg.latency_s,
            keepalive_enabled=base_cfg.keepalive_enabled,
            protocol_overrides=base_cfg.protocol_overrides,
        )
        cfgs.append(cfg)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_report_only, cfgs))
    return [_run_report_only(c) for c in cfgs]


def _run_report_only(cfg: SimConfig) -> RunReport:
    return run_simulation(cfg).report


__all__ = [
    "ConfigError",
    "SimConfig",
    "load_workload",
    "build_plan",
    "RunArtifacts",
    "run_simulation",
    "run_comparison",
]
