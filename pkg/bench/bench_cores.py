#!/usr/bin/env python3
"""Benchmark the compiled kernel against the pure-Python core.

Runs the same plans through both implementations and prints wall time,
events/second, and the speedup. Results are checked for equality while at it.

    python bench/bench_cores.py [--quick]
"""

import argparse
import sys
import time

from lngossip.core import get_core
from lngossip.engine import SimConfig, build_plan, load_workload
from lngossip.metrics import finalize_report


SCENARIOS = [
    # (label, protocol, nodes, messages, duration_s, payments)
    ("staggered-small", "lnd", 150, 250, 300.0, 200),
    ("flooding-small", "flooding-8", 150, 250, 300.0, 200),
    ("reconciliation-small", "minisketch-4", 150, 250, 300.0, 200),
    ("staggered-mid", "lnd", 500, 1000, 600.0, 2000),
    ("flooding-mid", "flooding-8", 500, 1000, 600.0, 2000),
]


def run_once(core, plan):
    t0 = time.perf_counter()
    raw = core.run_plan(plan)
    dt = time.perf_counter() - t0
    return raw, dt


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--quick", action="store_true", help="small scenarios only")
    args = ap.parse_args()

    try:
        kernel = get_core("kernel")
    except ImportError:
        print("compiled kernel not available; build it first (pip install -e .)",
              file=sys.stderr)
        return 1
    pure = get_core("python")

    scenarios = SCENARIOS[:3] if args.quick else SCENARIOS
    print(f"{'scenario':22s} {'events':>10s} {'kernel':>9s} {'python':>9s} "
          f"{'kernel ev/s':>12s} {'speedup':>8s}")
    for label, proto, nodes, msgs, dur, pays in scenarios:
        cfg = SimConfig(protocol=proto, seed=1, duration=dur, synth_nodes=nodes,
                        synth_m=4, synth_messages=msgs, payments=pays)
        cfg.validate()
        snapshot, trace = load_workload(cfg)
        plan = build_plan(cfg, snapshot, trace)
        raw_k, t_k = run_once(kernel, plan)
        raw_p, t_p = run_once(pure, plan)
        rep_k = finalize_report(raw_k, proto, 1, snapshot.n_channels, dur).to_json()
        rep_p = finalize_report(raw_p, proto, 1, snapshot.n_channels, dur).to_json()
        tag = "" if rep_k == rep_p else "  RESULTS DIFFER!"
        events = raw_k.counters["events"]
        print(f"{label:22s} {events:>10d} {t_k:>8.3f}s {t_p:>8.3f}s "
              f"{events / t_k:>12.0f} {t_p / t_k:>7.1f}x{tag}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
