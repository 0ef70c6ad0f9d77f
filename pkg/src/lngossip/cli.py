"""Command-line entry points: simulate, compare, analyze, synth.

Progress goes to stderr; data goes to files (or stdout for compare). Exit
codes: 0 ok, 1 usage error, 2 input error, 3 internal error. LNGOSSIP_SEED
serves as the seed fallback when --seed is not given.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from typing import List, Optional

from .catalog import catalog_trace
from .engine import ConfigError, SimConfig, run_comparison, run_simulation
from .protocols import PRESETS
from .payments import PaymentScheduleError
from .topology import SnapshotError, save_snapshot
from .workload import SynthConfig, TraceError, default_mix, generate_synthetic, load_trace, save_trace

log = logging.getLogger("lngossip")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse defaults to exit code 2
        raise _UsageError(message)


def _default_seed() -> int:
    env = os.environ.get("LNGOSSIP_SEED")
    return int(env) if env else 1


def _add_workload_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--snapshot", help="topology snapshot (JSON Lines)")
    p.add_argument("--trace", help="gossip trace to replay (JSON Lines)")
    p.add_argument("--synth-nodes", type=int, help="generate a synthetic topology")
    p.add_argument("--synth-m", type=int, default=4, help="channels per new node")
    p.add_argument("--synth-messages", type=int, help="synthetic trace message count")
    p.add_argument("--synth-rate", type=float, help="synthetic messages per second")
    p.add_argument("--duration", type=float, default=1200.0, help="traffic horizon in seconds")
    p.add_argument("--payments", type=int, default=0, help="payment attempts over the run")
    p.add_argument("--amount-msat", type=int, default=1000, help="payment amount")
    p.add_argument("--payment-schedule", help="JSON Lines payment schedule to replay")
    p.add_argument("--seed", type=int, default=None, help="run seed (env LNGOSSIP_SEED)")


def _config_from_args(args, protocol: str) -> SimConfig:
    seed = args.seed if args.seed is not None else _default_seed()
    return SimConfig(
        protocol=protocol,
        seed=seed,
        duration=args.duration,
        snapshot_path=args.snapshot,
        synth_nodes=args.synth_nodes,
        synth_m=args.synth_m,
        trace_path=args.trace,
        synth_rate=args.synth_rate,
        synth_messages=args.synth_messages,
        payments=args.payments,
        amount_msat=args.amount_msat,
        payment_schedule_path=args.payment_schedule,
    )


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args, args.protocol)
    log.info("simulate: protocol=%s seed=%d", args.protocol, cfg.seed)
    art = run_simulation(cfg)
    art.report.write(args.out)
    log.info(
        "done: p95=%.2fs bytes=%d unconverged=%d -> %s",
        art.report.delay_p95_s,
        art.report.total_bytes,
        art.report.payments_unconverged,
        args.out,
    )
    return EXIT_OK


def cmd_compare(args) -> int:
    names = [s.strip() for s in args.protocols.split(",") if s.strip()]
    if len(names) < 2:
        raise _UsageError("compare needs at least two --protocols")
    for name in names:
        if name not in PRESETS:
            raise _UsageError(
                f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}"
            )
    cfg = _config_from_args(args, names[0])
    log.info("compare: %s (seed=%d, jobs=%d)", ",".join(names), cfg.seed, args.jobs)
    reports = run_comparison(cfg, names, jobs=args.jobs)
    rows = [
        [r.protocol, f"{r.delay_p95_s:.6f}", r.total_bytes, r.payments_unconverged]
        for r in reports
    ]
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", newline="")
    try:
        w = csv.writer(out)
        w.writerow(["protocol", "p95_delay_s", "total_bytes", "unconverged_payments"])
        w.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_analyze(args) -> int:
    events = load_trace(args.trace)
    log.info("analyze: %d trace records", len(events))
    report = catalog_trace(events)
    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "catalog.json"), "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(
        os.path.join(args.out_dir, "keepalive_interarrival.csv"), "w", newline=""
    ) as fh:
        w = csv.writer(fh)
        w.writerow(["bucket", "count"])
        for k, v in report.keepalive_histogram().items():
            w.writerow([k, v])
    with open(os.path.join(args.out_dir, "closure_durations.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["duration_s", "cdf"])
        for x, p in report.closure_duration_cdf():
            w.writerow([x, f"{p:.9f}"])
    log.info("catalog written to %s", args.out_dir)
    return EXIT_OK


def cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    rate = args.synth_rate
    if rate is None:
        rate = (args.synth_messages or 0) / args.duration if args.duration > 0 else 0.0
    snapshot, trace = generate_synthetic(
        SynthConfig(
            n_nodes=args.nodes,
            attach_m=args.attach_m,
            duration=args.duration,
            mix=default_mix(rate),
            seed=seed,
            n_messages=args.synth_messages,
        )
    )
    save_snapshot(snapshot, args.out_snapshot)
    save_trace(trace, args.out_trace)
    log.info(
        "synth: %d nodes, %d channels, %d trace records -> %s, %s",
        snapshot.n_nodes,
        snapshot.n_channels,
        len(trace),
        args.out_snapshot,
        args.out_trace,
    )
    return EXIT_OK


def build_parser() -> _Parser:
    p = _Parser(prog="lngossip", description=__doc__)
    p.add_argument("--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="run one protocol and write a report")
    _add_workload_args(ps)
    ps.add_argument("--protocol", required=True, help=f"one of: {', '.join(sorted(PRESETS))}")
    ps.add_argument("--out", required=True, help="report JSON path (CSV sidecars beside it)")
    ps.set_defaults(func=cmd_simulate)

    pc = sub.add_parser("compare", help="run several presets on one workload")
    _add_workload_args(pc)
    pc.add_argument("--protocols", required=True, help="comma-separated preset names (>= 2)")
    pc.add_argument("--out", default="-", help="comparison CSV ('-' = stdout)")
    pc.add_argument("--jobs", type=int, default=1, help="parallel runs")
    pc.set_defaults(func=cmd_compare)

    pa = sub.add_parser("analyze", help="classify a recorded trace")
    pa.add_argument("--trace", required=True)
    pa.add_argument("--out-dir", required=True)
    pa.set_defaults(func=cmd_analyze)

    py = sub.add_parser("synth", help="generate a synthetic snapshot and trace")
    py.add_argument("--nodes", type=int, required=True)
    py.add_argument("--attach-m", type=int, default=4)
    py.add_argument("--duration", type=float, default=1200.0)
    py.add_argument("--synth-messages", type=int)
    py.add_argument("--synth-rate", type=float)
    py.add_argument("--seed", type=int, default=None)
    py.add_argument("--out-snapshot", required=True)
    py.add_argument("--out-trace", required=True)
    py.set_defaults(func=cmd_synth)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            stream=sys.stderr,
            level=logging.DEBUG if args.verbose else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SnapshotError, TraceError, PaymentScheduleError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
