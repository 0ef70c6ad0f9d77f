"""Run metrics: bandwidth totals, convergence distributions, redundancy,
queue waiting times, payment outcomes.

All percentile/curve statistics pool (message, node) pairs, matching
share-of-nodes-vs-time plots; the origin is excluded from each message's
population. Reports serialize canonically (sorted keys, 9-decimal floats) so
determinism is byte-testable.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core.plan import P_NO_ROUTE, P_STALE_FAILURE, P_SUCCESS, RawResult


def b_min(num_nodes: int, num_messages: int, avg_message_size: float):
    """Theoretical bandwidth lower bound: every node receives every message
    exactly once."""
    if num_nodes < 0 or num_messages < 0 or avg_message_size < 0:
        raise ValueError("b_min arguments must be >= 0")
    return num_nodes * num_messages * avg_message_size


def convergence_stats(
    delays_s: Sequence[float], total_pairs: Optional[int] = None
) -> Dict[str, object]:
    """Pooled delay distribution: mean, p95 (smallest t covering >=95% of
    pairs), p100 and the 1-second cumulative share curve."""
    n = len(delays_s)
    if n == 0:
        return {"mean": 0.0, "p95": 0.0, "p100": 0.0, "curve": []}
    xs = np.sort(np.asarray(delays_s, dtype=np.float64))
    denom = total_pairs if total_pairs is not None else n
    idx95 = -(-95 * n // 100) - 1  # ceil(0.95 n) - 1
    p95 = float(xs[idx95])
    p100 = float(xs[-1])
    mean = float(xs.mean())
    buckets = np.floor(xs).astype(np.int64)
    curve: List[Tuple[int, float]] = []
    counts = np.bincount(buckets)
    cum = 0
    for t, c in enumerate(counts):
        cum += int(c)
        curve.append((t, cum / denom))
    return {"mean": mean, "p95": p95, "p100": p100, "curve": curve}


def _r(x: float) -> float:
    return round(float(x), 9)


@dataclass
class RunReport:
    protocol: str
    seed: int
    n_nodes: int
    n_channels: int
    n_messages: int
    duration_s: float
    total_bytes: int
    bytes_full: int
    bytes_inv: int
    bytes_sketch: int
    bytes_req_ids: int
    deliveries: int
    avg_message_size: float
    b_min_bytes: float
    overhead_factor: float
    mean_seen_count: float
    delay_mean_s: float
    delay_p95_s: float
    delay_p100_s: float
    coverage: float
    excluded_pairs: int
    convergence_curve: List[Tuple[int, float]]
    redundancy_histogram: Dict[int, float]
    redundancy_counts: Dict[int, int]
    waiting_histogram: Dict[int, int]
    waiting_count: int
    waiting_min_s: float
    waiting_max_s: float
    payments_total: int
    payments_success: int
    payments_no_route: int
    payments_stale_failure: int
    payments_unconverged: int
    counters: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "seed": self.seed,
            "n_nodes": self.n_nodes,
            "n_channels": self.n_channels,
            "n_messages": self.n_messages,
            "duration_s": _r(self.duration_s),
            "bandwidth": {
                "total_bytes": self.total_bytes,
                "full_message_bytes": self.bytes_full,
                "inventory_bytes": self.bytes_inv,
                "sketch_bytes": self.bytes_sketch,
                "request_id_bytes": self.bytes_req_ids,
                "deliveries": self.deliveries,
                "avg_message_size": _r(self.avg_message_size),
                "b_min_bytes": _r(self.b_min_bytes),
                "overhead_factor": _r(self.overhead_factor),
                "mean_seen_count": _r(self.mean_seen_count),
            },
            "convergence": {
                "delay_mean_s": _r(self.delay_mean_s),
                "delay_p95_s": _r(self.delay_p95_s),
                "delay_p100_s": _r(self.delay_p100_s),
                "coverage": _r(self.coverage),
                "excluded_pairs": self.excluded_pairs,
                "curve": [[t, _r(s)] for t, s in self.convergence_curve],
            },
            "redundancy": {
                "histogram": {str(k): _r(v) for k, v in sorted(self.redundancy_histogram.items())},
                "counts": {str(k): v for k, v in sorted(self.redundancy_counts.items())},
            },
            "waiting": {
                "histogram": {str(k): v for k, v in sorted(self.waiting_histogram.items())},
                "count": self.waiting_count,
                "min_s": _r(self.waiting_min_s),
                "max_s": _r(self.waiting_max_s),
            },
            "payments": {
                "total": self.payments_total,
                "success": self.payments_success,
                "no_route": self.payments_no_route,
                "stale_failure": self.payments_stale_failure,
                "unconverged": self.payments_unconverged,
            },
            "counters": dict(sorted(self.counters.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    def write(self, path: str) -> None:
        """Write the canonical JSON report plus CSV sidecars next to it."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
        stem, _ext = os.path.splitext(path)
        with open(stem + ".curve.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "share"])
            for t, s in self.convergence_curve:
                w.writerow([t, f"{s:.9f}"])
        with open(stem + ".redundancy.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["bucket", "count"])
            for k in sorted(self.redundancy_counts):
                w.writerow([k, self.redundancy_counts[k]])
        with open(stem + ".waiting.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["bucket", "count"])
            for k in sorted(self.waiting_histogram):
                w.writerow([k, self.waiting_histogram[k]])


def finalize_report(
    raw: RawResult,
    protocol: str,
    seed: int,
    n_channels: int,
    duration_s: float,
) -> RunReport:
    n = raw.n_nodes
    m = raw.m_used
    total_in = int(raw.bytes_in.sum())
    total_out = int(raw.bytes_out.sum())
    if total_in != total_out:
        raise RuntimeError(f"byte conservation violated: in={total_in} out={total_out}")

    sizes = raw.msg_size.astype(np.int64)
    total_msg_bytes = int(sizes.sum())
    avg_size = total_msg_bytes / m if m else 0.0
    bmin = float(n) * float(total_msg_bytes)  # == n * m * avg_size, exactly
    deliveries = int(raw.counters.get("deliveries", 0))
    overhead = total_in / bmin if bmin > 0 else 0.0
    mean_seen = deliveries / (n * m) if n * m else 0.0

    # pooled delays over non-origin pairs
    delays: np.ndarray
    coverage = 1.0
    excluded = 0
    redundancy_counts: Dict[int, int] = {}
    if m:
        fs = raw.first_seen_us.reshape(m, n)
        sc = raw.seen_count.reshape(m, n)
        cols = np.arange(n)
        non_origin = cols[None, :] != raw.msg_origin[:, None]
        sent = raw.broadcast_us >= 0
        seen_mask = (fs >= 0) & non_origin & sent[:, None]
        d_us = fs[seen_mask] - np.broadcast_to(raw.broadcast_us[:, None], (m, n))[seen_mask]
        delays = d_us.astype(np.float64) / 1e6
        total_pairs = m * (n - 1)
        excluded = total_pairs - int(seen_mask.sum())
        coverage = int(seen_mask.sum()) / total_pairs if total_pairs else 1.0
        counts = sc[non_origin]
        counts = counts[counts > 0]
        bc = np.bincount(counts)
        pos = int(counts.size)
        for k in range(1, len(bc)):
            if bc[k]:
                redundancy_counts[k] = int(bc[k])
        redundancy_hist = {k: v / pos for k, v in redundancy_counts.items()} if pos else {}
    else:
        delays = np.zeros(0)
        total_pairs = 0
        redundancy_hist = {}

    stats = convergence_stats(delays, total_pairs if m else None)

    waiting_hist = {
        i: int(c) for i, c in enumerate(raw.waiting_hist.tolist()) if c
    }

    st = raw.pay_status
    return RunReport(
        protocol=protocol,
        seed=seed,
        n_nodes=n,
        n_channels=n_channels,
        n_messages=m,
        duration_s=duration_s,
        total_bytes=total_in,
        bytes_full=int(raw.counters.get("bytes_full", 0)),
        bytes_inv=int(raw.counters.get("bytes_inv", 0)),
        bytes_sketch=int(raw.counters.get("bytes_sketch", 0)),
        bytes_req_ids=int(raw.counters.get("bytes_req_ids", 0)),
        deliveries=deliveries,
        avg_message_size=avg_size,
        b_min_bytes=bmin,
        overhead_factor=overhead,
        mean_seen_count=mean_seen,
        delay_mean_s=stats["mean"],
        delay_p95_s=stats["p95"],
        delay_p100_s=stats["p100"],
        coverage=coverage,
        excluded_pairs=excluded,
        convergence_curve=stats["curve"],
        redundancy_histogram=redundancy_hist,
        redundancy_counts=redundancy_counts,
        waiting_histogram=waiting_hist,
        waiting_count=raw.waiting_count,
        waiting_min_s=raw.waiting_min_us / 1e6,
        waiting_max_s=raw.waiting_max_us / 1e6,
        payments_total=len(st),
        payments_success=int((st == P_SUCCESS).sum()),
        payments_no_route=int((st == P_NO_ROUTE).sum()),
        payments_stale_failure=int((st == P_STALE_FAILURE).sum()),
        payments_unconverged=int(raw.pay_unconverged.sum()),
        counters={k: int(v) for k, v in raw.counters.items()},
    )


__all__ = ["b_min", "convergence_stats", "RunReport", "finalize_report"]
