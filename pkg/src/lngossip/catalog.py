"""Classify channel updates into operational categories and summarize traces.

Categories, in precedence order for a (previous, new) policy pair:

  1. KEEP_ALIVE        -- every field equal except the timestamp
  2. CHANNEL_CLOSURE   -- disabled flipped false -> true
  3. CHANNEL_REOPEN    -- disabled flipped true -> false
  4. DISRUPTIVE        -- the sender must pay/lock more (fee_base, fee_ppm or
                          cltv increased) or may send less (htlc_max decreased)
  5. NON_DISRUPTIVE    -- the opposite direction of any of those fields
  6. MISC              -- anything else (htlc_min changes, first-ever update)

Mixed 4+5 changes resolve to DISRUPTIVE: one worsened field can already fail
a payment regardless of improvements elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from .topology import ChannelPolicy


class UpdateCategory(Enum):
    KEEP_ALIVE = "keep_alive"
    CHANNEL_CLOSURE = "channel_closure"
    CHANNEL_REOPEN = "channel_reopen"
    DISRUPTIVE = "disruptive"
    NON_DISRUPTIVE = "non_disruptive"
    MISC = "misc"


# Fields whose increase hurts a payment sender / decrease helps it.
_SENDER_COST_FIELDS = ("fee_base_msat", "fee_proportional_millionths", "cltv_expiry_delta")


def classify_update(prev: Optional[ChannelPolicy], new: ChannelPolicy) -> UpdateCategory:
    """Classify `new` against the previously seen policy for the same directed edge.

    `prev` is None for the first-ever update on an edge (-> MISC). Requires a
    strictly increasing timestamp when prev is present.
    """
    if prev is None:
        return UpdateCategory.MISC
    if new.timestamp <= prev.timestamp:
        raise ValueError(
            f"non-increasing timestamp: {prev.timestamp} -> {new.timestamp}"
        )
    if prev.fields_equal_except_timestamp(new):
        return UpdateCategory.KEEP_ALIVE
    if not prev.disabled and new.disabled:
        return UpdateCategory.CHANNEL_CLOSURE
    if prev.disabled and not new.disabled:
        return UpdateCategory.CHANNEL_REOPEN

    worse = False
    better = False
    for f in _SENDER_COST_FIELDS:
        p, q = getattr(prev, f), getattr(new, f)
        if q > p:
            worse = True
        elif q < p:
            better = True
    # htlc_maximum: shrinking what may be sent is disruptive; None means "no cap".
    pmax = prev.htlc_maximum_msat
    qmax = new.htlc_maximum_msat
    if pmax != qmax:
        if qmax is not None and (pmax is None or qmax < pmax):
            worse = True
        else:
            better = True
    if worse:
        return UpdateCategory.DISRUPTIVE
    if better:
        return UpdateCategory.NON_DISRUPTIVE
    return UpdateCategory.MISC


@dataclass
class CatalogReport:
    """Counts, shares, and timing histograms for a classified trace."""

    message_kind_counts: Dict[str, int] = field(default_factory=dict)
    category_counts: Dict[str, int] = field(default_factory=dict)
    with_prev_counts: Dict[str, int] = field(default_factory=dict)
    first_update_count: int = 0
    stale_skipped: int = 0
    keepalive_interarrival_s: List[int] = field(default_factory=list)
    closure_durations_s: List[int] = field(default_factory=list)

    @property
    def category_shares(self) -> Dict[str, float]:
        total = sum(self.category_counts.values())
        if total == 0:
            return {c.value: 0.0 for c in UpdateCategory}
        return {
            c.value: self.category_counts.get(c.value, 0) / total for c in UpdateCategory
        }

    @property
    def with_prev_shares(self) -> Dict[str, float]:
        total = sum(self.with_prev_counts.values())
        if total == 0:
            return {c.value: 0.0 for c in UpdateCategory}
        return {
            c.value: self.with_prev_counts.get(c.value, 0) / total
            for c in UpdateCategory
        }

    @property
    def message_kind_shares(self) -> Dict[str, float]:
        total = sum(self.message_kind_counts.values())
        if total == 0:
            return {k: 0.0 for k in self.message_kind_counts}
        return {k: v / total for k, v in self.message_kind_counts.items()}

    def keepalive_histogram(self, bucket_s: int = 600) -> Dict[int, int]:
        hist: Dict[int, int] = {}
        for d in self.keepalive_interarrival_s:
            b = (d // bucket_s) * bucket_s
            hist[b] = hist.get(b, 0) + 1
        return dict(sorted(hist.items()))

    def closure_duration_cdf(self) -> List[Tuple[int, float]]:
        if not self.closure_durations_s:
            return []
        xs = sorted(self.closure_durations_s)
        n = len(xs)
        return [(x, (i + 1) / n) for i, x in enumerate(xs)]

    def to_dict(self) -> dict:
        return {
            "message_kind_counts": dict(sorted(self.message_kind_counts.items())),
            "message_kind_shares": {
                k: round(v, 9) for k, v in sorted(self.message_kind_shares.items())
            },
            "category_counts": dict(sorted(self.category_counts.items())),
            "category_shares": {k: round(v, 9) for k, v in sorted(self.category_shares.items())},
            "with_prev_counts": dict(sorted(self.with_prev_counts.items())),
            "with_prev_shares": {
                k: round(v, 9) for k, v in sorted(self.with_prev_shares.items())
            },
            "first_update_count": self.first_update_count,
            "stale_skipped": self.stale_skipped,
            "keepalive_interarrival_histogram": {
                str(k): v for k, v in self.keepalive_histogram().items()
            },
            "closure_duration_samples": len(self.closure_durations_s),
        }


def catalog_trace(events: Sequence) -> CatalogReport:
    """Classify every channel update in a receive-time-ordered trace.

    `events` is a sequence of workload.TraceEvent. Each update is classified
    against the last accepted update for its directed edge; updates whose
    timestamp does not advance the edge are skipped (they would never be
    applied or relayed) and counted in `stale_skipped`. Keep-alive
    inter-arrivals and closure->reopen durations are collected as it goes.
    """
    report = CatalogReport()
    kinds = report.message_kind_counts
    last: Dict[Tuple[int, int], ChannelPolicy] = {}
    pending_closure: Dict[Tuple[int, int], int] = {}

    for ev in events:
        kname = ev.kind_name
        kinds[kname] = kinds.get(kname, 0) + 1
        if kname != "channel_update":
            continue
        key = (ev.scid, ev.direction)
        pol = ev.policy
        prev = last.get(key)
        if prev is not None and pol.timestamp <= prev.timestamp:
            report.stale_skipped += 1
            continue
        cat = classify_update(prev, pol)
        report.category_counts[cat.value] = report.category_counts.get(cat.value, 0) + 1
        if prev is None:
            report.first_update_count += 1
        else:
            report.with_prev_counts[cat.value] = (
                report.with_prev_counts.get(cat.value, 0) + 1
            )
            if cat == UpdateCategory.KEEP_ALIVE:
                report.keepalive_interarrival_s.append(pol.timestamp - prev.timestamp)
            elif cat == UpdateCategory.CHANNEL_CLOSURE:
                pending_closure[key] = pol.timestamp
            elif cat == UpdateCategory.CHANNEL_REOPEN and key in pending_closure:
                report.closure_durations_s.append(
                    pol.timestamp - pending_closure.pop(key)
                )
        last[key] = pol
    return report


__all__ = ["UpdateCategory", "classify_update", "CatalogReport", "catalog_trace"]
