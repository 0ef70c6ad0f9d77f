"""Gossip strategy parameterizations and the pure protocol primitives.

Presets reproduce the comparison matrix of the two deployed relay disciplines
(`lnd`, `c-lightning`) and the alternative strategies (flooding, spanning
tree, inventory variants, Erlay-style set reconciliation) at their named
connectivity levels.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Dict, List, Optional, Tuple

from .topology import NetworkSnapshot

DAY_S = 86_400.0


class Strategy(IntEnum):
    STAGGERED = 0
    FLOODING = 1
    SPANNING_TREE = 2
    RECONCILIATION = 3


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    strategy: Strategy
    inventory_mode: bool = False
    # staggered broadcast
    stagger_interval: float = 90.0
    sub_batch_delay: float = 5.0
    min_batch_size: int = 10
    max_batches: int = 18
    # overlay
    syncer_count: int = 3
    rotation_interval: float = 1200.0  # 0 disables rotation
    peer_source: str = "channels"  # "channels" | "uniform"
    # per-edge rate limiting (burst 0 disables)
    rate_limit_interval: float = 60.0
    rate_limit_burst: int = 10
    # keep-alive origination (off during trace replay) and the LND relay rule
    keepalive_check_interval: float = 1800.0
    keepalive_staleness: float = DAY_S
    keepalive_relay_min_diff: float = DAY_S  # 0 disables the relay rule
    prune_after: float = 14 * DAY_S
    # set reconciliation
    reconcile_interval: float = 10.0
    sketch_element_bytes: int = 8
    diff_margin: float = 1.0


def _lnd(name: str, **kw) -> ProtocolSpec:
    base = dict(
        strategy=Strategy.STAGGERED,
        stagger_interval=90.0,
        sub_batch_delay=5.0,
        min_batch_size=10,
        max_batches=18,
        syncer_count=3,
        rotation_interval=1200.0,
        rate_limit_interval=60.0,
        rate_limit_burst=10,
        keepalive_relay_min_diff=DAY_S,
    )
    base.update(kw)
    return ProtocolSpec(name=name, **base)


def _cl(name: str, **kw) -> ProtocolSpec:
    base = dict(
        strategy=Strategy.STAGGERED,
        stagger_interval=60.0,
        sub_batch_delay=0.0,
        min_batch_size=0,
        max_batches=1,
        syncer_count=5,
        rotation_interval=3600.0,
        rate_limit_interval=DAY_S,
        rate_limit_burst=4,
        keepalive_relay_min_diff=0.0,
    )
    base.update(kw)
    return ProtocolSpec(name=name, **base)


def _flood(k: int) -> ProtocolSpec:
    return ProtocolSpec(
        name=f"flooding-{k}",
        strategy=Strategy.FLOODING,
        syncer_count=k,
        rotation_interval=0.0,
        peer_source="uniform",
        rate_limit_burst=0,
        keepalive_relay_min_diff=0.0,
    )


def _sketch(k: int) -> ProtocolSpec:
    # diff_margin 0.2: deltas are common-heavy between rounds, so a full
    # sqrt(min) capacity floor overshoots badly at high connectivity; a small
    # coefficient keeps sketch cost tied to the true difference (failed
    # estimates retry with doubled capacity).
    return ProtocolSpec(
        name=f"minisketch-{k}",
        strategy=Strategy.RECONCILIATION,
        syncer_count=k,
        rotation_interval=0.0,
        peer_source="uniform",
        rate_limit_burst=0,
        keepalive_relay_min_diff=0.0,
        diff_margin=0.2,
    )


PRESETS: Dict[str, ProtocolSpec] = {
    "lnd": _lnd("lnd"),
    "lnd-t1s": _lnd("lnd-t1s", sub_batch_delay=1.0),
    "lnd-sb100": _lnd("lnd-sb100", min_batch_size=100),
    "lnd-inv": _lnd("lnd-inv", inventory_mode=True),
    "lnd-inv-t1s": _lnd("lnd-inv-t1s", inventory_mode=True, sub_batch_delay=1.0),
    "lnd-inv-sb100": _lnd("lnd-inv-sb100", inventory_mode=True, min_batch_size=100),
    "c-lightning": _cl("c-lightning"),
    "c-lightning-inv": _cl("c-lightning-inv", inventory_mode=True),
    "spanning": ProtocolSpec(
        name="spanning",
        strategy=Strategy.SPANNING_TREE,
        rotation_interval=0.0,
        rate_limit_burst=0,
        keepalive_relay_min_diff=0.0,
    ),
}
for _k in (4, 8, 16, 32):
    PRESETS[f"flooding-{_k}"] = _flood(_k)
    PRESETS[f"minisketch-{_k}"] = _sketch(_k)


def get_preset(name: str, **overrides) -> ProtocolSpec:
    if name not in PRESETS:
        known = ", ".join(sorted(PRESETS))
        raise KeyError(f"unknown protocol preset {name!r}; known presets: {known}")
    spec = PRESETS[name]
    return replace(spec, **overrides) if overrides else spec


def lnd_batching(n: int, min_batch_size: int = 10, max_batches: int = 18) -> Tuple[int, int]:
    """Split an n-message queue: batch_size = max(min, ceil(n/max)).

    The number of batches never exceeds `max_batches`, so with 5 s between
    batches the last send happens at most 85 s after the stagger tick.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return (min_batch_size, 0)
    if max_batches <= 1:
        return (n, 1)
    batch_size = max(min_batch_size, -(-n // max_batches))
    return (batch_size, -(-n // batch_size))


class TokenBucket:
    """Per-edge update admission: linear refill of 1 token per interval.

    Token state is exact: one token equals `refill_interval_us` internal
    units, so refilling adds the elapsed microseconds with no rounding loss.
    """

    __slots__ = ("capacity_units", "tokens_units", "refill_interval_us", "last_us")

    def __init__(self, burst: int, refill_interval_us: int, now_us: int = 0):
        self.refill_interval_us = max(1, refill_interval_us)
        self.capacity_units = burst * self.refill_interval_us
        self.tokens_units = self.capacity_units
        self.last_us = now_us

    @property
    def tokens(self) -> float:
        return self.tokens_units / self.refill_interval_us

    def admit(self, now_us: int) -> bool:
        if now_us > self.last_us:
            self.tokens_units = min(
                self.capacity_units, self.tokens_units + (now_us - self.last_us)
            )
            self.last_us = now_us
        if self.tokens_units >= self.refill_interval_us:
            self.tokens_units -= self.refill_interval_us
            return True
        return False


def rate_limit_admit(bucket: TokenBucket, now: float) -> bool:
    """Seconds-facing wrapper over TokenBucket.admit."""
    return bucket.admit(int(round(now * 1e6)))


def keepalive_relay_admit(prev_ts: int, new_ts: int, min_diff_s: int = 86_400) -> bool:
    """Relay rule for keep-alive updates: admitted iff the timestamp advanced
    by at least `min_diff_s` (one day by default)."""
    return new_ts - prev_ts >= min_diff_s


@dataclass
class SpanningTree:
    root: int
    parent: Dict[int, Optional[int]]
    tree_neighbors: List[List[int]]

    def edge_count(self) -> int:
        return sum(1 for p in self.parent.values() if p is not None)


def build_tree(snapshot: NetworkSnapshot, root: int) -> SpanningTree:
    """BFS tree over the channel graph from `root`, exploring neighbors in
    ascending node id for determinism. Covers only the root's component."""
    if not (0 <= root < snapshot.n_nodes):
        raise ValueError(f"root {root} not in snapshot")
    nbrs = snapshot.neighbors()
    parent: Dict[int, Optional[int]] = {root: None}
    tree_neighbors: List[List[int]] = [[] for _ in range(snapshot.n_nodes)]
    q = deque([root])
    while q:
        u = q.popleft()
        for w in nbrs[u]:
            if w not in parent:
                parent[w] = u
                tree_neighbors[u].append(w)
                tree_neighbors[w].append(u)
                q.append(w)
    return SpanningTree(root=root, parent=parent, tree_neighbors=tree_neighbors)


def build_forest(snapshot: NetworkSnapshot) -> SpanningTree:
    """BFS forest covering every component, each rooted at its highest-degree
    node (ties -> lowest id). Exposed as one tree structure with the global
    root being the giant component's root."""
    n = snapshot.n_nodes
    deg = snapshot.degrees()
    nbrs = snapshot.neighbors()
    parent: Dict[int, Optional[int]] = {}
    tree_neighbors: List[List[int]] = [[] for _ in range(n)]
    assigned = [False] * n
    global_root = -1
    best_size = -1
    order = sorted(range(n), key=lambda u: (-int(deg[u]), u))
    for r in order:
        if assigned[r]:
            continue
        parent[r] = None
        assigned[r] = True
        size = 1
        q = deque([r])
        while q:
            u = q.popleft()
            for w in nbrs[u]:
                if not assigned[w]:
                    assigned[w] = True
                    parent[w] = u
                    tree_neighbors[u].append(w)
                    tree_neighbors[w].append(u)
                    size += 1
                    q.append(w)
        if size > best_size:
            best_size = size
            global_root = r
    return SpanningTree(root=global_root, parent=parent, tree_neighbors=tree_neighbors)


def _ceil_isqrt(x: int) -> int:
    r = math.isqrt(x)
    return r if r * r == x else r + 1


def reconcile_capacity(size_a: int, size_b: int, diff_margin_milli: int = 1000) -> int:
    """Initial sketch capacity estimate for a reconciliation round.

    ceil(max(1, |size_a - size_b| + margin * sqrt(min(size_a, size_b)))),
    computed in exact integer arithmetic (milli-scaled margin).
    """
    lo = min(size_a, size_b)
    margin_term = -(-_ceil_isqrt(diff_margin_milli * diff_margin_milli * lo) // 1000)
    return max(1, abs(size_a - size_b) + margin_term)


__all__ = [
    "Strategy",
    "ProtocolSpec",
    "PRESETS",
    "get_preset",
    "lnd_batching",
    "TokenBucket",
    "rate_limit_admit",
    "keepalive_relay_admit",
    "SpanningTree",
    "build_tree",
    "build_forest",
    "reconcile_capacity",
]
