"""Payment attempts routed on a possibly-stale local view.

Payments are atomic and instant: no liquidity, no HTLC mechanics. A route is
the least-total-fee path over edges that the SOURCE'S VIEW says are announced,
enabled, and within HTLC bounds; the outcome is then checked against ground
truth. An attempt is "unconverged" when any route edge's ground-truth policy
is newer than the view the route was built on (covers both stale failures and
opportunity costs).
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from .topology import ChannelPolicy


class PaymentScheduleError(ValueError):
    """Raised for malformed payment schedule files."""


class PaymentStatus(Enum):
    SUCCESS = "success"
    NO_ROUTE = "no_route"
    STALE_FAILURE = "stale_failure"


@dataclass(frozen=True)
class PaymentAttempt:
    time: float
    source: int
    destination: int
    amount_msat: int


@dataclass(frozen=True)
class Route:
    edges: Tuple[Tuple[int, int], ...]  # (scid, direction) per hop
    total_fee_msat: int

    @property
    def hops(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class PaymentOutcome:
    status: PaymentStatus
    unconverged: bool
    route: Tuple[Tuple[int, int], ...] = ()


def load_payment_schedule(path: str) -> List["PaymentAttempt"]:
    """Parse a JSON Lines payment schedule:
    {"t": sec, "src": idx, "dst": idx, "amt": msat}
    """
    attempts: List[PaymentAttempt] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                attempts.append(
                    PaymentAttempt(
                        time=float(rec["t"]),
                        source=int(rec["src"]),
                        destination=int(rec["dst"]),
                        amount_msat=int(rec["amt"]),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise PaymentScheduleError(
                    f"{path}:{lineno}: malformed record: {exc}"
                ) from exc
    attempts.sort(key=lambda a: a.time)
    return attempts


def save_payment_schedule(attempts: Sequence["PaymentAttempt"], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in attempts:
            fh.write(
                json.dumps(
                    {"t": a.time, "src": a.source, "dst": a.destination, "amt": a.amount_msat}
                )
                + "\n"
            )


def edge_fee(policy: ChannelPolicy, amount_msat: int) -> int:
    """Routing fee for forwarding `amount_msat` over one directed edge."""
    if amount_msat < 0:
        raise ValueError("amount must be >= 0")
    return policy.fee_base_msat + (
        amount_msat * policy.fee_proportional_millionths
    ) // 1_000_000


def _usable(policy: Optional[ChannelPolicy], amount: int) -> bool:
    if policy is None or policy.disabled:
        return False
    if amount < policy.htlc_minimum_msat:
        return False
    if policy.htlc_maximum_msat is not None and amount > policy.htlc_maximum_msat:
        return False
    return True


def find_route(
    n_nodes: int,
    channels: Sequence[Tuple[int, int, int]],
    view: Dict[Tuple[int, int], ChannelPolicy],
    src: int,
    dst: int,
    amount_msat: int,
) -> Optional[Route]:
    """Dijkstra over the view; minimizes total fee, then hop count.

    Returns None when dst is unreachable through usable edges. Deterministic:
    remaining ties settle by heap order on (fee, hops, node).
    """
    if src == dst:
        raise ValueError("src and dst must differ")
    out_edges: List[List[Tuple[int, int, int]]] = [[] for _ in range(n_nodes)]
    for scid, a, b in channels:
        out_edges[a].append((b, scid, 0))
        out_edges[b].append((a, scid, 1))

    INF = (1 << 62, 1 << 30)
    best: List[Tuple[int, int]] = [INF] * n_nodes
    pred: List[Optional[Tuple[int, int, int]]] = [None] * n_nodes  # (prev, scid, dir)
    best[src] = (0, 0)
    heap: List[Tuple[int, int, int]] = [(0, 0, src)]
    while heap:
        fee, hops, u = heapq.heappop(heap)
        if (fee, hops) > best[u]:
            continue
        if u == dst:
            break
        for w, scid, direction in out_edges[u]:
            pol = view.get((scid, direction))
            if not _usable(pol, amount_msat):
                continue
            nf = fee + edge_fee(pol, amount_msat)
            nh = hops + 1
            if (nf, nh) < best[w]:
                best[w] = (nf, nh)
                pred[w] = (u, scid, direction)
                heapq.heappush(heap, (nf, nh, w))
    if best[dst] == INF:
        return None
    edges: List[Tuple[int, int]] = []
    node = dst
    while node != src:
        prev, scid, direction = pred[node]
        edges.append((scid, direction))
        node = prev
    edges.reverse()
    return Route(edges=tuple(edges), total_fee_msat=best[dst][0])


def judge_route(
    route: Route,
    view: Dict[Tuple[int, int], ChannelPolicy],
    ground_truth: Dict[Tuple[int, int], ChannelPolicy],
    amount_msat: int,
) -> PaymentOutcome:
    """Check a view-built route against ground truth.

    StaleFailure when any edge is disabled in truth, or truth charges a higher
    fee / demands a higher cltv than the view budgeted. Unconverged whenever
    any route edge's truth timestamp is newer than the view's.
    """
    unconverged = False
    failed = False
    for key in route.edges:
        v = view.get(key)
        g = ground_truth.get(key)
        if g is None:
            continue
        if v is None or g.timestamp > v.timestamp:
            unconverged = True
        if g.disabled:
            failed = True
        elif v is not None and (
            edge_fee(g, amount_msat) > edge_fee(v, amount_msat)
            or g.cltv_expiry_delta > v.cltv_expiry_delta
        ):
            failed = True
    status = PaymentStatus.STALE_FAILURE if failed else PaymentStatus.SUCCESS
    return PaymentOutcome(status=status, unconverged=unconverged, route=route.edges)


def attempt_payment(
    n_nodes: int,
    channels: Sequence[Tuple[int, int, int]],
    view: Dict[Tuple[int, int], ChannelPolicy],
    ground_truth: Dict[Tuple[int, int], ChannelPolicy],
    att: PaymentAttempt,
) -> PaymentOutcome:
    route = find_route(n_nodes, channels, view, att.source, att.destination, att.amount_msat)
    if route is None:
        return PaymentOutcome(status=PaymentStatus.NO_ROUTE, unconverged=False)
    return judge_route(route, view, ground_truth, att.amount_msat)


def enumerate_min_fee(
    n_nodes: int,
    channels: Sequence[Tuple[int, int, int]],
    view: Dict[Tuple[int, int], ChannelPolicy],
    src: int,
    dst: int,
    amount_msat: int,
) -> Optional[int]:
    """Exhaustive simple-path enumeration; independent check for find_route.

    Only practical on small graphs (<= ~10 nodes).
    """
    out_edges: List[List[Tuple[int, int, int]]] = [[] for _ in range(n_nodes)]
    for scid, a, b in channels:
        out_edges[a].append((b, scid, 0))
        out_edges[b].append((a, scid, 1))
    best: List[Optional[int]] = [None]

    def dfs(u: int, fee: int, visited: set) -> None:
        if u == dst:
            if best[0] is None or fee < best[0]:
                best[0] = fee
            return
        for w, scid, direction in out_edges[u]:
            if w in visited:
                continue
            pol = view.get((scid, direction))
            if not _usable(pol, amount_msat):
                continue
            visited.add(w)
            dfs(w, fee + edge_fee(pol, amount_msat), visited)
            visited.remove(w)

    dfs(src, 0, {src})
    return best[0]


__all__ = [
    "PaymentScheduleError",
    "load_payment_schedule",
    "save_payment_schedule",
    "PaymentStatus",
    "PaymentAttempt",
    "Route",
    "PaymentOutcome",
    "edge_fee",
    "find_route",
    "judge_route",
    "attempt_payment",
    "enumerate_min_fee",
]
