"""Ground-truth channel graph, per-node policy views, and the gossip overlay.

The snapshot file format is JSON Lines with three record kinds:

    {"t": "node"}                                  -- optional "label"
    {"t": "chan", "scid": u64, "a": idx, "b": idx}
    {"t": "policy", "scid": u64, "dir": 0|1, "ts": u64, "disabled": bool,
     "cltv": u16, "htlc_min": u64, "htlc_max": u64|null,
     "fee_base": u64, "fee_ppm": u64}

Node indices are dense and assigned in file order. A channel direction with
no policy record is unannounced: not routable, but updates for it are still
relayed once they appear.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np


class SnapshotError(ValueError):
    """Raised for malformed or inconsistent snapshot files."""


@dataclass(frozen=True)
class ChannelPolicy:
    timestamp: int  # unix-style seconds
    disabled: bool
    cltv_expiry_delta: int
    htlc_minimum_msat: int
    htlc_maximum_msat: Optional[int]
    fee_base_msat: int
    fee_proportional_millionths: int

    def fields_equal_except_timestamp(self, other: "ChannelPolicy") -> bool:
        return (
            self.disabled == other.disabled
            and self.cltv_expiry_delta == other.cltv_expiry_delta
            and self.htlc_minimum_msat == other.htlc_minimum_msat
            and self.htlc_maximum_msat == other.htlc_maximum_msat
            and self.fee_base_msat == other.fee_base_msat
            and self.fee_proportional_millionths == other.fee_proportional_millionths
        )

    def with_timestamp(self, timestamp: int) -> "ChannelPolicy":
        return replace(self, timestamp=timestamp)


@dataclass
class NetworkSnapshot:
    """Immutable after load; shared by every per-node view in a run."""

    node_labels: List[Optional[str]]
    channels: List[Tuple[int, int, int]]  # (scid, endpoint_a, endpoint_b)
    policies: Dict[Tuple[int, int], ChannelPolicy]  # (scid, direction) -> policy
    scid_index: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.scid_index:
            self.scid_index = {scid: i for i, (scid, _, _) in enumerate(self.channels)}

    @property
    def n_nodes(self) -> int:
        return len(self.node_labels)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def validate(self) -> None:
        seen_scids = set()
        for scid, a, b in self.channels:
            if scid in seen_scids:
                raise SnapshotError(f"duplicate channel id {scid}")
            seen_scids.add(scid)
            for end in (a, b):
                if not (0 <= end < self.n_nodes):
                    raise SnapshotError(
                        f"channel {scid} references unknown node {end}"
                    )
        for (scid, direction), _pol in self.policies.items():
            if scid not in self.scid_index:
                raise SnapshotError(f"policy references unknown channel {scid}")
            if direction not in (0, 1):
                raise SnapshotError(f"policy direction must be 0 or 1, got {direction}")

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=np.int64)
        for _, a, b in self.channels:
            deg[a] += 1
            deg[b] += 1
        return deg

    def neighbors(self) -> List[List[int]]:
        """Channel-neighbor lists, sorted ascending (parallel channels collapse)."""
        nbr: List[set] = [set() for _ in range(self.n_nodes)]
        for _, a, b in self.channels:
            nbr[a].add(b)
            nbr[b].add(a)
        return [sorted(s) for s in nbr]


def _policy_from_record(rec: dict) -> ChannelPolicy:
    return ChannelPolicy(
        timestamp=int(rec["ts"]),
        disabled=bool(rec["disabled"]),
        cltv_expiry_delta=int(rec["cltv"]),
        htlc_minimum_msat=int(rec["htlc_min"]),
        htlc_maximum_msat=None if rec.get("htlc_max") is None else int(rec["htlc_max"]),
        fee_base_msat=int(rec["fee_base"]),
        fee_proportional_millionths=int(rec["fee_ppm"]),
    )


def _policy_to_record(scid: int, direction: int, pol: ChannelPolicy) -> dict:
    return {
        "t": "policy",
        "scid": scid,
        "dir": direction,
        "ts": pol.timestamp,
        "disabled": pol.disabled,
        "cltv": pol.cltv_expiry_delta,
        "htlc_min": pol.htlc_minimum_msat,
        "htlc_max": pol.htlc_maximum_msat,
        "fee_base": pol.fee_base_msat,
        "fee_ppm": pol.fee_proportional_millionths,
    }


def load_snapshot(path: str) -> NetworkSnapshot:
    """Parse a JSON Lines snapshot; raises SnapshotError naming the bad line."""
    node_labels: List[Optional[str]] = []
    channels: List[Tuple[int, int, int]] = []
    policies: Dict[Tuple[int, int], ChannelPolicy] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                kind = rec["t"]
                if kind == "node":
                    node_labels.append(rec.get("label"))
                elif kind == "chan":
                    channels.append((int(rec["scid"]), int(rec["a"]), int(rec["b"])))
                elif kind == "policy":
                    key = (int(rec["scid"]), int(rec["dir"]))
                    policies[key] = _policy_from_record(rec)
                else:
                    raise SnapshotError(f"unknown record kind {kind!r}")
            except SnapshotError:
                raise
            except (KeyError, ValueError, TypeError) as exc:
                raise SnapshotError(f"{path}:{lineno}: malformed record: {exc}") from exc
    snap = NetworkSnapshot(node_labels=node_labels, channels=channels, policies=policies)
    snap.validate()
    return snap


def save_snapshot(snap: NetworkSnapshot, path: str) -> None:
    """Canonical serialization: nodes, channels in order, policies in (channel, dir) order."""
    with open(path, "w", encoding="utf-8") as fh:
        for label in snap.node_labels:
            rec = {"t": "node"} if label is None else {"t": "node", "label": label}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        for scid, a, b in snap.channels:
            fh.write(json.dumps({"t": "chan", "scid": scid, "a": a, "b": b}, sort_keys=True) + "\n")
        for scid, _a, _b in snap.channels:
            for direction in (0, 1):
                pol = snap.policies.get((scid, direction))
                if pol is not None:
                    fh.write(json.dumps(_policy_to_record(scid, direction, pol), sort_keys=True) + "\n")


def apply_update(
    view: Dict[Tuple[int, int], ChannelPolicy],
    scid: int,
    direction: int,
    policy: ChannelPolicy,
    known_scids: Optional[set] = None,
    counters: Optional[dict] = None,
) -> bool:
    """Apply a channel update to a policy view if strictly newer.

    Returns True when the stored policy was replaced. Updates for channels not
    in `known_scids` are tolerated and counted, matching real gossip behavior.
    """
    if known_scids is not None and scid not in known_scids:
        if counters is not None:
            counters["unknown_channel"] = counters.get("unknown_channel", 0) + 1
        return False
    cur = view.get((scid, direction))
    if cur is not None and policy.timestamp <= cur.timestamp:
        return False
    view[(scid, direction)] = policy
    return True


@dataclass
class GossipOverlay:
    """Who syncs from whom.

    `syncers[u]` is the ordered list of peers u receives relayed gossip from;
    `subscribers[u]` is the exact inverse (peers that receive relays from u).
    """

    syncers: List[List[int]]
    subscribers: List[List[int]]
    rotation_interval: float
    peer_source: str = "channels"  # "channels" | "uniform"

    def check_inverse_consistency(self) -> bool:
        n = len(self.syncers)
        fwd = {(v, u) for v in range(n) for u in self.syncers[v]}
        inv = {(v, u) for u in range(n) for v in self.subscribers[u]}
        return fwd == inv


def build_overlay(
    snapshot: NetworkSnapshot,
    k: int,
    rotation_interval: float,
    rng: np.random.Generator,
    peer_source: str = "channels",
) -> GossipOverlay:
    """Each node picks min(k, candidates) distinct peers uniformly at random.

    With peer_source="channels" candidates are channel neighbors (isolated
    nodes get empty syncer lists); with "uniform" candidates are all other
    nodes, which models connectivity experiments where gossip links are not
    tied to channels.
    """
    if k < 1:
        raise ValueError("syncer count k must be >= 1")
    n = snapshot.n_nodes
    syncers: List[List[int]] = []
    if peer_source == "channels":
        nbrs = snapshot.neighbors()
        for u in range(n):
            cand = nbrs[u]
            take = min(k, len(cand))
            if take == 0:
                syncers.append([])
            else:
                picks = rng.choice(len(cand), size=take, replace=False)
                syncers.append([cand[i] for i in sorted(picks.tolist())])
    elif peer_source == "uniform":
        for u in range(n):
            take = min(k, n - 1)
            if take <= 0:
                syncers.append([])
                continue
            # Draw from [0, n-2] and shift past self to avoid rejection loops.
            picks = rng.choice(n - 1, size=take, replace=False)
            syncers.append(sorted(p if p < u else p + 1 for p in picks.tolist()))
    else:
        raise ValueError(f"unknown peer_source {peer_source!r}")

    subscribers: List[List[int]] = [[] for _ in range(n)]
    for v in range(n):
        for u in syncers[v]:
            subscribers[u].append(v)
    return GossipOverlay(
        syncers=syncers,
        subscribers=subscribers,
        rotation_interval=rotation_interval,
        peer_source=peer_source,
    )


__all__ = [
    "SnapshotError",
    "ChannelPolicy",
    "NetworkSnapshot",
    "load_snapshot",
    "save_snapshot",
    "apply_update",
    "GossipOverlay",
    "build_overlay",
]
