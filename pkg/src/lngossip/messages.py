"""Gossip message model: kinds, wire sizes, dedup keys, supersession.

Messages are immutable values. Wire sizes are fixed per kind (the channel
update size is the one that matters for bandwidth totals; announcement sizes
are representative constants kept configurable through `WireSizes`).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Tuple, Union

from .topology import ChannelPolicy


class MsgKind(IntEnum):
    CHANNEL_UPDATE = 0
    NODE_ANNOUNCEMENT = 1
    CHANNEL_ANNOUNCEMENT = 2


@dataclass(frozen=True)
class WireSizes:
    """Per-kind message sizes in bytes, plus the short inventory-entry size."""

    channel_update: int = 128
    node_announcement: int = 140
    channel_announcement: int = 430
    inventory_entry: int = 8

    def for_kind(self, kind: MsgKind) -> int:
        if kind == MsgKind.CHANNEL_UPDATE:
            return self.channel_update
        if kind == MsgKind.NODE_ANNOUNCEMENT:
            return self.node_announcement
        return self.channel_announcement


DEFAULT_WIRE_SIZES = WireSizes()


@dataclass(frozen=True)
class ChannelUpdate:
    scid: int
    direction: int  # 0 = policy for a->b, 1 = policy for b->a
    policy: ChannelPolicy


@dataclass(frozen=True)
class NodeAnnouncement:
    node: int
    timestamp: int


@dataclass(frozen=True)
class ChannelAnnouncement:
    scid: int
    endpoint_a: int
    endpoint_b: int


Payload = Union[ChannelUpdate, NodeAnnouncement, ChannelAnnouncement]


@dataclass(frozen=True)
class GossipMessage:
    kind: MsgKind
    msg_id: int
    origin: int
    created_at: float  # simulation seconds
    payload: Payload

    @property
    def timestamp(self) -> int:
        """The timestamp used for dedup/supersession within a dedup class."""
        if isinstance(self.payload, ChannelUpdate):
            return self.payload.policy.timestamp
        if isinstance(self.payload, NodeAnnouncement):
            return self.payload.timestamp
        # Channel announcements carry no timestamp; a channel is announced once.
        return 0


def wire_size(msg: GossipMessage, sizes: WireSizes = DEFAULT_WIRE_SIZES) -> int:
    return sizes.for_kind(msg.kind)


def dedup_key(msg: GossipMessage) -> Tuple:
    """Key under which competing messages are deduplicated in broadcast queues.

    Channel updates compete per directed edge, node announcements per node,
    channel announcements per channel.
    """
    p = msg.payload
    if isinstance(p, ChannelUpdate):
        return ("upd", p.scid, p.direction)
    if isinstance(p, NodeAnnouncement):
        return ("node", p.node)
    return ("chan", p.scid)


def supersedes(a: GossipMessage, b: GossipMessage) -> bool:
    """True iff `a` replaces `b` in a broadcast queue (strictly newer timestamp).

    Equal timestamps never supersede: the incumbent entry wins, so queues do
    not churn on duplicates.
    """
    if dedup_key(a) != dedup_key(b):
        raise ValueError(f"dedup key mismatch: {dedup_key(a)!r} vs {dedup_key(b)!r}")
    return a.timestamp > b.timestamp


def make_update(
    msg_id: int,
    origin: int,
    created_at: float,
    scid: int,
    direction: int,
    policy: ChannelPolicy,
) -> GossipMessage:
    return GossipMessage(
        kind=MsgKind.CHANNEL_UPDATE,
        msg_id=msg_id,
        origin=origin,
        created_at=created_at,
        payload=ChannelUpdate(scid=scid, direction=direction, policy=policy),
    )


def make_node_announcement(
    msg_id: int, origin: int, created_at: float, node: int, timestamp: int
) -> GossipMessage:
    return GossipMessage(
        kind=MsgKind.NODE_ANNOUNCEMENT,
        msg_id=msg_id,
        origin=origin,
        created_at=created_at,
        payload=NodeAnnouncement(node=node, timestamp=timestamp),
    )


def make_channel_announcement(
    msg_id: int, origin: int, created_at: float, scid: int, a: int, b: int
) -> GossipMessage:
    return GossipMessage(
        kind=MsgKind.CHANNEL_ANNOUNCEMENT,
        msg_id=msg_id,
        origin=origin,
        created_at=created_at,
        payload=ChannelAnnouncement(scid=scid, endpoint_a=a, endpoint_b=b),
    )


__all__ = [
    "MsgKind",
    "WireSizes",
    "DEFAULT_WIRE_SIZES",
    "ChannelUpdate",
    "NodeAnnouncement",
    "ChannelAnnouncement",
    "GossipMessage",
    "wire_size",
    "dedup_key",
    "supersedes",
    "make_update",
    "make_node_announcement",
    "make_channel_announcement",
]
