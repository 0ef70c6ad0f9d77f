"""Shared fixtures: small topologies and the acceptance-scale preset matrix.

The acceptance runs share one synthetic workload (1,000 nodes, attach_m=4,
2,000 messages over 1,200 s, 10,000 payments, seed 42) and are executed once
per session through whichever core is active (the compiled kernel when
built).
"""

import pytest

from lngossip.engine import SimConfig, run_simulation
from lngossip.topology import ChannelPolicy, NetworkSnapshot

ACCEPT_SEED = 42
ACCEPT_NODES = 1000
ACCEPT_M = 4
ACCEPT_MSGS = 2000
ACCEPT_DURATION = 1200.0
ACCEPT_PAYMENTS = 10000

ACCEPT_PRESETS = [
    "lnd",
    "lnd-t1s",
    "lnd-sb100",
    "lnd-inv",
    "c-lightning",
    "spanning",
    "flooding-4",
    "flooding-8",
    "flooding-32",
    "minisketch-4",
    "minisketch-8",
    "minisketch-32",
]


def accept_config(preset: str, **overrides) -> SimConfig:
    kw = dict(
        protocol=preset,
        seed=ACCEPT_SEED,
        duration=ACCEPT_DURATION,
        synth_nodes=ACCEPT_NODES,
        synth_m=ACCEPT_M,
        synth_messages=ACCEPT_MSGS,
        payments=ACCEPT_PAYMENTS,
    )
    kw.update(overrides)
    return SimConfig(**kw)


@pytest.fixture(scope="session")
def matrix():
    """Reports (and raw results) for every acceptance preset on one workload."""
    out = {}
    for preset in ACCEPT_PRESETS:
        out[preset] = run_simulation(accept_config(preset))
    return out


def policy(ts=1000, disabled=False, cltv=40, hmin=1000, hmax=None, base=1000, ppm=100):
    return ChannelPolicy(
        timestamp=ts,
        disabled=disabled,
        cltv_expiry_delta=cltv,
        htlc_minimum_msat=hmin,
        htlc_maximum_msat=hmax,
        fee_base_msat=base,
        fee_proportional_millionths=ppm,
    )


def tiny_snapshot(channels, n_nodes, policies=None):
    """Snapshot from (scid, a, b) triples; both directions get a default
    policy unless `policies` overrides it."""
    pol = {}
    for scid, _a, _b in channels:
        for d in (0, 1):
            pol[(scid, d)] = policy()
    if policies:
        pol.update(policies)
    snap = NetworkSnapshot(
        node_labels=[None] * n_nodes, channels=list(channels), policies=pol
    )
    snap.validate()
    return snap
