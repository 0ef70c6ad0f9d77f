"""The compiled kernel and the pure-Python core must be interchangeable:
identical SimPlan in, bit-identical RawResult/report out."""

import pytest

from lngossip import core as core_mod
from lngossip.engine import SimConfig, run_simulation
from lngossip.protocols import get_preset


def have_kernel() -> bool:
    try:
        core_mod.get_core("kernel")
        return True
    except ImportError:
        return False


requires_kernel = pytest.mark.skipif(not have_kernel(), reason="compiled kernel not built")


def run_with(core_name, proto, seed=3, **kw):
    cfg = SimConfig(
        protocol=proto,
        seed=seed,
        duration=kw.pop("duration", 240.0),
        synth_nodes=kw.pop("nodes", 70),
        synth_m=3,
        synth_messages=kw.pop("messages", 120),
        payments=kw.pop("payments", 60),
        **kw,
    )
    return run_simulation(cfg, core=core_mod.get_core(core_name)).report.to_json()


@requires_kernel
@pytest.mark.parametrize(
    "proto",
    [
        "lnd",
        "lnd-t1s",
        "lnd-sb100",
        "lnd-inv",
        "c-lightning",
        "c-lightning-inv",
        "spanning",
        "flooding-4",
        "flooding-16",
        "minisketch-4",
        "minisketch-8",
    ],
)
def test_cores_agree(proto):
    assert run_with("kernel", proto) == run_with("python", proto)


@requires_kernel
def test_cores_agree_with_keepalives():
    spec = get_preset("lnd", keepalive_staleness=86_400.0, keepalive_check_interval=45.0)
    kw = dict(duration=200.0, nodes=40, messages=30, payments=20,
              keepalive_enabled=True, keepalive_capacity=4000)
    a = run_with("kernel", spec, **dict(kw))
    b = run_with("python", spec, **dict(kw))
    assert a == b


@requires_kernel
def test_cores_agree_across_seeds():
    for seed in (1, 17, 999):
        assert run_with("kernel", "lnd", seed=seed) == run_with("python", "lnd", seed=seed)


def test_active_impl_reports_name():
    assert core_mod.ACTIVE_IMPL in ("kernel", "python")
