import numpy as np
import pytest

from lngossip.payments import (
    PaymentAttempt,
    PaymentStatus,
    attempt_payment,
    edge_fee,
    enumerate_min_fee,
    find_route,
)
from tests.conftest import policy


class TestEdgeFee:
    def test_proportional(self):
        assert edge_fee(policy(base=1000, ppm=100), 1_000_000) == 1100

    def test_zero(self):
        assert edge_fee(policy(base=0, ppm=0), 12345) == 0

    def test_floor(self):
        assert edge_fee(policy(base=1, ppm=1_000_000), 5) == 6

    def test_negative_amount(self):
        with pytest.raises(ValueError):
            edge_fee(policy(), -1)


def view_for(channels, fees):
    """fees: {(scid, dir): kwargs} -> policy view."""
    view = {}
    for scid, _a, _b in channels:
        for d in (0, 1):
            view[(scid, d)] = policy(**fees.get((scid, d), {}))
    return view


class TestFindRoute:
    def test_cheaper_parallel_route(self):
        chans = [(1, 0, 1), (2, 0, 1)]
        view = view_for(chans, {(1, 0): dict(base=10, ppm=0), (2, 0): dict(base=20, ppm=0)})
        route = find_route(2, chans, view, 0, 1, 1000)
        assert route.edges == ((1, 0),)
        assert route.total_fee_msat == 10

    def test_disabled_edge_no_route(self):
        chans = [(1, 0, 1)]
        view = view_for(chans, {(1, 0): dict(disabled=True)})
        assert find_route(2, chans, view, 0, 1, 1000) is None

    def test_two_hop_beats_expensive_direct(self):
        chans = [(1, 0, 2), (2, 0, 1), (3, 1, 2)]
        view = view_for(chans, {
            (1, 0): dict(base=1000, ppm=0),
            (2, 0): dict(base=100, ppm=0),
            (3, 0): dict(base=100, ppm=0),
        })
        route = find_route(3, chans, view, 0, 2, 1000)
        assert route.edges == ((2, 0), (3, 0))
        assert route.total_fee_msat == 200

    def test_htlc_bounds_filter(self):
        chans = [(1, 0, 1)]
        view = view_for(chans, {(1, 0): dict(hmin=5000)})
        assert find_route(2, chans, view, 0, 1, 1000) is None
        view = view_for(chans, {(1, 0): dict(hmax=500)})
        assert find_route(2, chans, view, 0, 1, 1000) is None
        view = view_for(chans, {(1, 0): dict(hmax=1000)})
        assert find_route(2, chans, view, 0, 1, 1000) is not None

    def test_unannounced_direction_not_routable(self):
        chans = [(1, 0, 1)]
        view = {(1, 1): policy()}  # only the reverse direction announced
        assert find_route(2, chans, view, 0, 1, 1000) is None

    def test_fewer_hops_tie_break(self):
        # two zero-fee paths: direct and via node 1
        chans = [(1, 0, 2), (2, 0, 1), (3, 1, 2)]
        view = view_for(chans, {
            (1, 0): dict(base=0, ppm=0),
            (2, 0): dict(base=0, ppm=0),
            (3, 0): dict(base=0, ppm=0),
        })
        route = find_route(3, chans, view, 0, 2, 1000)
        assert route.edges == ((1, 0),)

    def test_src_equals_dst_rejected(self):
        with pytest.raises(ValueError):
            find_route(2, [(1, 0, 1)], {}, 0, 0, 1000)


class TestJudgeRoute:
    def setup_method(self):
        self.chans = [(1, 0, 1), (2, 1, 2)]
        self.view = view_for(self.chans, {})

    def test_converged_success(self):
        outcome = attempt_payment(
            3, self.chans, self.view, dict(self.view),
            PaymentAttempt(0.0, 0, 2, 1000),
        )
        assert outcome.status == PaymentStatus.SUCCESS
        assert not outcome.unconverged

    def test_stale_disabled_edge(self):
        truth = dict(self.view)
        truth[(2, 0)] = policy(ts=5000, disabled=True)
        outcome = attempt_payment(
            3, self.chans, self.view, truth, PaymentAttempt(0.0, 0, 2, 1000)
        )
        assert outcome.status == PaymentStatus.STALE_FAILURE
        assert outcome.unconverged

    def test_fee_raise_is_stale_failure(self):
        truth = dict(self.view)
        truth[(1, 0)] = policy(ts=5000, base=9999)
        outcome = attempt_payment(
            3, self.chans, self.view, truth, PaymentAttempt(0.0, 0, 2, 1000)
        )
        assert outcome.status == PaymentStatus.STALE_FAILURE
        assert outcome.unconverged

    def test_fee_drop_is_opportunity_cost(self):
        truth = dict(self.view)
        truth[(1, 0)] = policy(ts=5000, base=1)
        outcome = attempt_payment(
            3, self.chans, self.view, truth, PaymentAttempt(0.0, 0, 2, 1000)
        )
        assert outcome.status == PaymentStatus.SUCCESS
        assert outcome.unconverged

    def test_cltv_raise_is_stale_failure(self):
        truth = dict(self.view)
        truth[(2, 0)] = policy(ts=5000, cltv=100)
        outcome = attempt_payment(
            3, self.chans, self.view, truth, PaymentAttempt(0.0, 0, 2, 1000)
        )
        assert outcome.status == PaymentStatus.STALE_FAILURE

    def test_no_route(self):
        view = view_for(self.chans, {(1, 0): dict(disabled=True)})
        outcome = attempt_payment(
            3, self.chans, view, view, PaymentAttempt(0.0, 0, 2, 1000)
        )
        assert outcome.status == PaymentStatus.NO_ROUTE
        assert outcome.route == ()

    def test_unconverged_false_when_timestamps_match(self):
        outcome = attempt_payment(
            3, self.chans, self.view, dict(self.view), PaymentAttempt(0.0, 0, 2, 1000)
        )
        assert not outcome.unconverged


def random_graph(rng):
    n = int(rng.integers(3, 11))
    chans = []
    scid = 1
    # random spanning chain plus extra edges
    for i in range(1, n):
        chans.append((scid, int(rng.integers(0, i)), i))
        scid += 1
    for _ in range(int(rng.integers(0, n * 2))):
        a, b = int(rng.integers(0, n)), int(rng.integers(0, n))
        if a != b:
            chans.append((scid, a, b))
            scid += 1
    view = {}
    for s, _a, _b in chans:
        for d in (0, 1):
            view[(s, d)] = policy(
                disabled=bool(rng.random() < 0.1),
                base=int(rng.integers(0, 2000)),
                ppm=int(rng.integers(0, 1000)),
                hmin=int(rng.integers(0, 1500)),
            )
    return n, chans, view


def test_route_fee_matches_exhaustive_enumeration():
    rng = np.random.default_rng(12345)
    checked = 0
    for _ in range(500):
        n, chans, view = random_graph(rng)
        src = int(rng.integers(0, n))
        dst = int(rng.integers(0, n - 1))
        if dst >= src:
            dst += 1
        amount = 1000
        route = find_route(n, chans, view, src, dst, amount)
        best = enumerate_min_fee(n, chans, view, src, dst, amount)
        if route is None:
            assert best is None
        else:
            assert best is not None
            assert route.total_fee_msat == best
            checked += 1
    assert checked > 300


class TestPaymentSchedule:
    def test_roundtrip_and_replay(self, tmp_path):
        from lngossip.engine import SimConfig, run_simulation
        from lngossip.payments import load_payment_schedule, save_payment_schedule
        from tests.conftest import tiny_snapshot

        attempts = [
            PaymentAttempt(time=5.0, source=0, destination=2, amount_msat=1000),
            PaymentAttempt(time=1.0, source=2, destination=0, amount_msat=1000),
        ]
        path = str(tmp_path / "pay.jsonl")
        save_payment_schedule(attempts, path)
        back = load_payment_schedule(path)
        assert [a.time for a in back] == [1.0, 5.0]  # time-sorted

        snap = tiny_snapshot([(1, 0, 1), (2, 1, 2)], 3)
        cfg = SimConfig(protocol="flooding-4", seed=1, duration=30.0, snapshot=snap,
                        trace=[], payment_schedule_path=path)
        r = run_simulation(cfg).report
        assert r.payments_total == 2
        assert r.payments_success == 2

    def test_malformed_schedule(self, tmp_path):
        from lngossip.payments import PaymentScheduleError, load_payment_schedule

        p = tmp_path / "bad.jsonl"
        p.write_text('{"t": 1.0, "src": 0}\n')
        with pytest.raises(PaymentScheduleError, match="bad.jsonl:1"):
            load_payment_schedule(str(p))

    def test_out_of_range_endpoint_rejected(self, tmp_path):
        from lngossip.engine import ConfigError, SimConfig, run_simulation
        from lngossip.payments import save_payment_schedule
        from tests.conftest import tiny_snapshot

        path = str(tmp_path / "pay.jsonl")
        save_payment_schedule([PaymentAttempt(1.0, 0, 99, 1000)], path)
        snap = tiny_snapshot([(1, 0, 1)], 2)
        cfg = SimConfig(protocol="flooding-4", seed=1, duration=10.0, snapshot=snap,
                        trace=[], payment_schedule_path=path)
        with pytest.raises(ConfigError):
            run_simulation(cfg)
