import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sketchlab.cardinality import BernoulliCardSketch
from sketchlab.rng import NoiseMode, RandomSource
from sketchlab.stream import SUM, Delete, ExactTracker, Inc, Insert, KeyRange, ResetKey, ResetPred
from sketchlab.sums import (PrefixMaxSum, ResettableSumSketch, RobustSumFixed, ThresholdSumSketch,
                            sum_params)


class FixedDraws(RandomSource):
    """Random source whose exponential draws are scripted."""

    def __init__(self, draws):
        super().__init__(0, NoiseMode.ZERO)
        self.draws = list(draws)

    def exponential(self, rate):
        return self.draws.pop(0)


def test_large_increment_enters():
    sk = ResettableSumSketch(1.0, RandomSource(0))
    est = sk.process(Inc(1, 1e9))
    c = sk.sample[1]
    assert 0 <= c < 1e9
    assert est == 1e9 - (1e9 - c) + 1.0


def test_reset_removes_contribution():
    sk = ResettableSumSketch(1.0, FixedDraws([0.25, 0.5]))
    sk.process(Inc(1, 3.0))
    before = sk.process(Inc(2, 2.0))
    assert sk.sample == {1: 2.75, 2: 1.5}
    after = sk.process(ResetKey(1))
    assert before - after == 1.0 + 2.75
    assert sk.process(ResetPred(KeyRange(0, 5))) == 0.0


def test_zero_increment_is_noop():
    sk = ResettableSumSketch(1.0, FixedDraws([]))
    assert sk.process(Inc(1, 0.0)) == 0.0


def test_insert_delete_are_reset_and_unit_increment():
    sk = ResettableSumSketch(2.0, FixedDraws([0.5, 0.1]))
    assert sk.process(Insert(4)) == 2.0 + 0.5
    assert sk.process(Insert(4)) == 2.0 + 0.9
    assert sk.process(Delete(4)) == 0.0


ops_strategy = st.lists(st.one_of(
    st.builds(Inc, st.integers(0, 9), st.floats(0, 20, allow_nan=False)),
    st.builds(ResetKey, st.integers(0, 9)),
    st.builds(Insert, st.integers(0, 9)),
    st.builds(lambda a: ResetPred(KeyRange(a, a + 3)), st.integers(0, 9)),
), max_size=80)


@given(ops_strategy, st.integers(0, 2**32), st.floats(0.1, 5))
def test_estimate_is_sum_over_sample(ops, seed, tau):
    sk = ResettableSumSketch(tau, RandomSource(seed))
    for op in ops:
        est = sk.process(op)
        assert all(c >= 0 for c in sk.sample.values())
        assert est == math.fsum(tau + c for c in sk.sample.values())


def test_unbiased_single_key():
    vals = []
    for seed in range(20000):
        sk = ResettableSumSketch(1.0, RandomSource(seed))
        sk.process(Inc(1, 1.0))
        vals.append(sk.process(Inc(1, 2.0)))
    vals = np.array(vals)
    # variance tau^2 (1 - exp(-3)) from quadrature of the entry-threshold density
    assert abs(vals.mean() - 3.0) < 4 * math.sqrt(0.9502129316321373 / len(vals))


def five_key_stream(rng):
    ops = []
    for _ in range(12):
        key = int(rng.integers(0, 5))
        if rng.random() < 0.2:
            ops.append(ResetKey(key))
        else:
            ops.append(Inc(key, float(rng.uniform(0.1, 2.0))))
    return ops


def test_threshold_view_has_same_distribution():
    ops = five_key_stream(np.random.default_rng(3))
    op_run, th_run = [], []
    for seed in range(10**5):
        sk = ResettableSumSketch(1.0, RandomSource(seed))
        for op in ops:
            est = sk.process(op)
        op_run.append(est)
        tv = ThresholdSumSketch(1.0, RandomSource(seed + 10**6))
        for op in ops:
            est = tv.process(op)
        th_run.append(est)
    assert stats.ks_2samp(op_run, th_run).pvalue > 0.01


def test_threshold_view_conditional_stability():
    rng = np.random.default_rng(1)
    B = 1.0 * math.log(100 / 0.1)
    checked = 0
    for seed in range(2000):
        tv = ThresholdSumSketch(1.0, RandomSource(seed))
        for _ in range(30):
            tv.process(Inc(int(rng.integers(0, 5)), float(rng.uniform(0, 3))))
        if all(r <= B for r in tv.thresholds.values()):
            checked += 1
            sampled = tv.sampled()
            for key, v in tv.values.items():
                if v > B:
                    assert key in sampled
    assert checked > 1900


def test_cardinality_encoding_matches_bernoulli():
    p = 0.3
    tau = -1.0 / math.log(1 - p)
    ops = [Insert(k) for k in range(6)] + [Delete(2), Insert(2), Insert(4)]
    sums, bern = [], []
    for seed in range(20000):
        sk = ResettableSumSketch(tau, RandomSource(seed))
        for op in ops:
            sk.process(op)
        sums.append(len(sk.sample))
        bc = BernoulliCardSketch(p, RandomSource(seed + 10**6))
        for op in ops:
            bc.process(op)
        bern.append(bc.sample_size)
    assert stats.ks_2samp(sums, bern).pvalue > 0.01
    assert abs(np.mean(sums) - 6 * p) < 0.03


def test_robust_split_example():
    B = math.log(100 / 0.1)
    sk = RobustSumFixed(1.0, B, 1.0, 100, FixedDraws([0.5]))
    est = sk.process(Inc(1, 10.0))
    assert sk.p_hat == pytest.approx(6.907755278982137)
    assert sk.d_hat == pytest.approx(3.592244721017863)
    assert est == pytest.approx(10.5)


@settings(max_examples=60, deadline=None)
@given(ops_strategy, st.integers(0, 2**32))
def test_robust_zero_noise_matches_inner(ops, seed):
    sk = RobustSumFixed(1.0, 1.5, 1.0, max(len(ops), 1), RandomSource(seed, NoiseMode.ZERO),
                        record_units=True)
    plain = ResettableSumSketch(1.0, RandomSource(seed))
    for op in ops:
        est = sk.process(op)
        ref = plain.process(op)
        assert est == pytest.approx(ref, rel=1e-9, abs=1e-9)
        assert sk.p_hat + sk.d_hat == pytest.approx(sk.inner.estimate(), rel=1e-12, abs=1e-12)
        assert all(0 <= min(sk.B, 1.0 + c) <= sk.B for c in sk.inner.sample.values())
    assert all(m <= 2 + 1e-12 for m in sk.unit_mass.values())


def test_unit_increments_keep_unit_mass_at_most_two():
    rng = np.random.default_rng(8)
    sk = RobustSumFixed(0.5, 2.0, 1.0, 2000, RandomSource(0, NoiseMode.ZERO), record_units=True)
    for _ in range(2000):
        key = int(rng.integers(0, 40))
        sk.process(ResetKey(key) if rng.random() < 0.1 else Inc(key, 1.0))
    assert max(sk.unit_mass.values()) <= 2.0
    assert max(sk.unit_mass.values()) > 1.5


def test_sum_params_examples():
    taus, clips, eps_dp = sum_params(1.0, math.exp(-1), 2, 2)
    assert taus == [2.0] and eps_dp == 1.0
    taus, clips, _ = sum_params(0.3, 0.05, 1000, 2**10)
    assert len(taus) == 10
    assert all(b / a == pytest.approx(2) for a, b in zip(taus, taus[1:]))
    assert all(B / t == pytest.approx(math.log(1000 / 0.05)) for t, B in zip(taus, clips))
    with pytest.raises(ValueError):
        sum_params(0.3, 1.5, 1000, 10)


def test_prefixmax_empty_and_before_activation():
    sk = PrefixMaxSum(0.5, 0.1, 100, 2**6, RandomSource(0, NoiseMode.ZERO))
    assert sk.estimate() == 0.0
    assert sk.process(Inc(1, 0.5)) == 0.0 and sk.active == 0


def check_window(sk, ops, eps):
    tracker = ExactTracker([SUM])
    last = 0
    for op in ops:
        sk.process(op)
        tracker.apply(op)
        peak, c = tracker.prefix_max[SUM], sk.active
        assert (1 - 4 * eps) * 2**c <= peak <= (1 + 4 * eps) * 2 ** (c + 1)
        assert c >= last
        assert all(inst is None for inst in sk.instances[:max(c - 1, 0)])
        last = c


def test_prefixmax_ramp_window():
    ops = [Inc(k, 1.0) for k in range(2**10)]
    sk = PrefixMaxSum(0.5, 0.1, len(ops), 2**10, RandomSource(1, NoiseMode.ZERO))
    check_window(sk, ops, 0.5)
    assert sk.active >= 9


def test_prefixmax_oscillation_never_lowers_index():
    ops = [Inc(k, 1.0) for k in range(2**9)] + [ResetPred(KeyRange(0, 2**9))]
    ops += [Inc(k, 1.0) for k in range(2**9)]
    sk = PrefixMaxSum(0.5, 0.1, len(ops), 2**10, RandomSource(2, NoiseMode.ZERO))
    check_window(sk, ops, 0.5)
    assert sk.active >= 8
