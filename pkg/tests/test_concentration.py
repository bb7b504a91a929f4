import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tokenbound.concentration import (
    ConcentrationResult,
    DeviationSequence,
    GridK,
    azuma_baseline,
    default_grid,
    freedman_bound_appendix,
    freedman_bound_maintext,
    hoeffding_subsample_correction,
    sigma_grid,
    v_func,
)


class TestVFunc:
    def test_zero(self):
        assert v_func(0.0) == 0.0

    def test_one(self):
        assert v_func(1.0) == pytest.approx(1.0 - math.log(2.0), abs=1e-12)

    def test_minus_half(self):
        assert v_func(-0.5) == pytest.approx(-0.5 - math.log(0.5), abs=1e-12)
        assert v_func(-0.5) == pytest.approx(0.193147, abs=1e-6)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            v_func(-1.0)
        with pytest.raises(ValueError):
            v_func(-1.5)

    @given(st.floats(min_value=-0.999, max_value=10.0))
    def test_nonneg_and_quadratic_bound(self, a):
        val = v_func(a)
        assert val >= 0.0
        # Lemma-style envelope v(a) <= a^2 / (1 + a).
        assert val <= a * a / (1.0 + a) + 1e-12


class TestSequencesAndGrids:
    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            DeviationSequence(np.zeros(3), np.zeros(4))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            DeviationSequence(np.array([0.0, np.nan]), np.zeros(2))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            DeviationSequence(np.array([]), np.array([]))

    def test_grid_bounds(self):
        with pytest.raises(ValueError):
            GridK(np.array([0.0, 0.5]))
        with pytest.raises(ValueError):
            GridK(np.array([0.5, 1.0]))
        with pytest.raises(ValueError):
            GridK(np.array([0.5, 0.5]))

    def test_default_grid_shape(self):
        g = default_grid()
        assert g.size == 1000
        assert 0.0 < g.points[0] and g.points[-1] < 1.0
        # equally spaced interior points of [0, 1]
        assert np.allclose(np.diff(g.points), 1.0 / 1001)


class TestSigmaGrid:
    def test_zero_deviation_single_point(self):
        zeros = np.zeros(10)
        seq = DeviationSequence(zeros, zeros)
        res = sigma_grid(seq, 1.0, 0.01, GridK(np.array([0.5])))
        assert res.sigma == pytest.approx(0.1, abs=1e-15)
        assert res.argmin_s == 0.5

    def test_zero_deviation_two_points(self):
        zeros = np.zeros(10)
        seq = DeviationSequence(zeros, zeros)
        res = sigma_grid(seq, 1.0, 0.01, GridK(np.array([0.5, 0.9])))
        assert res.sigma == pytest.approx(0.1 * (0.1 / 0.9), rel=1e-12)
        assert res.sigma == pytest.approx(0.011111, abs=1e-6)
        assert res.argmin_s == 0.9

    def test_rms_comparator_reported(self):
        rng = np.random.default_rng(0)
        x = rng.random(1000)
        y = np.clip(x + rng.uniform(-0.5, 0.5, 1000), 0, None)
        seq = DeviationSequence(x, y)
        res = sigma_grid(seq, 2.0, 0.01, default_grid(100))
        assert res.rms_upper == pytest.approx(
            2.0 * math.sqrt(np.mean((x - y) ** 2)), rel=1e-12
        )
        # typical draws sit well below the closed-form comparator
        assert res.sigma < res.rms_upper

    def test_monotone_in_grid_superset(self):
        rng = np.random.default_rng(1)
        x = rng.random(200)
        y = rng.random(200)
        seq = DeviationSequence(x, y)
        small = sigma_grid(seq, 2.0, 0.05, default_grid(10)).sigma
        large = sigma_grid(seq, 2.0, 0.05, default_grid(100)).sigma
        # not a strict superset, so compare against an explicit union
        pts = np.union1d(default_grid(10).points, default_grid(100).points)
        union = sigma_grid(seq, 2.0, 0.05, GridK(pts)).sigma
        assert union <= small + 1e-15
        assert union <= large + 1e-15

    def test_precondition_names_index(self):
        x = np.array([0.0, 5.0, 0.0])
        y = np.array([0.0, 0.0, 0.0])
        seq = DeviationSequence(x, y)
        with pytest.raises(ValueError, match="index 1"):
            sigma_grid(seq, 2.0, 0.01, default_grid(10))

    def test_boundary_never_clamped(self):
        # A_k exactly -1 is an error, not a clamp
        seq = DeviationSequence(np.array([1.0]), np.array([0.0]))
        with pytest.raises(ValueError, match="exceed -1"):
            sigma_grid(seq, 1.0, 0.01, default_grid(10))


class TestFreedmanMaintext:
    def test_hand_example(self):
        zeros = np.zeros(100)
        seq = DeviationSequence(zeros, zeros)
        res = freedman_bound_maintext(
            seq, 1.0, GridK(np.array([0.5])), math.exp(-1.0)
        )
        assert res.complexity_c == pytest.approx(0.01, rel=1e-12)
        assert res.sigma == pytest.approx(0.1, rel=1e-12)
        assert res.bound == pytest.approx(0.02, rel=1e-12)

    def test_recompute_invariant(self):
        rng = np.random.default_rng(2)
        x = rng.random(500)
        y = rng.random(500)
        res = freedman_bound_maintext(
            DeviationSequence(x, y), 3.0, default_grid(50), 0.05
        )
        assert res.bound == pytest.approx(res.recompute_bound(), rel=1e-14)
        assert res.argmin_s in default_grid(50).points

    def test_affine_shift_invariance(self):
        rng = np.random.default_rng(3)
        x = rng.random(300)
        y = rng.random(300)
        grid = default_grid(30)
        a = freedman_bound_maintext(DeviationSequence(x, y), 2.0, grid, 0.05)
        b = freedman_bound_maintext(DeviationSequence(x + 5, y + 5), 2.0, grid, 0.05)
        assert a.bound == pytest.approx(b.bound, rel=1e-12)
        assert a.argmin_s == b.argmin_s

    def test_vanishes_with_n(self):
        grid = default_grid(10)
        prev = math.inf
        for n in (10, 1000, 100000):
            zeros = np.zeros(n)
            bound = freedman_bound_maintext(
                DeviationSequence(zeros, zeros), 1.0, grid, 0.05
            ).bound
            assert bound < prev
            prev = bound
        assert prev < 1e-3

    def test_code_nats_increases_bound(self):
        zeros = np.zeros(100)
        seq = DeviationSequence(zeros, zeros)
        grid = default_grid(10)
        b0 = freedman_bound_maintext(seq, 1.0, grid, 0.05).bound
        b1 = freedman_bound_maintext(seq, 1.0, grid, 0.05, code_nats=10.0).bound
        assert b1 > b0


class TestFreedmanAppendix:
    def test_hand_example(self):
        n = 10**4
        zeros = np.zeros(n)
        res = freedman_bound_appendix(DeviationSequence(zeros, zeros), 1.0, 0.05)
        expected_c = (
            math.log(20.0) + 4.0 * math.log(math.log(n / 0.05)) + 6.0
        ) / n
        assert res.complexity_c == pytest.approx(expected_c, rel=1e-12)
        assert res.bound == pytest.approx(expected_c, rel=1e-12)
        assert res.bound == pytest.approx(0.0019, abs=1e-4)
        assert res.sigma == 0.0

    def test_maximal_spread(self):
        # y - x = delta everywhere: V = delta^2, bound = delta*C + 2*delta*sqrt(C)
        delta = 2.0
        x = np.zeros(1000)
        y = np.full(1000, delta)
        res = freedman_bound_appendix(DeviationSequence(x, y), delta, 0.05)
        c = res.complexity_c
        assert res.bound == pytest.approx(delta * c + 2.0 * delta * math.sqrt(c), rel=1e-12)

    def test_loglog_domain_error(self):
        seq = DeviationSequence(np.zeros(1), np.zeros(1))
        with pytest.raises(ValueError, match="log-log"):
            freedman_bound_appendix(seq, 1.0, 0.9)


class TestBaselines:
    def test_azuma_hand_example(self):
        assert azuma_baseline(1.0, 0.0, 2, math.exp(-1.0)) == pytest.approx(0.5, rel=1e-12)

    def test_azuma_vanishing_numerator(self):
        assert azuma_baseline(1.0, 0.0, 10, 1.0) == 0.0

    def test_azuma_constant_knob(self):
        loose = azuma_baseline(1.0, 0.0, 2, math.exp(-1.0), denominator_constant=8.0)
        assert loose == pytest.approx(0.25, rel=1e-12)

    def test_hoeffding_hand_examples(self):
        assert hoeffding_subsample_correction(1.0, 10**4, 0.01) == pytest.approx(
            math.sqrt(math.log(200.0) / 2e4), rel=1e-12
        )
        assert hoeffding_subsample_correction(1.0, 10**4, 0.01) == pytest.approx(
            0.016275, abs=5e-6
        )
        assert hoeffding_subsample_correction(13.12, 10**4, 0.01) == pytest.approx(
            0.2135, abs=5e-4
        )

    def test_hoeffding_vanishes(self):
        assert hoeffding_subsample_correction(1.0, 10**12, 0.01) < 1e-5


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(min_value=2, max_value=200),
    delta_range=st.floats(min_value=0.5, max_value=20.0),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_bound_invariant_random(n, delta_range, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, delta_range * 0.4, n)
    y = rng.uniform(0.0, delta_range * 0.4, n)
    res = freedman_bound_maintext(
        DeviationSequence(x, y), delta_range, default_grid(20), 0.05
    )
    assert res.bound >= 0.0
    assert res.bound == pytest.approx(res.recompute_bound(), rel=1e-12)
    assert isinstance(res, ConcentrationResult)
