import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mflab import theory
from mflab.activations import GConstants, get
from mflab.kernel import AssumptionViolatedError

IDENTITY = get("identity").constants()
TANH = get("tanh").constants()
ZEROS = GConstants(g1=0, g2=0, g3=0, g4=0, g5=0, g6=0)


class TestConvergenceConstants:
    def test_a1_vanishes_without_smoothness(self):
        assert theory.const_a1(ZEROS, 1.0, 1.0, 1) == 0.0

    def test_a1_identity_hand_value(self):
        # 2 (1 + 1)(1 + 1) + 2 (0 + 0) sqrt(2) = 8
        assert theory.const_a1(IDENTITY, 1.0, 1.0, 1) == pytest.approx(8.0)

    def test_a1_grows_with_dimension(self):
        a = theory.const_a1(IDENTITY, 1.0, 1.0, 1)
        b = theory.const_a1(IDENTITY, 1.0, 1.0, 2)
        assert b > a

    def test_a2_vanishes_without_smoothness(self):
        assert theory.const_a2(ZEROS, 1.0, 1.0, 1) == 0.0

    def test_a2_identity_hand_value(self):
        # 2 [ (2 + 2 + 0) 2 sqrt(2) + 0 + 0 ] = 16 sqrt(2)
        assert theory.const_a2(IDENTITY, 1.0, 1.0, 1) == pytest.approx(
            16.0 * math.sqrt(2.0))

    def test_monotone_in_each_g(self):
        base = GConstants(g1=.3, g2=.4, g3=.5, g4=.6, g5=.7, g6=.8)
        a1_0 = theory.const_a1(base, 1.1, 0.9, 3)
        a2_0 = theory.const_a2(base, 1.1, 0.9, 3)
        for name in ("g1", "g2", "g3", "g4", "g5", "g6"):
            bumped = GConstants(**{**vars(base), name: getattr(base, name) + 0.5})
            assert theory.const_a1(bumped, 1.1, 0.9, 3) >= a1_0
            assert theory.const_a2(bumped, 1.1, 0.9, 3) >= a2_0


class TestStabilityRadius:
    def test_first_branch_saturation(self):
        r = theory.const_r(ZEROS, 1.0, 1.0, 1, n=2, lam_min=1e12)
        assert r.value == pytest.approx(math.sqrt(2.0))

    def test_small_spectrum_shrinks_radius(self):
        r = theory.const_r(IDENTITY, 1.0, 1.0, 1, n=2, lam_min=1e-9)
        assert r.value < 1e-9

    def test_identity_hand_value(self):
        # denominator: 8 sqrt(18) + 0 + 16 sqrt(2) + 0; radius = Lambda/(2 den)
        den = 8.0 * math.sqrt(18.0) + 16.0 * math.sqrt(2.0)
        expected = min(math.sqrt(2.0), 1.0 / (2.0 * den))
        r = theory.const_r(IDENTITY, 1.0, 1.0, 1, n=2, lam_min=1.0)
        assert r.value == pytest.approx(expected, rel=1e-12)
        assert not r.clamped

    def test_rejects_degenerate_spectrum(self):
        with pytest.raises(AssumptionViolatedError):
            theory.const_r(IDENTITY, 1.0, 1.0, 1, n=2, lam_min=0.0)

    def test_log_clamp_flagged(self):
        # huge lam_min drives the log argument below e on the second branch
        r = theory.const_r(GConstants(g1=0, g2=0, g3=1, g4=1, g5=0, g6=0),
                           1.0, 1.0, 1, n=1, lam_min=100.0)
        assert r.clamped

    def test_never_exceeds_moment_scale(self):
        for d in (1, 4, 9):
            r = theory.const_r(TANH, 1.3, 0.8, d, n=8, lam_min=0.05)
            assert r.value <= math.sqrt(0.8 ** 2 * d + 1.3 ** 2) + 1e-15


class TestAlphaThreshold:
    def test_vanishes_trivially(self):
        assert theory.alpha_threshold(0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0,
                                      1.0) == 0.0

    def test_hand_value(self):
        assert theory.alpha_threshold(1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0,
                                      1.0) == pytest.approx(8.0)

    def test_monotone_in_n_through_spectrum(self):
        # growing n shrinks lambda0 and the radius, raising the threshold
        vals = []
        for n in (2, 8, 32):
            lam_min = 0.5
            lambda0 = math.sqrt(lam_min / n)
            r = theory.const_r(TANH, 1.0, 1.0, 4, n=n, lam_min=lam_min)
            vals.append(theory.alpha_threshold(1.0, 10.0, 20.0, 1e-3, lambda0,
                                               r.value, 1.0, 1.0))
        assert vals[0] < vals[1] < vals[2]

    def test_rejects_degenerate(self):
        with pytest.raises(AssumptionViolatedError):
            theory.alpha_threshold(1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0)


class TestLossAndKlBounds:
    def test_initial_value_without_decay(self):
        assert theory.loss_bound(0.0, 2.0, 0.0, 0.5, 3.0,
                                 1.7) == pytest.approx(2 * 1.7)

    def test_floor_reached_in_the_limit(self):
        floor = theory.loss_floor(10.0, 0.01, 0.5, 8.0)
        assert theory.loss_bound(1e9, 10.0, 0.01, 0.5, 8.0,
                                 1.0) == pytest.approx(floor)

    def test_floor_hand_value(self):
        # 2 * 64 * 1e-4 / (100 * 0.0625)
        assert theory.loss_floor(10.0, 0.01, 0.5, 8.0) == pytest.approx(
            2.048e-3)

    def test_kl_bound_hand_value(self):
        a2 = 16.0 * math.sqrt(2.0)
        assert theory.kl_bound(100.0, 0.0, 0.5, 0.0, a2,
                               1.0) == pytest.approx(3.2768)

    def test_exact_alpha_homogeneity(self):
        v1 = theory.kl_bound(3.0, 0.2, 0.4, 5.0, 7.0, 0.9)
        v2 = theory.kl_bound(6.0, 0.2, 0.4, 5.0, 7.0, 0.9)
        assert v2 == pytest.approx(v1 / 4.0, rel=1e-14)
        f1 = theory.loss_floor(3.0, 0.2, 0.4, 5.0)
        f2 = theory.loss_floor(6.0, 0.2, 0.4, 5.0)
        assert f2 == pytest.approx(f1 / 4.0, rel=1e-14)

    def test_exp_rate_homogeneity(self):
        # doubling alpha quarters the time to reach a fixed decay level
        t1, alpha = 0.8, 2.0
        v1 = theory.loss_bound(t1, alpha, 0.0, 0.5, 0.0, 1.0)
        v2 = theory.loss_bound(t1 / 4.0, 2 * alpha, 0.0, 0.5, 0.0, 1.0)
        assert v1 == pytest.approx(v2, rel=1e-12)

    def test_rejects_negative_time(self):
        with pytest.raises(ValueError):
            theory.loss_bound(-1.0, 1.0, 0.0, 1.0, 1.0, 1.0)


class TestGeneralizationBounds:
    def test_b1_identity_value(self):
        # [4 sqrt(2 d) + 2 sqrt(2)] + 8 sqrt(log n) at unit scales
        d, n = 2, 100
        expected = (4 * math.sqrt(2 * d) + 2 * math.sqrt(2)
                    + 8 * math.sqrt(math.log(n)))
        assert theory.const_b1(IDENTITY, 1.0, 1.0, d, n) == pytest.approx(
            expected)

    def test_b2_clamp_reported(self):
        small = theory.const_b2(TANH, 1.0, 1.0, m_kl=1e-6)
        assert not small.clamped and small.value > 40.0
        big = theory.const_b2(TANH, 1.0, 1.0, m_kl=10.0)
        assert big.clamped and big.value == pytest.approx(40.0)

    def test_large_alpha_bound_at_zero_budget(self):
        n, delta = 50, 0.1
        assert theory.gen_bound_large_alpha(0.0, 3.0, n, delta, 1.0, 1.0) \
            == pytest.approx(3 * math.sqrt(math.log(20.0) / (2 * n)))

    def test_delta_domain(self):
        with pytest.raises(ValueError):
            theory.gen_bound_large_alpha(0.1, 1.0, 10, 2.0, 1.0, 1.0)

    def test_plugged_optimization_budget_non_increasing_in_alpha(self):
        # feeding the divergence budget from the convergence theorem makes
        # the combined bound non-increasing in the scale factor
        g = TANH
        lam, lambda0, l0, n, delta, d = 1e-3, 0.3, 1.0, 200, 0.05, 4
        a1 = theory.const_a1(g, 1.0, 1.0, d)
        a2 = theory.const_a2(g, 1.0, 1.0, d)
        b1 = theory.const_b1(g, 1.0, 1.0, d, n)
        vals = []
        for alpha in (4.0, 8.0, 16.0, 32.0, 64.0, 128.0):
            m_kl = theory.kl_bound(alpha, lam, lambda0, a1, a2, l0)
            b2 = theory.const_b2(g, 1.0, 1.0, m_kl)
            vals.append(theory.gen_bound_large_alpha(m_kl, alpha, n, delta,
                                                     b1, b2.value))
        assert all(x >= y - 1e-9 for x, y in zip(vals, vals[1:]))

    def test_chi2_bound_values_and_premises(self):
        out = theory.gen_bound_chi2(0.0, 100, 0.05, 1.0, 1.0)
        assert out.value == pytest.approx(
            6 * math.sqrt(math.log(40.0) / 200.0))
        big_n = theory.gen_bound_chi2(1.0, 10_000, 0.05, 1.0, 1.0)
        small_n = theory.gen_bound_chi2(1.0, 100, 0.05, 1.0, 1.0)
        assert big_n.value < small_n.value
        flagged = theory.gen_bound_chi2(2.0, 100, 0.05, 1.0, 1.0, alpha=1.0,
                                        lam=0.5)
        assert not flagged.premises["alpha_scale"]
        ok = theory.gen_bound_chi2(2.0, 100, 0.05, 1.0, 1.0, alpha=50.0,
                                   lam=0.5)
        assert ok.premises["alpha_scale"] and ok.premises["lambda_budget"]

    def test_small_alpha_bound(self):
        # 4 * 0.05 + 3 sqrt(log 20 / 200) at tanh's uniform bound
        val = theory.gen_bound_small_alpha(0.25, 1.0, 100, 0.1, 1.0, 1.0)
        assert val == pytest.approx(0.2 + 3 * math.sqrt(math.log(20.0) / 200))

    def test_small_alpha_guards(self):
        with pytest.raises(ValueError):
            theory.gen_bound_small_alpha(0.75, 1.0, 100, 0.1, 1.0, 1.0)
        with pytest.raises(ValueError):
            theory.gen_bound_small_alpha(0.25, 1.0, 100, 0.1, None, 1.0)

    def test_kl_teacher_bound(self):
        val = theory.gen_bound_kl_teacher(0.5, 1.0, 400, 0.05, 1.0, 1.0,
                                          lam=1e-4)
        expected = (8 * math.sqrt(0.5 / 400)
                    + 6 * math.sqrt(math.log(40.0) / 800))
        assert val.value == pytest.approx(expected)
        assert val.premises["lambda_budget"]
        tight = theory.gen_bound_kl_teacher(0.5, 1.0, 400, 0.05, 1.0, 1.0,
                                            lam=0.1)
        assert not tight.premises["lambda_budget"]

    def test_kl_teacher_grows_with_alpha(self):
        lo = theory.gen_bound_kl_teacher(0.5, 1.0, 400, 0.05, 1.0, 1.0, 0.0)
        hi = theory.gen_bound_kl_teacher(0.5, 4.0, 400, 0.05, 1.0, 1.0, 0.0)
        assert hi.value > lo.value

    def test_kl_teacher_rejects_unbounded(self):
        with pytest.raises(ValueError):
            theory.gen_bound_kl_teacher(0.5, 1.0, 400, 0.05, None, 1.0, 0.0)


class TestRampLoss:
    def test_branch_values(self):
        assert theory.ramp_loss(1.0, 1.0) == 0.0
        assert theory.ramp_loss(0.25, 1.0) == pytest.approx(0.5)
        assert theory.ramp_loss(-0.3, 1.0) == 1.0

    def test_rejects_non_sign_labels(self):
        with pytest.raises(ValueError):
            theory.ramp_loss(0.5, 0.3)

    def test_two_lipschitz_on_grid(self):
        grid = np.linspace(-3, 3, 2001)
        for y in (-1.0, 1.0):
            vals = theory.ramp_loss(grid, np.full_like(grid, y))
            steps = np.abs(np.diff(vals)) / np.diff(grid)
            assert np.max(steps) <= 2.0 + 1e-9

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-10, 10), st.sampled_from([-1.0, 1.0]))
    def test_dominates_zero_one(self, pred, y):
        ramp = theory.ramp_loss(pred, y)
        assert 0.0 <= ramp <= 1.0
        assert theory.zero_one_loss(pred, y) <= ramp


def test_constants_bundle_consistency():
    g = TANH
    bundle = theory.constants_for(g, 1.0, 1.0, 4, 8, lam_min=0.02, l0=1.0,
                                  lam=1e-3, m_kl=0.1)
    assert bundle.a1 == theory.const_a1(g, 1.0, 1.0, 4)
    assert bundle.lambda0 == pytest.approx(math.sqrt(0.02 / 8))
    assert bundle.r <= math.sqrt(4 + 1)
    assert bundle.alpha_min > 0
