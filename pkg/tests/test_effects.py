import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ndtr
from scipy.stats import norm

from medshift import (
    AdjustedParams,
    EffectPoint,
    InvalidArgumentError,
    StarParams,
    expected_outcome_under_shift,
    indirect_effect,
    indirect_effect_unadjusted,
)


def make_adjusted(beta, sigma_m, sigma_u=0.0):
    sm2, su2 = sigma_m**2, sigma_u**2
    return AdjustedParams(*beta, sigma_m2=sm2, lam=sm2 / (sm2 + su2), sigma_u2=su2)


def quadrature_shifted_outcome(beta, alpha, sigma_m, pc, xi):
    """Independent evaluation: integrate the probit response against the
    shifted normal mediator density, summed over the common cause."""
    b0, b1, b2 = beta
    total = 0.0
    for c in (0, 1):
        mu = alpha[0] + alpha[1] * c - xi
        val = quad(
            lambda m: ndtr(b0 + b1 * m + b2 * c) * norm.pdf(m, loc=mu, scale=sigma_m),
            mu - 40 * sigma_m,
            mu + 40 * sigma_m,
            limit=400,
            epsabs=1e-13,
            epsrel=1e-13,
        )[0]
        total += val * pc[c]
    return total


class TestExpectedOutcomeUnderShift:
    def test_matches_quadrature(self, carna_truth):
        adj = make_adjusted(carna_truth["beta"], carna_truth["sigma_m"], carna_truth["sigma_u"])
        pc = np.array([1 - carna_truth["p_c1"], carna_truth["p_c1"]])
        for xi in (0.0, 0.5, 1.0, 2.0):
            oracle = quadrature_shifted_outcome(
                carna_truth["beta"], carna_truth["alpha"], carna_truth["sigma_m"], pc, xi
            )
            got = expected_outcome_under_shift(adj, carna_truth["alpha"], pc, xi)
            assert got == pytest.approx(oracle, abs=1e-10)

    def test_no_pathway_constant_in_shift(self):
        adj = make_adjusted((0.3, 0.0, -0.2), 0.6)
        pc = np.array([0.4, 0.6])
        values = {expected_outcome_under_shift(adj, (1.0, 0.5), pc, xi) for xi in (0.0, 0.7, 2.0)}
        assert len(values) == 1

    def test_pc_validation(self):
        adj = make_adjusted((0.3, -1.0, 0.2), 0.6)
        with pytest.raises(InvalidArgumentError):
            expected_outcome_under_shift(adj, (1.0, 0.5), [0.5, 0.6], 1.0)
        with pytest.raises(InvalidArgumentError):
            expected_outcome_under_shift(adj, (1.0, 0.5), [0.2, 0.3, 0.5], 1.0)


class TestIndirectEffect:
    def test_zero_shift_zero_effect(self, carna_truth):
        adj = make_adjusted(carna_truth["beta"], carna_truth["sigma_m"], carna_truth["sigma_u"])
        pc = np.array([0.31, 0.69])
        point = indirect_effect(adj, carna_truth["alpha"], pc, 0.0)
        assert point.indirect == 0.0
        assert point.ey0 == point.ey0_shifted

    def test_monte_carlo_mediation_oracle(self, carna_truth, sca_truth):
        # Draw the common cause, draw the (shifted) mediator, average the
        # probit response; compare the closed form within MC error.
        rng = np.random.default_rng(314)
        n = 1_000_000
        for truth in (carna_truth, sca_truth):
            adj = make_adjusted(truth["beta"], truth["sigma_m"], truth["sigma_u"])
            pc = np.array([1 - truth["p_c1"], truth["p_c1"]])
            xi = 1.0
            c = (rng.random(n) < truth["p_c1"]).astype(float)
            b0, b1, b2 = truth["beta"]
            mu = truth["alpha"][0] + truth["alpha"][1] * c
            p_shift = ndtr(b0 + b1 * rng.normal(mu - xi, truth["sigma_m"]) + b2 * c)
            p_base = ndtr(b0 + b1 * rng.normal(mu, truth["sigma_m"]) + b2 * c)
            mc = p_shift.mean() - p_base.mean()
            se = np.sqrt(p_shift.var() / n + p_base.var() / n)
            got = indirect_effect(adj, truth["alpha"], pc, xi)
            assert got.indirect == pytest.approx(mc, abs=3 * se)

    def test_sign_consistency(self):
        # Leftward shift helps exactly when a larger mediator hurts.
        pc = np.array([0.4, 0.6])
        for b1 in (-1.2, -0.3, 0.4, 1.5):
            adj = make_adjusted((0.2, b1, -0.1), 0.7)
            point = indirect_effect(adj, (0.8, 0.4), pc, 1.0)
            assert np.sign(point.indirect) == -np.sign(b1)

    def test_monotone_and_bounded_in_shift(self, carna_truth):
        adj = make_adjusted(carna_truth["beta"], carna_truth["sigma_m"], carna_truth["sigma_u"])
        pc = np.array([0.31, 0.69])
        values = [
            indirect_effect(adj, carna_truth["alpha"], pc, xi).indirect
            for xi in np.linspace(0.0, 4.0, 17)
        ]
        assert np.all(np.diff(values) >= 0)  # beta1 < 0 here
        assert all(abs(v) <= 1.0 for v in values)

    def test_effect_point_invariant(self):
        with pytest.raises(InvalidArgumentError):
            EffectPoint(ey0_shifted=1.2, ey0=0.5, indirect=0.7)


class TestUnadjustedEffect:
    def test_equals_adjusted_without_error(self):
        star = StarParams(1.5, 0.9, 0.4, 1.1, -0.9, 0.5)
        pc = np.array([0.3, 0.7])
        for xi in (0.5, 1.0, 2.0):
            unadj = indirect_effect_unadjusted(star, pc, xi)
            adj = make_adjusted((1.1, -0.9, 0.5), np.sqrt(0.4))
            direct = indirect_effect(adj, (1.5, 0.9), pc, xi)
            assert unadj.indirect == pytest.approx(direct.indirect, abs=1e-14)

    def test_attenuation_of_ignored_analysis(self, carna_truth):
        # Evaluated at the observed-scale truth, the uncorrected formula
        # understates the indirect effect of a harmful mediator.
        from medshift import forward_star

        beta, alpha = tuple(carna_truth["beta"]), tuple(carna_truth["alpha"])
        sm2, su2 = carna_truth["sigma_m"] ** 2, carna_truth["sigma_u"] ** 2
        lam = sm2 / (sm2 + su2)
        star = StarParams(alpha[0], alpha[1], sm2 + su2, *forward_star(beta, alpha, lam, su2))
        pc = np.array([0.31, 0.69])
        adj_truth = make_adjusted(beta, carna_truth["sigma_m"], carna_truth["sigma_u"])
        for xi in (0.5, 1.0, 1.5, 2.0):
            ignored = indirect_effect_unadjusted(star, pc, xi).indirect
            corrected = indirect_effect(adj_truth, alpha, pc, xi).indirect
            assert ignored < corrected

    def test_monotone_in_shift(self):
        star = StarParams(1.5, 0.9, 0.4, 1.1, -0.9, 0.5)
        pc = np.array([0.3, 0.7])
        vals = [indirect_effect_unadjusted(star, pc, xi).indirect for xi in np.linspace(0, 3, 13)]
        assert np.all(np.diff(vals) >= 0)
