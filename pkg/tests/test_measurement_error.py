import numpy as np
import pytest
from scipy.special import ndtr

from medshift import (
    AdjustedParams,
    IdentifiabilityBoundaryError,
    InfeasibleErrorVarianceError,
    InvalidArgumentError,
    StarParams,
    adjust,
    forward_star,
    outcome_prob_given_measurement,
    reliability,
)


def consistent_star(beta, alpha, sigma_m, sigma_u):
    """Observed-scale parameters implied by a true-scale configuration."""
    sm2, su2 = sigma_m**2, sigma_u**2
    lam = sm2 / (sm2 + su2)
    b0s, b1s, b2s = forward_star(beta, alpha, lam, su2)
    return StarParams(
        alpha0=alpha[0],
        alpha1=alpha[1],
        sigma_mstar2=sm2 + su2,
        beta0_star=b0s,
        beta1_star=b1s,
        beta2_star=b2s,
    )


class TestReliability:
    def test_study_values(self):
        # Fitted true-mediator variance 0.62, error SD 0.29.
        lam = reliability(0.62 + 0.29**2, 0.29**2)
        assert lam == pytest.approx(0.62 / (0.62 + 0.0841), abs=1e-12)
        assert lam == pytest.approx(0.8806, abs=5e-4)

    def test_no_error(self):
        assert reliability(0.5, 0.0) == 1.0

    def test_boundary_rejected(self):
        with pytest.raises(InfeasibleErrorVarianceError):
            reliability(0.3, 0.3)
        with pytest.raises(InfeasibleErrorVarianceError):
            reliability(0.3, 0.31)

    def test_monotone_in_observed_variance(self):
        su2 = 0.1
        lams = [reliability(v, su2) for v in (0.15, 0.3, 0.6, 1.2)]
        assert np.all(np.diff(lams) > 0)


class TestForwardStar:
    def test_no_attenuation_without_slope(self):
        b0s, b1s, b2s = forward_star((0.7, 0.0, -0.3), (1.0, 0.5), lam=0.6, sigma_u2=0.2)
        assert (b0s, b1s, b2s) == pytest.approx((0.7, 0.0, -0.3), abs=1e-15)

    def test_identity_when_error_free(self):
        beta = (1.36, -1.11, 0.84)
        assert forward_star(beta, (1.57, 0.88), lam=1.0, sigma_u2=0.0) == pytest.approx(beta)

    def test_slope_attenuates(self):
        _, b1s, _ = forward_star((0.0, -1.11, 0.0), (0.0, 0.0), lam=0.8, sigma_u2=0.29**2)
        assert abs(b1s) < 1.11 and np.sign(b1s) == -1

    def test_invalid_lambda(self):
        with pytest.raises(InvalidArgumentError):
            forward_star((0.0, 1.0, 0.0), (0.0, 0.0), lam=0.0, sigma_u2=0.1)


class TestAdjust:
    def test_identity_at_zero_error(self):
        star = StarParams(1.5, 0.9, 0.42, 1.0, -0.8, 0.6)
        adj = adjust(star, 0.0)
        assert adj.beta0 == pytest.approx(star.beta0_star, abs=1e-14)
        assert adj.beta1 == pytest.approx(star.beta1_star, abs=1e-14)
        assert adj.beta2 == pytest.approx(star.beta2_star, abs=1e-14)
        assert adj.sigma_m2 == pytest.approx(star.sigma_mstar2, abs=1e-14)
        assert adj.lam == 1.0

    def test_roundtrip_grid(self):
        # forward map then inversion recovers the true coefficients.
        rng = np.random.default_rng(2024)
        count = 0
        for lam in (0.5, 0.8, 0.95):
            for _ in range(17):
                beta = tuple(rng.normal(0, 1.2, size=3))
                alpha = tuple(rng.normal(0, 1.0, size=2))
                sigma_m = float(rng.uniform(0.3, 1.0))
                sigma_m2 = sigma_m**2
                sigma_u2 = sigma_m2 * (1.0 - lam) / lam
                star = StarParams(
                    alpha[0], alpha[1], sigma_m2 + sigma_u2,
                    *forward_star(beta, alpha, lam, sigma_u2),
                )
                adj = adjust(star, sigma_u2)
                assert adj.beta0 == pytest.approx(beta[0], abs=1e-10)
                assert adj.beta1 == pytest.approx(beta[1], abs=1e-10)
                assert adj.beta2 == pytest.approx(beta[2], abs=1e-10)
                assert adj.sigma_m2 == pytest.approx(sigma_m2, abs=1e-10)
                count += 1
        assert count >= 50

    def test_roundtrip_published_parameters(self, carna_truth):
        star = consistent_star(
            carna_truth["beta"], carna_truth["alpha"], carna_truth["sigma_m"], carna_truth["sigma_u"]
        )
        adj = adjust(star, carna_truth["sigma_u"] ** 2)
        assert (adj.beta0, adj.beta1, adj.beta2) == pytest.approx(tuple(carna_truth["beta"]), abs=1e-10)

    def test_deattenuation_direction(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            sigma_m2 = float(rng.uniform(0.2, 1.0))
            sigma_u2 = float(rng.uniform(0.01, 0.5)) * sigma_m2
            star = StarParams(0.3, 0.2, sigma_m2 + sigma_u2, 0.1, float(rng.normal(0, 0.6)), -0.2)
            try:
                adj = adjust(star, sigma_u2)
            except IdentifiabilityBoundaryError:
                continue
            assert abs(adj.beta1) >= abs(star.beta1_star)
            assert np.sign(adj.beta1) == np.sign(star.beta1_star)

    def test_identifiability_boundary_refused(self):
        # lam^2 = beta1*^2 * lam * sigma_u2 exactly at beta1* = sqrt(lam/sigma_u2)
        sigma_u2 = 0.25
        sigma_mstar2 = 1.0
        lam = reliability(sigma_mstar2, sigma_u2)
        b1s_boundary = np.sqrt(lam / sigma_u2)
        star = StarParams(0.0, 0.0, sigma_mstar2, 0.0, b1s_boundary, 0.0)
        with pytest.raises(IdentifiabilityBoundaryError):
            adjust(star, sigma_u2)
        star_beyond = StarParams(0.0, 0.0, sigma_mstar2, 0.0, 1.1 * b1s_boundary, 0.0)
        with pytest.raises(IdentifiabilityBoundaryError):
            adjust(star_beyond, sigma_u2)

    def test_infeasible_variance_refused(self):
        star = StarParams(0.0, 0.0, 0.05, 0.0, 0.1, 0.0)
        with pytest.raises(InfeasibleErrorVarianceError):
            adjust(star, 0.08)

    def test_adjusted_params_consistency_guard(self):
        with pytest.raises(InvalidArgumentError):
            AdjustedParams(beta0=0, beta1=0, beta2=0, sigma_m2=0.5, lam=0.7, sigma_u2=0.1)


class TestOutcomeProbGivenMeasurement:
    def test_collapses_without_error(self):
        adj = AdjustedParams(beta0=0.4, beta1=-0.9, beta2=0.3, sigma_m2=0.5, lam=1.0, sigma_u2=0.0)
        got = outcome_prob_given_measurement(2.1, 1, adj, alpha=(1.0, 0.5))
        assert got == pytest.approx(float(ndtr(0.4 - 0.9 * 2.1 + 0.3)), abs=1e-14)

    def test_tower_property_monte_carlo(self):
        # Average the true-scale response over the conditional mediator law.
        rng = np.random.default_rng(99)
        alpha, sigma_m, sigma_u = (1.2, 0.7), 0.6, 0.35
        beta = (0.8, -1.0, 0.5)
        sm2, su2 = sigma_m**2, sigma_u**2
        lam = sm2 / (sm2 + su2)
        adj = AdjustedParams(*beta, sigma_m2=sm2, lam=lam, sigma_u2=su2)
        m_star, c = 2.3, 1
        mu = (1 - lam) * (alpha[0] + alpha[1] * c) + lam * m_star
        sd = np.sqrt(lam * su2)
        draws = rng.normal(mu, sd, size=1_000_000)
        probs = ndtr(beta[0] + beta[1] * draws + beta[2] * c)
        mc = probs.mean()
        se = probs.std() / np.sqrt(probs.size)
        got = outcome_prob_given_measurement(m_star, c, adj, alpha)
        assert got == pytest.approx(mc, abs=3 * se)

    def test_matches_starred_regression(self, carna_truth):
        # The starred probit response evaluated at the same measurement.
        beta, alpha = tuple(carna_truth["beta"]), tuple(carna_truth["alpha"])
        sm2, su2 = carna_truth["sigma_m"] ** 2, carna_truth["sigma_u"] ** 2
        lam = sm2 / (sm2 + su2)
        b0s, b1s, b2s = forward_star(beta, alpha, lam, su2)
        adj = AdjustedParams(*beta, sigma_m2=sm2, lam=lam, sigma_u2=su2)
        for m_star in (0.5, 1.5, 2.5, 3.5):
            for c in (0, 1):
                direct = float(ndtr(b0s + b1s * m_star + b2s * c))
                got = outcome_prob_given_measurement(m_star, c, adj, alpha)
                assert got == pytest.approx(direct, abs=1e-12)

    def test_bounds_and_monotonicity(self):
        adj = AdjustedParams(beta0=0.2, beta1=-0.7, beta2=0.1, sigma_m2=0.4,
                             lam=0.8, sigma_u2=0.1)
        values = [outcome_prob_given_measurement(m, 0, adj, (1.0, 0.3)) for m in np.linspace(-3, 5, 30)]
        assert all(0.0 < v < 1.0 for v in values)
        assert np.all(np.diff(values) < 0)  # beta1 < 0: larger mediator hurts
