"""Measurement-error correction for probit outcome coefficients.

A probit regression of the outcome on the *observed* (noisy) mediator is
correctly specified, but its coefficients ``beta*`` are attenuated
relative to the coefficients ``beta`` on the *true* mediator. With the
reliability ratio ``lambda = sigma_m2 / (sigma_m2 + sigma_u2)`` the two
are linked in closed form:

forward (true -> observed scale), with ``r = 1/sqrt(1 + beta1^2 * lambda * sigma_u2)``::

    beta0* = r * (beta0 + beta1 * (1 - lambda) * alpha0)
    beta1* = r * lambda * beta1
    beta2* = r * (beta1 * (1 - lambda) * alpha1 + beta2)

inverse (observed -> true scale)::

    beta1 = beta1* / sqrt(lambda^2 - beta1*^2 * lambda * sigma_u2)
    beta0 = beta0* * sqrt(1 + beta1^2 * lambda * sigma_u2) - beta1 * (1 - lambda) * alpha0
    beta2 = beta2* * sqrt(1 + beta1^2 * lambda * sigma_u2) - beta1 * (1 - lambda) * alpha1

The inverse-map discriminant ``lambda^2 - beta1*^2 * lambda * sigma_u2``
is a feasibility guard, not arithmetic to be absolute-valued: when it is
not strictly positive no real ``beta1`` is consistent with the model and
the correction refuses rather than flipping sign.

This correction is derived for the probit link only; logit fits cannot be
adjusted here.
"""

from dataclasses import dataclass
from math import isfinite, sqrt

from .distributions import conditional_mediator_given_measurement, probit_normal_integral
from .errors import (
    IdentifiabilityBoundaryError,
    InfeasibleErrorVarianceError,
    InvalidArgumentError,
)

__all__ = ["AdjustedParams", "reliability", "forward_star", "adjust", "outcome_prob_given_measurement"]

# Discriminant at or below this is treated as the identifiability boundary.
_BOUNDARY_TOL = 1e-10


@dataclass(frozen=True)
class AdjustedParams:
    """Outcome coefficients on the true-mediator scale plus the mediator
    variance decomposition that produced them.

    ``lam`` and ``sigma_u2`` are linked through ``sigma_m2`` by
    construction (``lam = sigma_m2 / (sigma_m2 + sigma_u2)``), so
    ``lam == 1`` iff ``sigma_u2 == 0``.
    """

    beta0: float
    beta1: float
    beta2: float
    sigma_m2: float
    lam: float
    sigma_u2: float

    def __post_init__(self):
        if self.sigma_m2 <= 0:
            raise InvalidArgumentError(f"sigma_m2 must be > 0, got {self.sigma_m2}")
        if not (0.0 < self.lam <= 1.0):
            raise InvalidArgumentError(f"lam must lie in (0, 1], got {self.lam}")
        if self.sigma_u2 < 0:
            raise InvalidArgumentError(f"sigma_u2 must be >= 0, got {self.sigma_u2}")
        expected = self.sigma_m2 / (self.sigma_m2 + self.sigma_u2)
        if abs(self.lam - expected) > 1e-12:
            raise InvalidArgumentError(
                f"lam={self.lam!r} inconsistent with sigma_m2/(sigma_m2+sigma_u2)={expected!r}"
            )


def reliability(sigma_mstar2, sigma_u2) -> float:
    """Reliability ratio: share of observed-mediator variance that is true
    signal, ``(sigma_mstar2 - sigma_u2) / sigma_mstar2`` in (0, 1].

    Raises
    ------
    InfeasibleErrorVarianceError
        When ``sigma_mstar2 <= sigma_u2``: the error model cannot hold with
        a positive true-mediator variance. Never clamped silently.
    """
    if sigma_u2 < 0:
        raise InvalidArgumentError(f"sigma_u2 must be >= 0, got {sigma_u2}")
    if sigma_mstar2 <= sigma_u2:
        raise InfeasibleErrorVarianceError(
            f"observed-mediator variance {sigma_mstar2:g} does not exceed the "
            f"measurement-error variance {sigma_u2:g}; no positive true-mediator "
            "variance exists"
        )
    return (sigma_mstar2 - sigma_u2) / sigma_mstar2


def forward_star(beta, alpha, lam, sigma_u2):
    """Map true-scale coefficients to observed-scale coefficients.

    Parameters
    ----------
    beta : (beta0, beta1, beta2)
        Coefficients on the true mediator.
    alpha : (alpha0, alpha1)
        Mediator mean model.
    lam : float
        Reliability ratio in (0, 1].
    sigma_u2 : float
        Measurement-error variance.

    Returns
    -------
    (beta0_star, beta1_star, beta2_star)
    """
    if not (0.0 < lam <= 1.0):
        raise InvalidArgumentError(f"lam must lie in (0, 1], got {lam}")
    if sigma_u2 < 0:
        raise InvalidArgumentError(f"sigma_u2 must be >= 0, got {sigma_u2}")
    b0, b1, b2 = beta
    a0, a1 = alpha
    r = 1.0 / sqrt(1.0 + b1 * b1 * lam * sigma_u2)
    return (
        r * (b0 + b1 * (1.0 - lam) * a0),
        r * lam * b1,
        r * (b1 * (1.0 - lam) * a1 + b2),
    )


def adjust(star, sigma_u2) -> AdjustedParams:
    """Invert the attenuation: observed-scale MLE -> true-scale coefficients.

    ``star`` is a fitted parameter set with fields ``alpha0``, ``alpha1``,
    ``sigma_mstar2``, ``beta0_star``, ``beta1_star``, ``beta2_star`` (the
    joint MLE; the mediator mean model is reused, never re-estimated).

    Raises
    ------
    InfeasibleErrorVarianceError
        If ``sigma_u2`` is not strictly below the fitted observed variance.
    IdentifiabilityBoundaryError
        If the discriminant ``lam^2 - beta1*^2 * lam * sigma_u2`` is within
        tolerance of zero or negative: no real true-scale slope exists.
    """
    lam = reliability(star.sigma_mstar2, sigma_u2)
    b1s = star.beta1_star
    disc = lam * lam - b1s * b1s * lam * sigma_u2
    if disc <= _BOUNDARY_TOL:
        raise IdentifiabilityBoundaryError(
            f"discriminant lam^2 - beta1*^2*lam*sigma_u2 = {disc:.3e} <= {_BOUNDARY_TOL:g}; "
            "the fitted slope is too steep for this error variance"
        )
    beta1 = b1s / sqrt(disc)
    scale = sqrt(1.0 + beta1 * beta1 * lam * sigma_u2)
    beta0 = star.beta0_star * scale - beta1 * (1.0 - lam) * star.alpha0
    beta2 = star.beta2_star * scale - beta1 * (1.0 - lam) * star.alpha1
    return AdjustedParams(
        beta0=beta0,
        beta1=beta1,
        beta2=beta2,
        sigma_m2=lam * star.sigma_mstar2,
        lam=lam,
        sigma_u2=float(sigma_u2),
    )


def outcome_prob_given_measurement(m_star, c, adj, alpha) -> float:
    """Success probability given the *observed* mediator value.

    Averages the true-scale probit response over the conditional law of the
    true mediator given its measurement, which collapses to::

        Phi((beta0 + beta1*mu + beta2*c) / sqrt(1 + beta1^2 * lam * sigma_u2))

    with ``mu`` the conditional mean. With ``sigma_u2 == 0`` this is the
    plain probit response at ``m_star``.
    """
    if c not in (0, 1):
        raise InvalidArgumentError(f"c must be 0 or 1, got {c!r}")
    if not isfinite(m_star):
        raise InvalidArgumentError(f"m_star must be finite, got {m_star!r}")
    cond = conditional_mediator_given_measurement(m_star, c, alpha, adj.lam, adj.sigma_u2)
    mu = adj.beta0 + adj.beta1 * cond.mean + adj.beta2 * c
    return probit_normal_integral(mu, abs(adj.beta1) * cond.sd)
