"""Closed-form indirect effect of a leftward mediator shift.

The estimand: how much does the expected outcome change if the mediator
distribution is shifted left by ``xi`` on the log10 scale while the
outcome mechanism keeps its no-treatment law. Averaging the probit
response over the shifted normal mediator gives, per common-cause level
``c``::

    E[Y | shift xi] = sum_c Phi((beta0 + beta1*(alpha0 + alpha1*c - xi) + beta2*c)
                                / sqrt(1 + (beta1*sigma_m)^2)) * P(C=c)

and the indirect effect is the difference between ``xi`` and no shift.
``P(C=c)`` is a plug-in constant fixing the target population; it carries
no sampling variance downstream.
"""

from dataclasses import dataclass
from math import isfinite, sqrt

import numpy as np

from .distributions import std_normal_cdf
from .errors import InvalidArgumentError
from .measurement_error import AdjustedParams

__all__ = [
    "EffectPoint",
    "expected_outcome_under_shift",
    "indirect_effect",
    "indirect_effect_unadjusted",
]


@dataclass(frozen=True)
class EffectPoint:
    """Expected outcomes with and without the shift, and their difference."""

    ey0_shifted: float
    ey0: float
    indirect: float

    def __post_init__(self):
        if not (0.0 <= self.ey0_shifted <= 1.0 and 0.0 <= self.ey0 <= 1.0):
            raise InvalidArgumentError("expected outcomes must lie in [0, 1]")


def _check_pc(pc):
    pc = np.asarray(pc, dtype=float)
    if pc.shape != (2,):
        raise InvalidArgumentError(f"pc must be a length-2 probability table, got shape {pc.shape}")
    if np.any(pc < 0) or abs(float(pc.sum()) - 1.0) > 1e-9:
        raise InvalidArgumentError(f"pc must be nonnegative and sum to 1, got {pc!r}")
    return pc


def _check_xi(xi):
    if not isfinite(xi):
        raise InvalidArgumentError(f"shift must be finite, got {xi!r}")
    return float(xi)


def expected_outcome_under_shift(adj, alpha, pc, xi) -> float:
    """Expected outcome after shifting the mediator left by ``xi``.

    ``xi = 0`` gives the no-treatment expectation.
    """
    pc = _check_pc(pc)
    xi = _check_xi(xi)
    a0, a1 = alpha
    denom = sqrt(1.0 + (adj.beta1 ** 2) * adj.sigma_m2)
    total = 0.0
    for c in (0, 1):
        arg = (adj.beta0 + adj.beta1 * (a0 + a1 * c - xi) + adj.beta2 * c) / denom
        total += std_normal_cdf(arg) * pc[c]
    return float(total)


def indirect_effect(adj, alpha, pc, xi) -> EffectPoint:
    """Indirect effect of a leftward shift ``xi``, on the probability scale."""
    shifted = expected_outcome_under_shift(adj, alpha, pc, xi)
    base = expected_outcome_under_shift(adj, alpha, pc, 0.0)
    return EffectPoint(ey0_shifted=shifted, ey0=base, indirect=shifted - base)


def indirect_effect_unadjusted(star, pc, xi) -> EffectPoint:
    """Indirect effect ignoring measurement error.

    Evaluates the same closed form with the observed-scale coefficients and
    observed-mediator variance in place of the corrected ones; exists for
    side-by-side comparison with the corrected estimate. Identical to the
    adjusted effect when ``sigma_u = 0``.
    """
    pseudo = AdjustedParams(
        beta0=star.beta0_star,
        beta1=star.beta1_star,
        beta2=star.beta2_star,
        sigma_m2=star.sigma_mstar2,
        lam=1.0,
        sigma_u2=0.0,
    )
    return indirect_effect(pseudo, (star.alpha0, star.alpha1), pc, xi)
