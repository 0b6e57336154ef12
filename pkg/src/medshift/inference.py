"""Standard errors and confidence intervals for the indirect effect.

Two routes:

* Delta method: analytic gradient of the effect with respect to the fitted
  parameters, propagated through the inverse observed information.
* Nonparametric bootstrap: resample records with replacement, refit the
  full pipeline per replicate, take percentile endpoints.

The gradient is taken with respect to the *fitted* (observed-scale)
parameters in the fixed order ``(alpha0, alpha1, sigma_mstar2, beta0*,
beta1*, beta2*)``; the measurement-error inversion is differentiated
through in closed form rather than numerically. The common-cause
distribution is a plug-in constant and contributes nothing to the
gradient.

Bootstrap replicates are embarrassingly parallel; each draws its indices
from a child seed of ``(seed, replicate index)``, so results are identical
for any worker count, and percentiles are taken over the collected vector.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import empirical_common_cause_dist
from .distributions import std_normal_quantile
from .effects import _check_pc, _check_xi, indirect_effect
from .errors import (
    BootstrapError,
    FitNotConvergedError,
    InvalidArgumentError,
    MedshiftError,
    SingularInformationError,
)
from .likelihood import PARAM_ORDER, fit_mle
from .measurement_error import adjust, reliability

__all__ = ["EffectEstimate", "effect_gradient", "delta_ci", "bootstrap_ci"]

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class EffectEstimate:
    """Point estimate with standard error and confidence interval.

    ``ci_low``/``ci_high`` are the raw endpoints; the ``*_clipped``
    properties clamp them to the attainable [-1, 1] range for reporting.
    ``n_boot_failed`` counts dropped bootstrap replicates (0 for delta).
    """

    point: float
    se: float
    ci_low: float
    ci_high: float
    method: str
    level: float = 0.95
    n_boot_failed: int = 0

    def __post_init__(self):
        if not (0.0 < self.level < 1.0):
            raise InvalidArgumentError(f"level must lie in (0, 1), got {self.level}")
        if self.se < 0:
            raise InvalidArgumentError(f"se must be >= 0, got {self.se}")

    @property
    def ci_low_clipped(self) -> float:
        return max(self.ci_low, -1.0)

    @property
    def ci_high_clipped(self) -> float:
        return min(self.ci_high, 1.0)


def _grad_expected_outcome(star, sigma_u2, pc, xi):
    """Gradient of the shifted expected outcome w.r.t. the fitted parameters."""
    lam = reliability(star.sigma_mstar2, sigma_u2)
    sms2 = star.sigma_mstar2
    b0s, b1s, b2s = star.beta0_star, star.beta1_star, star.beta2_star
    q = np.sqrt(1.0 + b1s * b1s * sms2)
    grad = np.zeros(6)
    for c in (0, 1):
        mean_c = star.alpha0 + star.alpha1 * c
        lin = b0s + b1s * mean_c + b2s * c
        h = (lin - b1s * xi / lam) / q
        phi_h = np.exp(-0.5 * h * h) * _INV_SQRT_2PI
        d = np.empty(6)
        d[0] = b1s / q
        d[1] = b1s * c / q
        d[2] = b1s * xi * sigma_u2 / (lam * lam * sms2 * sms2 * q) - (
            lin - b1s * xi / lam
        ) * b1s * b1s / (2.0 * q ** 3)
        d[3] = 1.0 / q
        d[4] = ((mean_c - xi / lam) - b1s * sms2 * (b0s + b2s * c)) / q ** 3
        d[5] = c / q
        grad += phi_h * d * pc[c]
    return grad


def effect_gradient(star, sigma_u2, pc, xi) -> np.ndarray:
    """Gradient of the indirect effect w.r.t. the fitted parameters.

    Computed as the difference of the shifted-outcome gradients at ``xi``
    and at zero shift; identically zero when ``xi == 0``.

    Raises the same feasibility errors as the measurement-error correction
    when ``sigma_u2`` is incompatible with the fitted variance.
    """
    pc = _check_pc(pc)
    xi = _check_xi(xi)
    # Surface infeasible/boundary configurations exactly as the point
    # estimate would.
    adjust(star, sigma_u2)
    return _grad_expected_outcome(star, sigma_u2, pc, xi) - _grad_expected_outcome(
        star, sigma_u2, pc, 0.0
    )


def _point_estimate(star, sigma_u2, pc, xi) -> float:
    adj = adjust(star, sigma_u2)
    return indirect_effect(adj, (star.alpha0, star.alpha1), pc, xi).indirect


def delta_ci(fit, sigma_u2, pc, xi, level=0.95) -> EffectEstimate:
    """Delta-method interval for the indirect effect.

    ``sigma_u2 = 0`` yields the measurement-error-ignored estimate and its
    interval (the correction is then the identity).

    Raises
    ------
    FitNotConvergedError
        If the fit did not meet its gradient criterion.
    SingularInformationError
        If the observed information is singular or not positive definite;
        the message names the null direction.
    """
    if not fit.converged:
        raise FitNotConvergedError(
            "delta-method CI requires a converged fit "
            f"(gradient max {fit.grad_max:.2e} at the reported optimum)"
        )
    pc = _check_pc(pc)
    xi = _check_xi(xi)
    info = np.asarray(fit.info_matrix, dtype=float)
    eigvals, eigvecs = np.linalg.eigh(info)
    scale = max(1.0, float(abs(eigvals).max()))
    if not fit.info_psd or eigvals.min() <= 1e-12 * scale:
        null_dir = eigvecs[:, int(np.argmin(eigvals))]
        named = ", ".join(f"{n}={v:+.3f}" for n, v in zip(PARAM_ORDER, null_dir))
        raise SingularInformationError(
            f"observed information is singular along ({named})", null_direction=null_dir
        )
    point = _point_estimate(fit.params, sigma_u2, pc, xi)
    grad = effect_gradient(fit.params, sigma_u2, pc, xi)
    cov = np.linalg.solve(info * fit.n_used, grad)
    variance = float(grad @ cov)
    se = float(np.sqrt(max(variance, 0.0)))
    z = std_normal_quantile(1.0 - (1.0 - level) / 2.0)
    return EffectEstimate(
        point=point,
        se=se,
        ci_low=point - z * se,
        ci_high=point + z * se,
        method="delta",
        level=level,
    )


def _bootstrap_replicate(args):
    dataset, sigma_u2, xi, pc_fixed, link, n_nodes, init, child_seed = args
    rng = np.random.default_rng(child_seed)
    indices = rng.integers(0, dataset.n, size=dataset.n)
    try:
        sample = dataset.subset(indices)
        fit = fit_mle(sample, init=init, link=link, n_nodes=n_nodes)
        if not fit.converged:
            return None
        pc = pc_fixed if pc_fixed is not None else empirical_common_cause_dist(sample)
        return _point_estimate(fit.params, sigma_u2, pc, xi)
    except MedshiftError:
        return None


def bootstrap_ci(
    dataset,
    sigma_u2,
    xi,
    reps=2000,
    seed=0,
    pc_policy="fixed",
    level=0.95,
    link="probit",
    n_nodes=64,
    n_jobs=1,
) -> EffectEstimate:
    """Percentile bootstrap interval for the indirect effect.

    Resamples records with replacement and reruns fit + correction +
    effect per replicate. Replicates that fail (non-convergence,
    infeasible correction, degenerate resample) are dropped and counted.

    Parameters
    ----------
    pc_policy : {"fixed", "resample"}
        "fixed" (default) holds the common-cause distribution at its
        full-data value, matching a fixed target population; "resample"
        recomputes it per replicate.
    n_jobs : int
        Worker processes; results are independent of this value.

    Raises
    ------
    BootstrapError
        If more than 20% of replicates fail; the delta method is the
        recommended fallback in that regime.
    """
    if reps < 100:
        raise InvalidArgumentError(f"bootstrap needs reps >= 100, got {reps}")
    if pc_policy not in ("fixed", "resample"):
        raise InvalidArgumentError(f"pc_policy must be 'fixed' or 'resample', got {pc_policy!r}")
    xi = _check_xi(xi)
    pc_full = empirical_common_cause_dist(dataset)
    full_fit = fit_mle(dataset, link=link, n_nodes=n_nodes)
    if not full_fit.converged:
        raise FitNotConvergedError("full-data fit did not converge; no bootstrap point estimate")
    point = _point_estimate(full_fit.params, sigma_u2, pc_full, xi)

    pc_fixed = pc_full if pc_policy == "fixed" else None
    children = np.random.SeedSequence(seed).spawn(reps)
    tasks = [
        (dataset, sigma_u2, xi, pc_fixed, link, n_nodes, full_fit.params, child)
        for child in children
    ]
    if n_jobs == 1:
        results = [_bootstrap_replicate(t) for t in tasks]
    else:
        workers = n_jobs if n_jobs > 0 else (os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_bootstrap_replicate, tasks, chunksize=8))

    estimates = np.array([r for r in results if r is not None])
    n_failed = reps - estimates.size
    if n_failed > 0.2 * reps:
        raise BootstrapError(
            f"{n_failed}/{reps} bootstrap replicates failed; "
            "use the delta method for these data"
        )
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(np.sort(estimates), [100.0 * alpha, 100.0 * (1.0 - alpha)])
    return EffectEstimate(
        point=point,
        se=float(np.std(estimates, ddof=1)),
        ci_low=float(lo),
        ci_high=float(hi),
        method="bootstrap",
        level=level,
        n_boot_failed=int(n_failed),
    )
