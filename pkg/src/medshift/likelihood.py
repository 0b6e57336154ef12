"""Observed-data likelihood for a left-censored mediator and binary outcome.

Each record contributes either an uncensored term (probit/logit outcome
term plus a normal density for the measured mediator) or, when the
measurement fell below its assay limit, the log of an integral of the
outcome term against the mediator density over the censored region.

The censored integral is evaluated on the standardized scale
``t = (m - mu_c) / sigma`` with fixed-order Gauss-Legendre nodes on
``[-8, min(u, 8)]`` where ``u = (AL - mu_c) / sigma``; normal mass outside
``|t| > 8`` is below 1.3e-15 so the window truncation is harmless, and a
node-doubling self-check belongs in the test suite. When ``u <= -8`` the
model puts essentially no mass below the limit and the integral is clamped
to a 1e-300 floor (occurrences are counted and surfaced on the fit).

Maximization runs on the unconstrained coordinates
``(alpha0, alpha1, log sigma, beta0*, beta1*, beta2*)`` by quasi-Newton
iteration with central-difference gradients. The reported observed
information is the negative Hessian of the per-record mean log-likelihood,
chain-ruled from the log-sigma coordinate to the variance coordinate, in
the fixed parameter order ``(alpha0, alpha1, sigma_mstar2, beta0*, beta1*,
beta2*)``.

Per-record terms are evaluated vectorized and summed in numpy's fixed
pairwise order, so results do not depend on evaluation scheduling; the
optimizer loop itself is single-threaded.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import minimize
from scipy.special import expit, log_expit, log_ndtr, ndtr

from .errors import EvaluationError, InitError, InvalidArgumentError

__all__ = [
    "PARAM_ORDER",
    "StarParams",
    "FitResult",
    "log_likelihood",
    "censored_log_integral",
    "default_init",
    "fit_mle",
]

PARAM_ORDER = ("alpha0", "alpha1", "sigma_mstar2", "beta0_star", "beta1_star", "beta2_star")

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
_INTEGRAL_FLOOR = 1e-300
_T_WINDOW = 8.0
# Converged means the central-difference gradient of the mean log-likelihood
# satisfies this at the reported optimum (unconstrained scale).
_GRAD_TOL = 1e-4

_GL_CACHE = {}


def _gl_nodes(n_nodes):
    if n_nodes not in _GL_CACHE:
        _GL_CACHE[n_nodes] = leggauss(n_nodes)
    return _GL_CACHE[n_nodes]


@dataclass(frozen=True)
class StarParams:
    """Observed-scale model parameters.

    Mediator mean ``alpha0 + alpha1*c`` with variance ``sigma_mstar2``;
    outcome linear predictor ``beta0_star + beta1_star*m + beta2_star*c``.
    """

    alpha0: float
    alpha1: float
    sigma_mstar2: float
    beta0_star: float
    beta1_star: float
    beta2_star: float

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise InvalidArgumentError(f"parameters must be finite, got {self}")
        if self.sigma_mstar2 <= 0:
            raise InvalidArgumentError(f"sigma_mstar2 must be > 0, got {self.sigma_mstar2}")

    def as_array(self) -> np.ndarray:
        """Values in the canonical order ``PARAM_ORDER``."""
        return np.array(
            [
                self.alpha0,
                self.alpha1,
                self.sigma_mstar2,
                self.beta0_star,
                self.beta1_star,
                self.beta2_star,
            ]
        )

    @classmethod
    def from_array(cls, arr) -> "StarParams":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (6,):
            raise InvalidArgumentError(f"expected 6 parameters, got shape {arr.shape}")
        return cls(*arr)


@dataclass
class FitResult:
    """Maximum-likelihood fit with observed information.

    ``info_matrix`` is per-record scaled (divide its inverse by n for the
    parameter covariance); ``converged`` certifies the gradient criterion;
    ``n_underflow`` counts censored integrals clamped at the floor when
    evaluated at the optimum.
    """

    params: StarParams
    loglik: float
    info_matrix: np.ndarray
    converged: bool
    n_used: int
    link: str = "probit"
    grad_max: float = np.nan
    n_underflow: int = 0
    info_psd: bool = True
    n_iter: int = 0
    message: str = ""


def _links(link):
    if link == "probit":
        return ndtr, log_ndtr, lambda x: log_ndtr(-x)
    if link == "logit":
        return expit, log_expit, lambda x: log_expit(-x)
    raise InvalidArgumentError(f"link must be 'probit' or 'logit', got {link!r}")


@dataclass
class _Prepared:
    n: int
    y_det: np.ndarray
    m_det: np.ndarray
    c_det: np.ndarray
    grp_y: np.ndarray
    grp_c: np.ndarray
    grp_al: np.ndarray
    grp_count: np.ndarray


def _prepare(dataset) -> _Prepared:
    arr = dataset.arrays
    det = arr["detected"]
    cen = ~det
    if np.any(cen):
        rows = np.column_stack([arr["y"][cen], arr["c"][cen], arr["assay_limit"][cen]])
        uniq, counts = np.unique(rows, axis=0, return_counts=True)
        grp_y, grp_c, grp_al = uniq[:, 0], uniq[:, 1], uniq[:, 2]
        grp_count = counts.astype(float)
    else:
        grp_y = grp_c = grp_al = grp_count = np.empty(0)
    return _Prepared(
        n=dataset.n,
        y_det=arr["y"][det],
        m_det=arr["m_star"][det],
        c_det=arr["c"][det],
        grp_y=grp_y,
        grp_c=grp_c,
        grp_al=grp_al,
        grp_count=grp_count,
    )


def _mean_loglik(prep, theta_int, link, n_nodes):
    """Mean log-likelihood at unconstrained coordinates; returns
    (value, n_underflow)."""
    cdf, logcdf, logsf = _links(link)
    a0, a1, log_s, b0, b1, b2 = theta_int
    s = np.exp(log_s)
    total = 0.0
    if prep.y_det.size:
        eta = b0 + b1 * prep.m_det + b2 * prep.c_det
        total += float(np.sum(prep.y_det * logcdf(eta) + (1.0 - prep.y_det) * logsf(eta)))
        resid = prep.m_det - (a0 + a1 * prep.c_det)
        total += float(np.sum(-_LOG_SQRT_2PI - log_s - resid * resid / (2.0 * s * s)))
    n_underflow = 0
    if prep.grp_y.size:
        gl_x, gl_w = _gl_nodes(n_nodes)
        mu = a0 + a1 * prep.grp_c
        u = (prep.grp_al - mu) / s
        hi = np.minimum(u, _T_WINDOW)
        half = np.maximum((hi + _T_WINDOW) / 2.0, 0.0)
        mid = (hi - _T_WINDOW) / 2.0
        t = mid[:, None] + half[:, None] * gl_x[None, :]
        w = half[:, None] * gl_w[None, :]
        eta = b0 + b1 * (mu[:, None] + s * t) + b2 * prep.grp_c[:, None]
        p = cdf(eta)
        outcome = np.where(prep.grp_y[:, None] == 1.0, p, 1.0 - p)
        integral = np.sum(outcome * np.exp(-0.5 * t * t) * _INV_SQRT_2PI * w, axis=1)
        floored = integral < _INTEGRAL_FLOOR
        if np.any(floored):
            n_underflow = int(np.sum(prep.grp_count[floored]))
            integral = np.maximum(integral, _INTEGRAL_FLOOR)
        total += float(np.sum(prep.grp_count * np.log(integral)))
    return total / prep.n, n_underflow


def log_likelihood(dataset, params, link="probit", n_nodes=64) -> float:
    """Total observed-data log-likelihood of ``params`` on ``dataset``.

    Raises
    ------
    EvaluationError
        If the value is non-finite at these parameters.
    """
    if isinstance(params, StarParams):
        arr = params.as_array()
    else:
        arr = StarParams.from_array(params).as_array()
    theta_int = _to_internal(arr)
    prep = _prepare(dataset)
    value, n_underflow = _mean_loglik(prep, theta_int, link, n_nodes)
    if n_underflow:
        warnings.warn(
            f"{n_underflow} censored integral(s) clamped at the underflow floor",
            RuntimeWarning,
            stacklevel=2,
        )
    total = value * prep.n
    if not np.isfinite(total):
        raise EvaluationError(f"log-likelihood is non-finite at {params}")
    return total


def censored_log_integral(y, c, assay_limit, params, link="probit", n_nodes=64) -> float:
    """Log contribution of a single censored record.

    Exposed for oracle comparisons: equals the log of the outcome term
    integrated against the mediator density below the assay limit.
    """
    cdf, _, _ = _links(link)
    s = np.sqrt(params.sigma_mstar2)
    mu = params.alpha0 + params.alpha1 * c
    u = (assay_limit - mu) / s
    hi = min(u, _T_WINDOW)
    if hi <= -_T_WINDOW:
        return float(np.log(_INTEGRAL_FLOOR))
    gl_x, gl_w = _gl_nodes(n_nodes)
    half = (hi + _T_WINDOW) / 2.0
    mid = (hi - _T_WINDOW) / 2.0
    t = mid + half * gl_x
    eta = params.beta0_star + params.beta1_star * (mu + s * t) + params.beta2_star * c
    p = cdf(eta)
    outcome = p if y == 1 else 1.0 - p
    integral = float(np.sum(outcome * np.exp(-0.5 * t * t) * _INV_SQRT_2PI * gl_w * half))
    return float(np.log(max(integral, _INTEGRAL_FLOOR)))


def _to_internal(arr):
    out = arr.copy()
    out[2] = 0.5 * np.log(arr[2])
    return out


def _to_natural(theta_int):
    out = theta_int.copy()
    out[2] = np.exp(2.0 * theta_int[2])
    return out


def _fd_gradient(fn, theta):
    grad = np.empty_like(theta)
    for i in range(theta.size):
        h = max(1e-6, 1e-6 * abs(theta[i]))
        up = theta.copy()
        up[i] += h
        dn = theta.copy()
        dn[i] -= h
        grad[i] = (fn(up) - fn(dn)) / (2.0 * h)
    return grad


def _fd_hessian(fn, theta, rel_step=1e-4):
    k = theta.size
    hs = np.array([rel_step * max(1.0, abs(v)) for v in theta])
    hess = np.empty((k, k))
    f0 = fn(theta)
    for i in range(k):
        up = theta.copy()
        up[i] += hs[i]
        dn = theta.copy()
        dn[i] -= hs[i]
        hess[i, i] = (fn(up) - 2.0 * f0 + fn(dn)) / (hs[i] * hs[i])
        for j in range(i + 1, k):
            pp = theta.copy()
            pp[[i, j]] += hs[[i, j]]
            pm = theta.copy()
            pm[i] += hs[i]
            pm[j] -= hs[j]
            mp = theta.copy()
            mp[i] -= hs[i]
            mp[j] += hs[j]
            mm = theta.copy()
            mm[[i, j]] -= hs[[i, j]]
            hess[i, j] = hess[j, i] = (fn(pp) - fn(pm) - fn(mp) + fn(mm)) / (4.0 * hs[i] * hs[j])
    return hess


def _glm_fit(y, m, c, link):
    """Plain (uncensored-formula) GLM fit of y on (1, m, c); used only for
    starting values, with a safe fallback on any numerical failure."""
    _, logcdf, logsf = _links(link)
    ybar = min(max(float(np.mean(y)), 1e-3), 1 - 1e-3)
    if link == "probit":
        from scipy.special import ndtri

        intercept = float(ndtri(ybar))
    else:
        intercept = float(np.log(ybar / (1.0 - ybar)))
    fallback = np.array([intercept, 0.0, 0.0])
    X = np.column_stack([np.ones_like(m), m, c])

    def nll(beta):
        eta = X @ beta
        val = -np.mean(y * logcdf(eta) + (1.0 - y) * logsf(eta))
        return val if np.isfinite(val) else 1e15

    try:
        res = minimize(nll, fallback, method="BFGS", options={"maxiter": 200, "gtol": 1e-8})
        beta = res.x
    except (ValueError, FloatingPointError):  # pragma: no cover - defensive
        return fallback
    if not np.all(np.isfinite(beta)) or np.max(np.abs(beta)) > 50:
        return fallback
    return beta


def default_init(dataset, link="probit") -> StarParams:
    """Starting values from detected-record moments plus a GLM fit with
    censored records imputed at their assay limit.

    The imputation is used only here; the likelihood itself integrates the
    censored region.
    """
    arr = dataset.arrays
    det = arr["detected"]
    n_det = int(det.sum())
    if n_det < 3:
        raise InitError(f"need at least 3 detected records to initialize, have {n_det}")
    m_det = arr["m_star"][det]
    c_det = arr["c"][det]
    groups = [m_det[c_det == v] for v in (0.0, 1.0)]
    if all(g.size for g in groups):
        alpha0 = float(groups[0].mean())
        alpha1 = float(groups[1].mean()) - alpha0
        resid = np.concatenate([g - g.mean() for g in groups])
        dof = max(1, n_det - 2)
    else:
        alpha0 = float(m_det.mean())
        alpha1 = 0.0
        resid = m_det - alpha0
        dof = max(1, n_det - 1)
    var = float(np.sum(resid * resid) / dof)
    if var <= 0:
        raise InitError("detected mediator values have zero variance")
    m_imputed = arr["m_star"].copy()
    m_imputed[~det] = arr["assay_limit"][~det]
    beta = _glm_fit(arr["y"], m_imputed, arr["c"], link)
    return StarParams(
        alpha0=alpha0,
        alpha1=alpha1,
        sigma_mstar2=var,
        beta0_star=float(beta[0]),
        beta1_star=float(beta[1]),
        beta2_star=float(beta[2]),
    )


def fit_mle(dataset, init=None, link="probit", n_nodes=64, max_iter=500) -> FitResult:
    """Maximize the observed-data likelihood.

    Parameters
    ----------
    dataset : Dataset
    init : StarParams, optional
        Starting values; derived from the data when omitted.
    link : {"probit", "logit"}
        Outcome link. The logit path exists for the plug-in comparator and
        cannot be measurement-error adjusted downstream.
    n_nodes : int
        Gauss-Legendre order for censored integrals.
    max_iter : int
        Quasi-Newton iteration cap (one silent restart on a stalled line
        search does not count against it).

    Returns
    -------
    FitResult
        ``converged`` is False (never an exception) when the gradient
        criterion is not met; downstream CI code refuses such fits.
    """
    prep = _prepare(dataset)
    if init is None:
        init = default_init(dataset, link)
    theta0 = _to_internal(init.as_array())

    def objective(theta):
        value, _ = _mean_loglik(prep, theta, link, n_nodes)
        return -value if np.isfinite(value) else 1e15

    def gradient(theta):
        return _fd_gradient(objective, theta)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(
            objective,
            theta0,
            jac=gradient,
            method="BFGS",
            options={"gtol": 1e-6, "maxiter": max_iter},
        )
        theta = res.x
        n_iter = int(res.nit)
        grad_max = float(np.max(np.abs(gradient(theta))))
        if grad_max >= _GRAD_TOL:
            # BFGS line searches can stall on finite-difference noise; a
            # restart rebuilds the Hessian approximation from scratch.
            res2 = minimize(
                objective,
                theta,
                jac=gradient,
                method="BFGS",
                options={"gtol": 1e-6, "maxiter": max_iter},
            )
            if res2.fun <= res.fun:
                res = res2
                theta = res.x
                grad_max = float(np.max(np.abs(gradient(theta))))
                n_iter += int(res.nit)

    converged = bool(grad_max < _GRAD_TOL)
    mean_ll, n_underflow = _mean_loglik(prep, theta, link, n_nodes)
    total_ll = mean_ll * prep.n
    if not np.isfinite(total_ll):
        raise EvaluationError("log-likelihood non-finite at the reported optimum")

    # Observed information: Hessian of the negative mean log-likelihood at
    # the optimum in internal coordinates, chain-ruled to the natural
    # coordinates (variance in slot 2). The gradient term of the chain rule
    # is kept because the gradient is only approximately zero.
    hess_int = _fd_hessian(objective, theta)
    grad_int = _fd_gradient(objective, theta)
    sigma2 = float(np.exp(2.0 * theta[2]))
    jac_diag = np.ones(6)
    jac_diag[2] = 1.0 / (2.0 * sigma2)
    info = hess_int * np.outer(jac_diag, jac_diag)
    info[2, 2] -= grad_int[2] / (2.0 * sigma2 * sigma2)
    info = 0.5 * (info + info.T)
    eigvals = np.linalg.eigvalsh(info)
    info_psd = bool(eigvals.min() > -1e-10 * max(1.0, abs(eigvals.max())))

    return FitResult(
        params=StarParams.from_array(_to_natural(theta)),
        loglik=float(total_ll),
        info_matrix=info,
        converged=converged,
        n_used=prep.n,
        link=link,
        grad_max=grad_max,
        n_underflow=n_underflow,
        info_psd=info_psd,
        n_iter=n_iter,
        message=str(res.message),
    )
