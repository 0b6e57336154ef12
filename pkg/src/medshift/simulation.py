"""Synthetic-data generator and Monte-Carlo study driver.

Scenarios mirror the two persistence-measure settings used throughout:
a mediator that is normal given the binary common cause, an additive
normal measurement error, left-censoring of the *measured* value at the
assay limit, and a probit outcome driven by the *true* mediator.

The study driver fits each replicate once, then evaluates the corrected
and uncorrected effect estimates with delta-method intervals at every
shift, and aggregates bias, root-mean-square error, and coverage against
the closed-form true effect. Replicates that fail (non-convergence,
infeasible correction) are excluded and reported, never retried: retrying
would condition on the estimate and bias coverage.

Replicates run embarrassingly parallel on child seeds spawned from the
study seed; aggregation is by replicate index, so results are identical
for any worker count.
"""

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .data import Dataset, empirical_common_cause_dist
from .effects import indirect_effect
from .errors import InvalidArgumentError, MedshiftError, StudyError
from .inference import delta_ci
from .likelihood import fit_mle
from .measurement_error import AdjustedParams
from .simulation_defaults import CARNA_DEFAULTS, SCA_DEFAULTS

__all__ = [
    "SimScenario",
    "StudyRow",
    "SimStudyResult",
    "carna_scenario",
    "sca_scenario",
    "true_indirect_effect",
    "generate_dataset",
    "run_study",
    "write_study_csv",
]

MODES = ("adjusted", "ignored")


@dataclass(frozen=True)
class SimScenario:
    """Generating truth for one simulated setting."""

    label: str
    alpha: tuple
    sigma_m: float
    sigma_u: float
    beta: tuple
    p_c1: float
    n: int
    assay_limit: float
    shifts: tuple = (0.5, 1.0, 1.5, 2.0)

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(v) for v in self.alpha))
        object.__setattr__(self, "beta", tuple(float(v) for v in self.beta))
        object.__setattr__(self, "shifts", tuple(float(v) for v in self.shifts))
        if len(self.alpha) != 2 or len(self.beta) != 3:
            raise InvalidArgumentError("alpha must have 2 entries and beta 3")
        if self.sigma_m <= 0:
            raise InvalidArgumentError(f"sigma_m must be > 0, got {self.sigma_m}")
        if self.sigma_u < 0:
            raise InvalidArgumentError(f"sigma_u must be >= 0, got {self.sigma_u}")
        if not (0.0 <= self.p_c1 <= 1.0):
            raise InvalidArgumentError(f"p_c1 must lie in [0, 1], got {self.p_c1}")
        if self.n < 10:
            raise InvalidArgumentError(f"n must be >= 10, got {self.n}")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "alpha": list(self.alpha),
            "sigma_m": self.sigma_m,
            "sigma_u": self.sigma_u,
            "beta": list(self.beta),
            "p_c1": self.p_c1,
            "n": self.n,
            "assay_limit": self.assay_limit,
            "shifts": list(self.shifts),
        }

    @classmethod
    def from_dict(cls, d) -> "SimScenario":
        try:
            return cls(
                label=d["label"],
                alpha=tuple(d["alpha"]),
                sigma_m=d["sigma_m"],
                sigma_u=d["sigma_u"],
                beta=tuple(d["beta"]),
                p_c1=d["p_c1"],
                n=d["n"],
                assay_limit=d["assay_limit"],
                shifts=tuple(d.get("shifts", (0.5, 1.0, 1.5, 2.0))),
            )
        except KeyError as exc:
            raise InvalidArgumentError(f"scenario file missing key {exc}") from None


def carna_scenario(n=104, assay_limit=None, shifts=(0.5, 1.0, 1.5, 2.0)) -> SimScenario:
    """Cell-associated RNA setting; default limit log10(92)."""
    d = dict(CARNA_DEFAULTS)
    if assay_limit is not None:
        d["assay_limit"] = float(assay_limit)
    return SimScenario(n=n, shifts=shifts, **d)


def sca_scenario(n=88, assay_limit=None, shifts=(0.5, 1.0, 1.5, 2.0)) -> SimScenario:
    """Single-copy plasma RNA setting; default limit log10(1) = 0."""
    d = dict(SCA_DEFAULTS)
    if assay_limit is not None:
        d["assay_limit"] = float(assay_limit)
    return SimScenario(n=n, shifts=shifts, **d)


def _true_adjusted(scenario) -> AdjustedParams:
    sm2 = scenario.sigma_m ** 2
    su2 = scenario.sigma_u ** 2
    return AdjustedParams(
        beta0=scenario.beta[0],
        beta1=scenario.beta[1],
        beta2=scenario.beta[2],
        sigma_m2=sm2,
        lam=sm2 / (sm2 + su2),
        sigma_u2=su2,
    )


def true_indirect_effect(scenario, xi) -> float:
    """Closed-form indirect effect at the scenario's generating truth."""
    pc = np.array([1.0 - scenario.p_c1, scenario.p_c1])
    return indirect_effect(_true_adjusted(scenario), scenario.alpha, pc, xi).indirect


def generate_dataset(scenario, seed) -> Dataset:
    """One synthetic sample.

    The common cause is set to exactly ``round(n * p_c1)`` ones (the
    target population mix is fixed, not resampled). The outcome depends on
    the true mediator; censoring applies to the measured value. A fixed
    seed gives a byte-identical dataset.
    """
    rng = np.random.default_rng(seed)
    n = scenario.n
    n1 = int(round(n * scenario.p_c1))
    c = np.concatenate([np.ones(n1), np.zeros(n - n1)])
    a0, a1 = scenario.alpha
    m_true = rng.normal(a0 + a1 * c, scenario.sigma_m)
    noise = rng.normal(0.0, scenario.sigma_u, size=n)
    m_obs = m_true + noise
    b0, b1, b2 = scenario.beta
    y = rng.binomial(1, ndtr(b0 + b1 * m_true + b2 * c))
    m_star = [None if v <= scenario.assay_limit else float(v) for v in m_obs]
    return Dataset.from_columns(
        y=[int(v) for v in y],
        m_star=m_star,
        assay_limit=[scenario.assay_limit] * n,
        c=[int(v) for v in c],
        sigma_u=scenario.sigma_u,
        label=scenario.label,
    )


@dataclass(frozen=True)
class StudyRow:
    """Aggregated metrics for one (scenario, mode, shift) cell.

    All effect quantities are probability differences (fractions, not
    percent); ``rmse >= |mean_bias|`` by construction.
    """

    label: str
    n: int
    mode: str
    shift: float
    true_effect: float
    mean_bias: float
    rmse: float
    coverage: float
    n_failed: int
    reps_used: int


@dataclass
class SimStudyResult:
    rows: list
    reps: int
    seed: int
    estimates: dict = field(default_factory=dict)


def _study_replicate(args):
    scenario, child_seed, modes, n_nodes, level = args
    cells = {}
    try:
        data = generate_dataset(scenario, child_seed)
        fit = fit_mle(data, n_nodes=n_nodes)
        pc = empirical_common_cause_dist(data)
    except MedshiftError:
        return {(mode, xi): None for mode in modes for xi in scenario.shifts}
    for mode in modes:
        sigma_u2 = scenario.sigma_u ** 2 if mode == "adjusted" else 0.0
        for xi in scenario.shifts:
            try:
                est = delta_ci(fit, sigma_u2, pc, xi, level=level)
                cells[(mode, xi)] = (est.point, est.ci_low, est.ci_high)
            except MedshiftError:
                cells[(mode, xi)] = None
    return cells


def run_study(
    scenarios,
    reps,
    seed=0,
    modes=MODES,
    n_nodes=64,
    level=0.95,
    n_jobs=1,
    keep_estimates=False,
) -> SimStudyResult:
    """Monte-Carlo evaluation of the effect estimators.

    Parameters
    ----------
    scenarios : iterable of SimScenario
    reps : int
        Replicates per scenario (>= 50).
    modes : subset of ("adjusted", "ignored")
        "adjusted" corrects for measurement error; "ignored" evaluates the
        same fit without the correction.
    keep_estimates : bool
        Also return per-replicate point estimates (NaN where failed),
        keyed by (label, mode, shift).
    """
    if reps < 50:
        raise InvalidArgumentError(f"run_study needs reps >= 50, got {reps}")
    for mode in modes:
        if mode not in MODES:
            raise InvalidArgumentError(f"unknown mode {mode!r}; expected subset of {MODES}")
    scenarios = list(scenarios)
    rows = []
    estimates = {}
    root = np.random.SeedSequence(seed)
    per_scenario_seeds = root.spawn(len(scenarios))
    for scenario, scen_seed in zip(scenarios, per_scenario_seeds):
        children = scen_seed.spawn(reps)
        tasks = [(scenario, child, tuple(modes), n_nodes, level) for child in children]
        if n_jobs == 1:
            replicate_cells = [_study_replicate(t) for t in tasks]
        else:
            workers = n_jobs if n_jobs > 0 else (os.cpu_count() or 1)
            with ProcessPoolExecutor(max_workers=workers) as pool:
                replicate_cells = list(pool.map(_study_replicate, tasks, chunksize=4))
        any_used = False
        for mode in modes:
            for xi in scenario.shifts:
                truth = true_indirect_effect(scenario, xi)
                points, covered = [], []
                per_rep = np.full(reps, np.nan)
                for r, cells in enumerate(replicate_cells):
                    cell = cells.get((mode, xi))
                    if cell is None:
                        continue
                    point, lo, hi = cell
                    points.append(point)
                    covered.append(lo <= truth <= hi)
                    per_rep[r] = point
                used = len(points)
                if used:
                    any_used = True
                    points = np.array(points)
                    bias = float(points.mean() - truth)
                    rmse = float(np.sqrt(np.mean((points - truth) ** 2)))
                    coverage = float(np.mean(covered))
                else:
                    bias = rmse = coverage = np.nan
                rows.append(
                    StudyRow(
                        label=scenario.label,
                        n=scenario.n,
                        mode=mode,
                        shift=xi,
                        true_effect=truth,
                        mean_bias=bias,
                        rmse=rmse,
                        coverage=coverage,
                        n_failed=reps - used,
                        reps_used=used,
                    )
                )
                if keep_estimates:
                    estimates[(scenario.label, mode, xi)] = per_rep
        if not any_used:
            raise StudyError(f"all {reps} replicates failed for scenario {scenario.label!r}")
    return SimStudyResult(rows=rows, reps=reps, seed=seed, estimates=estimates)


_CSV_COLUMNS = (
    "label",
    "n",
    "mode",
    "shift",
    "true_effect",
    "mean_bias",
    "rmse",
    "coverage",
    "n_failed",
    "reps_used",
)


def write_study_csv(result, path) -> None:
    """Study table as CSV, one row per (scenario, mode, shift), full precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for row in result.rows:
            writer.writerow([repr(getattr(row, col)) if isinstance(getattr(row, col), float)
                             else getattr(row, col) for col in _CSV_COLUMNS])


def write_estimates_csv(result, path) -> None:
    """Per-replicate estimates (long format) for external plotting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "mode", "shift", "replicate", "estimate"])
        for (label, mode, xi), values in sorted(result.estimates.items()):
            for r, v in enumerate(values):
                writer.writerow([label, mode, repr(xi), r, "" if np.isnan(v) else repr(float(v))])
