"""medshift: indirect effects of hypothesized mediator shifts when the
mediator is left-censored at an assay limit and measured with additive
normal error.

The pipeline: censored maximum-likelihood fit of the mediator and probit
outcome models (`fit_mle`), closed-form measurement-error correction
(`adjust`), closed-form indirect effect of a leftward shift
(`indirect_effect`), delta-method or bootstrap intervals (`delta_ci`,
`bootstrap_ci`), a plug-in comparator (`plugin_indirect_effect`), and a
Monte-Carlo study harness (`run_study`).
"""

__version__ = "0.1.0"

from .data import Dataset, Record, empirical_common_cause_dist, load_csv, save_csv
from .distributions import (
    NormalSpec,
    conditional_mediator_given_measurement,
    probit_normal_integral,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    truncated_normal_sample,
)
from .effects import (
    EffectPoint,
    expected_outcome_under_shift,
    indirect_effect,
    indirect_effect_unadjusted,
)
from .errors import (
    BootstrapError,
    DataValidationError,
    EvaluationError,
    FarTailError,
    FitNotConvergedError,
    IdentifiabilityBoundaryError,
    InfeasibleErrorVarianceError,
    InitError,
    InvalidArgumentError,
    MedshiftError,
    SingularInformationError,
    StudyError,
)
from .inference import EffectEstimate, bootstrap_ci, delta_ci, effect_gradient
from .likelihood import (
    PARAM_ORDER,
    FitResult,
    StarParams,
    censored_log_integral,
    default_init,
    fit_mle,
    log_likelihood,
)
from .measurement_error import (
    AdjustedParams,
    adjust,
    forward_star,
    outcome_prob_given_measurement,
    reliability,
)
from .plugin import PluginConfig, fit_logit_censored, plugin_indirect_effect
from .simulation import (
    SimScenario,
    SimStudyResult,
    StudyRow,
    carna_scenario,
    generate_dataset,
    run_study,
    sca_scenario,
    true_indirect_effect,
)

__all__ = [
    "__version__",
    # data
    "Record", "Dataset", "load_csv", "save_csv", "empirical_common_cause_dist",
    # distributions
    "NormalSpec", "std_normal_pdf", "std_normal_cdf", "std_normal_quantile",
    "probit_normal_integral", "conditional_mediator_given_measurement",
    "truncated_normal_sample",
    # likelihood
    "PARAM_ORDER", "StarParams", "FitResult", "log_likelihood",
    "censored_log_integral", "default_init", "fit_mle",
    # measurement error
    "AdjustedParams", "reliability", "forward_star", "adjust",
    "outcome_prob_given_measurement",
    # effects
    "EffectPoint", "expected_outcome_under_shift", "indirect_effect",
    "indirect_effect_unadjusted",
    # inference
    "EffectEstimate", "effect_gradient", "delta_ci", "bootstrap_ci",
    # plugin comparator
    "PluginConfig", "fit_logit_censored", "plugin_indirect_effect",
    # simulation
    "SimScenario", "StudyRow", "SimStudyResult", "carna_scenario", "sca_scenario",
    "true_indirect_effect", "generate_dataset", "run_study",
    # errors
    "MedshiftError", "InvalidArgumentError", "DataValidationError", "FarTailError",
    "InfeasibleErrorVarianceError", "IdentifiabilityBoundaryError", "InitError",
    "EvaluationError", "FitNotConvergedError", "SingularInformationError",
    "BootstrapError", "StudyError",
]
