"""Exception hierarchy for medshift.

Every error carries a stable ``slug`` used by the CLI for one-line
machine-parsable reasons and exit-code mapping: validation problems exit 2,
numerical failures exit 3.
"""


class MedshiftError(Exception):
    """Base class for all medshift errors."""

    slug = "error"
    exit_code = 1


class InvalidArgumentError(MedshiftError, ValueError):
    """An argument violates a documented precondition."""

    slug = "invalid-argument"
    exit_code = 2


class DataValidationError(MedshiftError, ValueError):
    """Input data failed validation (bad CSV field, degenerate outcome column, ...)."""

    slug = "data-validation"
    exit_code = 2


class FarTailError(MedshiftError, ArithmeticError):
    """Truncated-normal sampling requested so deep in the tail that the
    truncation probability underflows to zero."""

    slug = "far-tail"
    exit_code = 3


class InfeasibleErrorVarianceError(MedshiftError, ValueError):
    """The supplied measurement-error variance is at least as large as the
    fitted observed-mediator variance, so no positive true-mediator variance
    exists."""

    slug = "infeasible-error-variance"
    exit_code = 3


class IdentifiabilityBoundaryError(MedshiftError, ArithmeticError):
    """The measurement-error correction has no real solution at these
    parameter values (lambda^2 - beta1*^2 * lambda * sigma_u^2 <= 0)."""

    slug = "identifiability-boundary"
    exit_code = 3


class InitError(MedshiftError, RuntimeError):
    """Starting values could not be derived from the data."""

    slug = "init-failure"
    exit_code = 3


class EvaluationError(MedshiftError, ArithmeticError):
    """The log-likelihood evaluated to a non-finite value."""

    slug = "evaluation-failure"
    exit_code = 3


class FitNotConvergedError(MedshiftError, RuntimeError):
    """An operation requiring a converged fit was given a non-converged one."""

    slug = "non-convergence"
    exit_code = 3


class SingularInformationError(MedshiftError, ArithmeticError):
    """The observed information matrix is singular or not positive definite."""

    slug = "singular-information"
    exit_code = 3

    def __init__(self, msg, null_direction=None):
        super().__init__(msg)
        self.null_direction = null_direction


class BootstrapError(MedshiftError, RuntimeError):
    """Too many bootstrap replicates failed to produce a usable interval."""

    slug = "bootstrap-failure"
    exit_code = 3


class StudyError(MedshiftError, RuntimeError):
    """A simulation study produced no usable replicates."""

    slug = "study-failure"
    exit_code = 3
