"""Structured errors and warnings shared across the package.

Every error carries a stable ``kind`` tag so callers (and the CLI, which
prints failures as ``ERROR:<kind>:<message>``) can react without parsing
prose.  Validation problems, things wrong with input data or configuration
before any model is touched, exit with status 2; failures that occur during
a computation exit with status 1.
"""


class PanelCausalError(Exception):
    """Base class for all structured errors raised by this package."""

    kind = "Error"
    exit_code = 1


class ValidationError(PanelCausalError):
    """Malformed or inconsistent input data or configuration."""

    exit_code = 2


# ---------------------------------------------------------------------------
# data loading and design construction
# ---------------------------------------------------------------------------

class MissingRowError(ValidationError):
    """A unit does not have both a t=0 and a t=1 row."""

    kind = "MissingRow"


class NonBinaryTreatmentError(ValidationError):
    """Treatment (or a binary outcome) takes a value outside {0, 1}."""

    kind = "NonBinaryTreatment"


class TreatedAtBaselineError(ValidationError):
    """A unit is marked treated in the pre-intervention period."""

    kind = "TreatedAtBaseline"


class MissingValueError(ValidationError):
    """A response or covariate value is absent or not finite."""

    kind = "MissingValue"


class MalformedValueError(ValidationError):
    """A cell cannot be parsed, or the file structure is inconsistent."""

    kind = "MalformedValue"


class NoOverlapError(ValidationError):
    """All units are treated, or all are control."""

    kind = "NoOverlap"


class UnknownCovariateError(ValidationError):
    """A model term references a covariate the dataset does not have."""

    kind = "UnknownCovariate"


class NonPositiveLogError(ValidationError):
    """A log transform was requested for a non-positive covariate value."""

    kind = "NonPositiveLog"


class InvalidTermError(ValidationError):
    """A model term string cannot be parsed or is not allowed there."""

    kind = "InvalidTerm"


class InvalidArgumentError(ValidationError):
    """A function or CLI argument is out of range or inconsistent."""

    kind = "InvalidArgument"


# ---------------------------------------------------------------------------
# model fitting and numerical evaluation
# ---------------------------------------------------------------------------

class RankDeficientDesignError(PanelCausalError):
    kind = "RankDeficientDesign"


class SeparationError(PanelCausalError):
    """The logistic likelihood has no finite maximizer."""

    kind = "Separation"


class NoVariationInOutcomeError(PanelCausalError):
    kind = "NoVariationInOutcome"


class NonFiniteLikelihoodError(PanelCausalError):
    kind = "NonFiniteLikelihood"


class UnbalancedClustersError(PanelCausalError):
    """A cluster does not contribute exactly two rows."""

    kind = "UnbalancedClusters"


class InvalidVarianceError(PanelCausalError):
    kind = "InvalidVariance"


class NonFiniteLinearPredictorError(PanelCausalError):
    kind = "NonFiniteLinearPredictor"


# ---------------------------------------------------------------------------
# warnings
# ---------------------------------------------------------------------------

class PanelCausalWarning(UserWarning):
    """Base class for warnings emitted by this package."""


class TimeVaryingDowngradeWarning(PanelCausalWarning):
    """A covariate declared time-invariant varies across periods."""


class ExtremeWeightsWarning(PanelCausalWarning):
    """Fitted propensity scores close enough to 0 or 1 to destabilize weights."""


class DegenerateBinsWarning(PanelCausalWarning):
    """Propensity-score quantile bins collapsed because of ties."""


class BootstrapFailureWarning(PanelCausalWarning):
    """Five percent or more of bootstrap replicates failed to fit."""


class ReplicateFailureWarning(PanelCausalWarning):
    """More than one percent of simulation replicates failed for some cell."""


class DegenerateVarianceWarning(PanelCausalWarning):
    """A test statistic had zero variance and was guarded to 0."""


class EmptyModelWarning(PanelCausalWarning):
    """Backward elimination removed every candidate term."""
