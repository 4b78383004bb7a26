"""Exception and warning types shared across the library."""


class LotError(Exception):
    """Base class for all lotkit errors."""


class InvalidMeasure(LotError):
    """A point cloud or its masses violate the measure invariants."""


class InvalidParameter(LotError):
    """A generator or solver parameter is out of range."""


class DimensionError(LotError):
    """Operands live in incompatible ambient dimensions or shapes."""


class InvalidMarginals(LotError):
    """Transport marginals do not form a feasible pair."""


class InvalidCost(LotError):
    """A cost matrix contains negative or non-finite entries."""


class KernelUnderflow(LotError):
    """The Gibbs kernel exp(-M/lambd) underflowed to zero.

    Increase lambd, or lower the cost scale; the log-domain path engages
    automatically once lambd <= 0.05 * median(M).
    """


class SolverFailure(LotError):
    """The linear-programming backend failed to return an optimal plan."""


class ReferenceMismatch(LotError):
    """Embeddings bound to different reference measures were combined."""


class InvalidDataset(LotError):
    """A labeled dataset is empty or otherwise unusable."""


class InvalidWeights(LotError):
    """A barycenter weight vector is negative, misshapen, or not normalized."""


class UnknownClass(LotError):
    """A requested class label is not present in the dataset."""


class InvalidTrainingSet(LotError):
    """Training data cannot support the requested classifier."""


class DegenerateFamily(LotError):
    """All embedded clouds coincide, so the relative error is undefined."""


class ConfigError(LotError):
    """A pipeline configuration file is missing or malformed."""


class DataError(LotError):
    """An input data file is missing or malformed."""


class LotWarning(UserWarning):
    """Base class for lotkit warnings (notices that do not abort)."""


class NonConvergenceWarning(LotWarning):
    """An iterative solver hit its iteration cap; the best iterate is returned."""


class RankDeficientWarning(LotWarning):
    """Data rank is lower than requested; components beyond it are undefined."""


class SingularWithinWarning(LotWarning):
    """The within-class scatter was singular and a shrinkage term was added."""


class StratificationWarning(LotWarning):
    """A class is smaller than the fold count; folds are non-stratified."""


class ClampedComponentsWarning(LotWarning):
    """A requested component count exceeded its bound and was clamped."""
