"""Exception hierarchy shared by all pdcrib modules."""


class PdcRibError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigError(PdcRibError):
    """Invalid run configuration or malformed input document."""


class ComputationError(PdcRibError):
    """A numerical step failed; the CLI maps these to exit code 3."""


# materials
class OutOfRange(ComputationError, ValueError):
    pass


class PoleProximity(ComputationError, ValueError):
    pass


class NonConvergence(ComputationError):
    pass


class DegenerateAnchors(ConfigError, ValueError):
    pass


# mode solver
class NoGuidedMode(ComputationError):
    pass


class SolverFailure(ComputationError):
    pass


class ZeroPower(ComputationError):
    pass


class Ambiguous(ComputationError):
    pass


class TrackingLost(ComputationError):
    pass


class NoBracket(ComputationError):
    pass


class SchemaError(ConfigError):
    pass


class NonMonotonicWavelengths(SchemaError):
    pass


# nonlinear
class GridMismatch(ComputationError, ValueError):
    pass


class StepFailure(ComputationError):
    pass


# pdc
class OutOfTableRange(ComputationError, ValueError):
    pass


class NonPositiveMismatch(ComputationError):
    pass


class GridTooCoarse(ComputationError):
    pass


class MultiPeakWarning(UserWarning):
    """More than one pair of half-maximum crossings in a spectrum."""


class MissingMode(NoGuidedMode, KeyError):
    """A requested mode label is not among the solved modes."""
