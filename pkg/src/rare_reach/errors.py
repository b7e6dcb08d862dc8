"""Exception hierarchy for the toolkit.

Every error raised on purpose by this package derives from ToolkitError, so
callers can catch one base class at experiment-runner level.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class DomainError(ToolkitError, ValueError):
    """Argument outside the finite domain of a cumulant / Levy exponent."""


class NoCramerRoot(ToolkitError):
    """The cumulant has no positive zero: the model is not in the rare regime."""


class DriftOutOfRange(ToolkitError, ValueError):
    """Requested tilted drift is outside the attainable range of psi'."""


class EventCapExceeded(ToolkitError, RuntimeError):
    """An event-driven simulation produced more events than its safety cap."""


class BudgetCapExceeded(ToolkitError, RuntimeError):
    """An exit simulation ran past its event cap without leaving the interval."""


class DegenerateBudget(ToolkitError, ValueError):
    """A per-particle budget floors to zero steps; the ratio cell is meaningless."""


class InsufficientSignal(ToolkitError, RuntimeError):
    """An estimator observed zero successes where a positive count is required."""


class ExtinctionError(ToolkitError, RuntimeError):
    """All particles of an interacting system were absorbed simultaneously."""


class SizeError(ToolkitError, ValueError):
    """A dense table request exceeds the supported size cap."""


class ConvergenceError(ToolkitError, RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class ToleranceNotMet(ToolkitError, RuntimeError):
    """Adaptive quadrature could not certify the requested tolerance."""


class ConfigError(ToolkitError, ValueError):
    """An experiment configuration is malformed or violates a precondition."""
