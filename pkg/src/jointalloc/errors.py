"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Inconsistent system configuration or allocation dimensions."""


class DualityInfeasibleError(RuntimeError):
    """Uplink/downlink power transform has no nonnegative solution."""


class RateRangeError(ValueError):
    """Source rate outside the range covered by a distortion table."""


class FitError(RuntimeError):
    """Logistic regression could not be carried out on the given samples."""


class InfeasibleError(RuntimeError):
    """No strictly feasible point exists for a convex program."""


class SCAError(RuntimeError):
    """A convexified power subproblem could not be solved."""


class BaselineInapplicableError(ValueError):
    """Zero-forcing needs at least as many antennas as users."""
