"""Exception hierarchy shared by all sgfdm modules."""


class GFDMError(Exception):
    """Base class for every error raised by sgfdm."""


class InvalidArgumentError(GFDMError, ValueError):
    pass


class UnsupportedDimensionError(InvalidArgumentError):
    pass


class DegenerateCloudError(GFDMError):
    """Random node placement could not satisfy the separation constraint."""


class CloudParseError(GFDMError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RankDeficiencyError(GFDMError):
    pass


class SingularStarError(GFDMError):
    """The moment matrix of a star is not numerically positive definite."""

    def __init__(self, message, node=None):
        self.node = node
        super().__init__(message)


class DegenerateStencilError(GFDMError):
    pass


class SimulationOverflowError(GFDMError, FloatingPointError):
    """A time step produced NaN or Inf values."""

    def __init__(self, message, step=None, report=None, realization=None, seed=None):
        self.step = step
        self.report = report
        self.realization = realization
        self.seed = seed
        super().__init__(message)


class StabilityError(GFDMError):
    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class ConfigError(GFDMError, ValueError):
    pass
