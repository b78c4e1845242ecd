"""Exception hierarchy shared by every module of the package."""


class ReluObsError(Exception):
    """Base class for all errors raised by reluobs."""


class DimensionError(ReluObsError, ValueError):
    pass


class KinkProximityError(ReluObsError, ValueError):
    """A pre-activation sits too close to the ReLU kink for finite differences."""

    def __init__(self, message, pair):
        super().__init__(message)
        self.pair = pair


class FactorizationError(ReluObsError, RuntimeError):
    """The assembled Jacobian disagrees with its input/indicator factorization."""


class DesignError(ReluObsError):
    """Input design failed (singular weights, invalid template, ill-conditioning)."""


class SingularWeightsError(DesignError):
    pass


class RankDeficientError(ReluObsError):
    pass


class BudgetExhaustedError(ReluObsError):
    """A sampler ran out of attempts before producing what was requested."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class GridCapError(ReluObsError, ValueError):
    pass


class ConfigError(ReluObsError, ValueError):
    pass
