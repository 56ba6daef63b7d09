"""Exception hierarchy. The CLI maps these onto its exit codes."""


class RuelleError(Exception):
    """Base class for all package errors."""


class ConfigError(RuelleError, ValueError):
    pass


class NumericError(RuelleError, ArithmeticError):
    """A computation could not produce a trustworthy number."""


class DivergentPotential(NumericError):
    """The potential is not summable: the branch tail does not go to zero."""


class TruncationError(NumericError):
    """A countable branch family cannot be cut at the requested accuracy."""


class NoConvergence(NumericError):
    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = history


class NonpositiveEigenfunction(NumericError):
    pass


class NoSignChange(NumericError):
    def __init__(self, message, tau=None):
        super().__init__(message)
        self.tau = tau


class BudgetExceeded(NumericError):
    pass


class NormalizationError(NumericError):
    pass
