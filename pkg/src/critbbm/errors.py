"""Exception hierarchy shared by all modules."""


class BBMError(Exception):
    """Base class for every error raised by this package."""


class NotProbability(BBMError, ValueError):
    pass


class NotCritical(BBMError, ValueError):
    pass


class Degenerate(BBMError, ValueError):
    pass


class RootFindingFailure(BBMError, ArithmeticError):
    pass


class DomainError(BBMError, ValueError):
    pass


class PoleError(BBMError, ZeroDivisionError):
    pass


class ConvergenceError(BBMError, ArithmeticError):
    pass


class ShootingBracketError(BBMError, ArithmeticError):
    pass


class StiffnessError(BBMError, ArithmeticError):
    pass


class RegionError(BBMError, ValueError):
    pass


class NearSingularParameter(BBMError, ValueError):
    pass


class PrecisionLoss(BBMError, ArithmeticError):
    def __init__(self, message: str, k: int | None = None):
        super().__init__(message)
        self.k = k  # first coefficient index that failed, if known


class HypothesisViolated(BBMError, ValueError):
    pass


class InversionFailure(BBMError, ArithmeticError):
    pass


class ExcessTruncation(BBMError, RuntimeError):
    pass


class ConfigError(BBMError, ValueError):
    pass
