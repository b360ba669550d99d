"""Exception hierarchy shared by every module."""


class GwbeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GwbeError, ValueError):
    pass


class MissingKey(ConfigError, KeyError):
    pass


class NonPositiveGain(ConfigError):
    pass


class DimensionMismatch(GwbeError, ValueError):
    pass


class ParseError(ConfigError):
    pass


class NonPositiveTarget(GwbeError, ValueError):
    pass


class LengthMismatch(GwbeError, ValueError):
    pass


class NotSorted(GwbeError, ValueError):
    pass


class TauOutOfRange(GwbeError, ValueError):
    pass


class InfeasibleTargets(GwbeError):
    """Targets that no pilot book of the requested kind can serve."""


class MajorizationViolation(InfeasibleTargets):
    pass


class RegionViolation(InfeasibleTargets):
    pass


class MajorizationCapViolation(InfeasibleTargets):
    pass


class NumericalError(GwbeError, ArithmeticError):
    pass


class NumericalRankLoss(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


class BracketFailure(NumericalError):
    pass


class InfeasibleFrame(GwbeError, ValueError):
    pass


class EmptyGroup(GwbeError, ValueError):
    pass


class UnsetPower(GwbeError, ValueError):
    pass


class GridTooFine(GwbeError, ValueError):
    pass
