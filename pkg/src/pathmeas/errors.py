"""Exception hierarchy shared by all modules."""


class PathMeasError(Exception):
    """Base class for every error raised by pathmeas."""


class InvalidBounds(PathMeasError, ValueError):
    pass


class TooFewPoints(PathMeasError, ValueError):
    pass


class UnsupportedOrder(PathMeasError, ValueError):
    pass


class ZeroNorm(PathMeasError, ValueError):
    pass


class NonFinite(PathMeasError, ArithmeticError):
    """Integration produced inf/nan. ``step`` is the first offending step."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NoConvergence(PathMeasError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class FocalPoint(PathMeasError, ArithmeticError):
    pass


class FlatPotential(PathMeasError, ValueError):
    pass


class BoundaryLeak(PathMeasError, ArithmeticError):
    pass


class TooLarge(PathMeasError, ValueError):
    pass


class SeriesDiverges(PathMeasError, ArithmeticError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class BadOutcome(PathMeasError, IndexError):
    pass


class FlatPattern(PathMeasError, ValueError):
    pass


class EmptyFragment(PathMeasError, ValueError):
    pass


class ConfigError(PathMeasError, ValueError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line


class ComputeError(PathMeasError, RuntimeError):
    """Wraps a numerical failure raised while running an experiment."""

    def __init__(self, message, origin=None):
        super().__init__(message)
        self.origin = origin
