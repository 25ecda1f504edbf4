"""Exception hierarchy shared by all hyerslab modules."""


class HyersLabError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(HyersLabError, ValueError):
    pass


class AssociativityViolation(HyersLabError):
    def __init__(self, residual, triple):
        self.residual = float(residual)
        self.triple = tuple(int(t) for t in triple)
        super().__init__(
            f"structure constants are not associative: residual {self.residual:.3e} "
            f"at basis triple {self.triple}"
        )


class MissingUnit(HyersLabError):
    pass


class InvalidModel(HyersLabError, ValueError):
    pass


class RankUncertain(HyersLabError):
    def __init__(self, spectrum, message="numerical rank is ambiguous"):
        self.spectrum = list(spectrum)
        super().__init__(message)


class NoConvergence(HyersLabError):
    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)


class IterationOverflow(HyersLabError, OverflowError):
    pass


class DivergentSeries(HyersLabError):
    def __init__(self, message, trajectory=()):
        self.trajectory = list(trajectory)
        super().__init__(message)


class StageError(HyersLabError):
    """Failure inside a labelled pipeline stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
