"""Exception types raised across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """Argument outside the support of a density or outside a parameter space."""


class MomentExistenceError(ValueError):
    """A requested moment does not exist for the given parameters.

    The violated condition is carried as data: ``parameter`` must satisfy
    ``parameter > bound`` but has value ``value``.
    """

    def __init__(self, moment: int, parameter: str, value: float, bound: float):
        self.moment = moment
        self.parameter = parameter
        self.value = value
        self.bound = bound
        super().__init__(
            f"moment of order {moment} requires {parameter} > {bound:g}, got {parameter}={value:g}"
        )

    @property
    def condition(self) -> dict:
        return {"parameter": self.parameter, "relation": ">", "bound": self.bound, "value": self.value}


class NotPositiveDefiniteError(ValueError):
    """A matrix required to be symmetric positive definite is not."""


class SingularMatrixError(ValueError):
    """The structural matrix is (numerically) singular."""


class ReducibleChainError(ValueError):
    """A transition matrix has no unique ergodic distribution."""


class UnstableSystemError(ValueError):
    """The reduced-form VAR is not stable (companion spectral radius >= 1)."""


class InsufficientDataError(ValueError):
    """Too few observations for the requested lag order or state count."""


class DataFormatError(ValueError):
    """A data file could not be parsed.

    ``row`` and ``column`` locate the offending cell when known (1-based row of
    the file, column name).
    """

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        super().__init__(message)


class NoDrawsInRegionError(RuntimeError):
    """No importance draw fell inside the high-likelihood set; increase the draw count."""


class ChainFailure(RuntimeError):
    """A Gibbs block failed; records where."""

    def __init__(self, sweep: int, block: str, cause: BaseException):
        self.sweep = sweep
        self.block = block
        self.cause = cause
        super().__init__(f"block {block!r} failed at sweep {sweep}: {cause}")
