"""Exception hierarchy shared by the kernels, engines and CLI."""


class RoughVolError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(RoughVolError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateParameterError(DomainError):
    """A parameter hits a pole or a degenerate value (e.g. non-positive integer c)."""


class OrderError(DomainError):
    """Time arguments are given in an order the formula does not allow."""


class GridMismatchError(RoughVolError, ValueError):
    """Arrays or grids passed together do not describe the same discretisation."""


class NumericalError(RoughVolError, ArithmeticError):
    """A numerical routine failed (non-PD matrix, quadrature failure, ...)."""


class ConvergenceError(NumericalError):
    """An iterative routine hit its iteration cap."""


class ArbitrageError(RoughVolError, ValueError):
    """A fitted or supplied surface violates a static-arbitrage condition."""


class InsufficientDataError(RoughVolError, ValueError):
    """Not enough quotes to perform the requested fit."""


class OutOfBandPriceError(DomainError):
    """An option price lies outside its no-arbitrage band."""


class StageError(RoughVolError, RuntimeError):
    """A pipeline stage failed; carries the stage name for the CLI."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
