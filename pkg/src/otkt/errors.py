"""Exception types shared across the package."""


class SizeLimitError(ValueError):
    """Instance exceeds the exact solver's size cap."""


class SinkhornConvergenceError(RuntimeError):
    """Sinkhorn failed to reach the marginal tolerance within the iteration budget.

    Carries the achieved violation so callers can decide to retry with a
    larger epsilon or a bigger budget.
    """

    def __init__(self, violation: float, iterations: int):
        self.violation = float(violation)
        self.iterations = int(iterations)
        super().__init__(
            f"max marginal violation {self.violation:.3e} after "
            f"{self.iterations} iterations; retry with larger epsilon or more iterations"
        )


class NumericalOverflowError(RuntimeError):
    """Non-finite values appeared inside a solver."""


class FormatError(ValueError):
    """Malformed binary or text artifact."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
