"""Exception types shared across the package."""


class DivergenceError(RuntimeError):
    """An iterate became non-finite; ``step`` is the 1-based step at which it happened."""

    def __init__(self, step, message=None, trace=None):
        self.step = step
        self.trace = trace
        super().__init__(message or f"non-finite iterate at step {step}")


class ConvergenceFailure(RuntimeError):
    """An iterative solve hit its iteration cap; carries the final relative residual."""

    def __init__(self, residual, iterations, message=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            message
            or f"no convergence after {iterations} iterations (relative residual {residual:.3e})"
        )


class CapacityError(ValueError):
    """A desk-scale-only operation was asked to handle something too large."""


class DegenerateInputError(ValueError):
    """Input is degenerate for the requested operation (e.g. a constant sinogram)."""


class WeightFormatError(ValueError):
    """A weight file failed to parse; ``offset`` is the byte position of the failure."""

    def __init__(self, offset, message):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


class ConfigError(ValueError):
    """An experiment config failed to parse or validate."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = ""
        if key is not None:
            where += f" [key {key}]"
        if line is not None:
            where += f" [line {line}]"
        super().__init__(message + where)
