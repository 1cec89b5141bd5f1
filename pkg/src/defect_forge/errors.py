"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class ParseError(ValidationError):
    """A text input could not be parsed; carries file path and line number."""

    def __init__(self, message: str, source: str = "<string>", line: int | None = None):
        self.source = source
        self.line = line
        loc = source if line is None else f"{source}:{line}"
        super().__init__(f"{loc}: {message}")


class FitNonConvergence(RuntimeError):
    """A nonlinear fit failed to converge within the iteration budget."""
