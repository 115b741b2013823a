"""Exception hierarchy shared by the samplers, the LP solver and the CLI."""


class SignedMixError(Exception):
    """Base class for all library errors."""


class ModelFormatError(SignedMixError):
    """A model file could not be parsed."""


class DomainError(SignedMixError, ValueError):
    """An argument lies outside the domain of a distribution function."""


class DegenerateTruncation(SignedMixError):
    """Truncation region carries (numerically) no mass under the component."""


class NotPairable(SignedMixError):
    """The supremum of g/f is infinite for the requested (f, g)."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class ParameterDomain(SignedMixError, ValueError):
    """delta / eps outside the admissible region of the partition builder."""


class PartitionOverflow(SignedMixError):
    """The partition refinement hit the cell-count cap before meeting its target."""


class EmptyPairSet(SignedMixError):
    """No (positive, negative) pair is acceptable; the model cannot be a density."""


class SimplexFailure(SignedMixError):
    """The simplex solver ended in a non-optimal status."""

    def __init__(self, status: str):
        super().__init__(f"simplex terminated with status {status!r}")
        self.status = status


class RatioOverflow(SignedMixError, AssertionError):
    """The final accept ratio m / (C pi) exceeded one: the pairing is corrupt."""


class MaxIterations(SignedMixError):
    """Root refinement did not converge within its iteration budget."""


class GenerationFailed(SignedMixError):
    """The random model generator exhausted its retry budget."""
