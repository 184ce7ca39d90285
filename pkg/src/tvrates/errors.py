"""Exception hierarchy shared across the toolkit."""


class TvratesError(Exception):
    """Base class for all toolkit errors."""


class PreconditionError(TvratesError, ValueError):
    """An input violates a documented precondition (bad dimension, bad
    parameter range, insufficient resolution for the requested operation)."""


class MassDefectError(PreconditionError):
    """A discretization box is too small: the truncated probability mass
    exceeds the allowed defect."""

    def __init__(self, defect, limit):
        self.defect = float(defect)
        self.limit = float(limit)
        super().__init__(
            f"box too small: mass defect {self.defect:.6g} exceeds {self.limit:.6g}"
        )


class ResolutionError(PreconditionError):
    """Grid too coarse for stable spectral differentiation at the
    requested order."""


class DecayError(PreconditionError):
    """A measured tail does not decay exponentially, so exponential-envelope
    constants cannot be certified."""


class NumericalError(TvratesError, RuntimeError):
    """A numerical procedure failed to reach its accuracy target."""


class ConvergenceError(NumericalError):
    """An iterative solver did not converge within its iteration cap."""
