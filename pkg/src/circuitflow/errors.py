"""Exception types shared across the package."""


class SizeCapError(ValueError):
    """An instance exceeds a configured size cap (support, node count, ...)."""


class NumericalError(RuntimeError):
    """A numerical gate failed: residual too large, singular system, ..."""


class DegenerateNodeError(NumericalError):
    """A non-sink node has no outgoing current; signals a broken field."""


class CycleSuspicionError(NumericalError):
    """A stochastic walk exceeded its safety step bound."""


class TrainingDivergedError(NumericalError):
    """Training hit a non-finite loss or activation."""
