"""Exception types shared across the package."""


class EthLabError(Exception):
    """Base class for all package errors."""


class ValidationError(EthLabError, ValueError):
    """Input violates a documented precondition or invariant."""


class SizeError(ValidationError):
    """Requested dimension is outside the dense-feasibility range."""


class EmptyWindowError(EthLabError, LookupError):
    """A microcanonical window contains no eigenstates.

    Raised instead of returning an empty window so callers cannot
    silently proceed with zero-member statistics.
    """


class NumericError(EthLabError, ArithmeticError):
    """A numerical routine failed to converge or produced invalid output."""


class CostGuardError(EthLabError):
    """A request exceeded a hard cost guard and was refused."""

    def __init__(self, message, estimated_flops=None):
        super().__init__(message)
        self.estimated_flops = estimated_flops


class DivergentIntegralError(EthLabError, ArithmeticError):
    """The static-fluctuation integral diverges for the given rates.

    Carries the saturation diagnosis: divergence occurs exactly when the
    growth rate reaches or exceeds the chaos bound, lam >= 2*pi/beta.
    """

    def __init__(self, lam, beta):
        super().__init__(
            f"integral of exp(beta*w/2 - pi*|w|/lam) diverges: lam={lam:g} "
            f"is at or above the chaos bound 2*pi/beta={2 * 3.141592653589793 / beta if beta > 0 else float('inf'):g}"
        )
        self.lam = lam
        self.beta = beta


class FitRejectedError(EthLabError):
    """An exponential-growth fit was rejected; carries the reason."""

    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason
