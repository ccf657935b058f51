"""Exception hierarchy used across the package."""


class ErgolimError(Exception):
    """Base class for all errors raised by ergolim."""


class InvalidInput(ErgolimError, ValueError):
    """Rejected input: wrong shape, non-finite entries, mismatched backends."""


class GramSingular(ErgolimError):
    """The Gram matrix does not have full column rank."""

    def __init__(self, column_rank, n, message=None):
        self.column_rank = column_rank
        self.n = n
        super().__init__(message or f"Gram matrix has column rank {column_rank} < {n}")


class EmptyEigenspace(ErgolimError):
    """The requested eigenvalue has a trivial eigenspace."""


class NotCyclic(ErgolimError):
    """Peripheral eigenvalues are not roots of unity."""


class ContourTooTight(ErgolimError):
    """The integration circle passes too close to the spectrum."""


class ContourFailed(ErgolimError):
    """The quadrature result is not idempotent."""


class CommutationFailed(ErgolimError):
    """TP = PT = lambda P does not hold."""


class SharedFixpointViolation(ErgolimError):
    """An operator in a sequence does not share the reference fixed points."""
