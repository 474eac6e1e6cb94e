"""Exception hierarchy shared by all modules."""


class P2EigError(Exception):
    """Base class for recoverable numerical failures."""


class DomainError(P2EigError, ValueError):
    """Input outside the admissible set (e.g. non-positive field for Picone)."""


class NotInCone(P2EigError):
    """Field cannot be projected onto the Nehari manifold: lambda*|u|^2 <= |grad u|^2."""


class NoNegativeScale(P2EigError):
    """No scale s with negative energy was found before underflow."""


class MaxIterations(P2EigError):
    """Iterative solver hit its iteration budget without converging."""

    def __init__(self, message, last=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


class TrustBallExceeded(P2EigError):
    """Right-hand side too large for the local inverse of the norm-weighted operator."""


class ContinuationStall(P2EigError):
    """Branch continuation failed at some lambda; carries the truncated branch."""

    def __init__(self, message, branch=None, lam=None):
        super().__init__(message)
        self.branch = branch
        self.lam = lam


class InsufficientPoints(P2EigError, ValueError):
    pass


class AmbiguousTrend(P2EigError):
    pass
