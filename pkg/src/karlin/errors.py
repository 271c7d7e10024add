"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter is outside the mathematical domain of an operation."""


class NotPsdError(RuntimeError):
    """A covariance matrix failed factorization beyond the jitter budget."""


class QuadratureError(RuntimeError):
    """Numerical integration did not converge to the requested tolerance."""
