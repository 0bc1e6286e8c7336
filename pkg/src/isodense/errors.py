"""Exception taxonomy shared across the package."""


class IsodenseError(Exception):
    """Base class for all package-specific errors."""


class DomainError(IsodenseError):
    """Evaluation requested outside a density's domain (non-finite point, origin singularity, ...)."""


class ConfigurationError(IsodenseError):
    """Malformed or inconsistent user input (specs, JSON documents, CLI flags)."""


class InvalidRegionError(IsodenseError):
    """A region violates its representation invariants."""


class NonDifferentiableError(IsodenseError):
    """Gradient requested at a point where the density is not differentiable."""


class InapplicableError(IsodenseError):
    """An operation's hypotheses are not met (e.g. no finite limit, non-radial density)."""


class GeometryError(IsodenseError):
    """Degenerate or self-intersecting geometry."""


class NonClosingError(IsodenseError):
    """A shot curve exhausted its length budget without closing up.

    Carries the partial curve for diagnostics.
    """

    def __init__(self, message, partial_curve=None, best_residual=None):
        super().__init__(message)
        self.partial_curve = partial_curve
        self.best_residual = best_residual


class EstimationError(IsodenseError):
    """A search/estimation routine failed within its budget; carries partial results."""

    def __init__(self, message, partials=None):
        super().__init__(message)
        self.partials = partials


class SpacingError(IsodenseError):
    """Construction pieces overlap or are insufficiently separated."""


class NumericError(IsodenseError):
    """A numeric subroutine (bisection, bracketing) failed; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
