"""Semantic exceptions shared across the package."""


class GandualityError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(GandualityError, ValueError):
    """Inputs violate a documented precondition (shape, range, alignment)."""


class InvariantViolation(GandualityError):
    """A constructed value breaks one of its structural invariants."""


class InfeasibleError(GandualityError):
    """A feasibility condition fails (no bracketing root, empty constraint set)."""


class ConvergenceError(GandualityError):
    """An iterative solver exhausted its budget without meeting its tolerance."""


class AsymmetricGeneratorWarning(UserWarning):
    """Hybrid solve with an asymmetric generator: primal value only, no dual certificate."""
