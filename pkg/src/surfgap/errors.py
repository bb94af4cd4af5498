"""Exception hierarchy."""


class SurfgapError(Exception):
    """Base class for toolkit errors."""


class ModelError(SurfgapError):
    """Invalid surface model or evaluation outside a chart."""


class DomainError(SurfgapError):
    """Domain construction failed (non-convex cap, bad mesh size, ...)."""


class SolverError(SurfgapError):
    """Eigen solver or shooting failure."""


class NoSignChange(SurfgapError):
    """A root search found no sign change in the sweep range."""


class BoundsInvalid(SurfgapError):
    """Closed-form flow bounds requested outside their validity horizon."""


class CFLViolation(SurfgapError):
    """Explicit time step exceeds the stability limit."""


class ConfigError(SurfgapError):
    """Run configuration is invalid or references missing files."""
