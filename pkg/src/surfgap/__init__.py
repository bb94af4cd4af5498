"""Numerical checks of log-concavity and fundamental-gap estimates on positively curved surfaces."""

from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("surfgap")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .errors import (  # noqa: E402
    BoundsInvalid,
    CFLViolation,
    ConfigError,
    DomainError,
    ModelError,
    NoSignChange,
    SolverError,
    SurfgapError,
)

__all__ = [
    "__version__",
    "SurfgapError",
    "ModelError",
    "DomainError",
    "SolverError",
    "NoSignChange",
    "BoundsInvalid",
    "CFLViolation",
    "ConfigError",
]
