"""Light-cone bounds for power-law spin lattices, checked against exact dynamics."""

from .errors import (
    InsufficientData,
    InvalidInput,
    LightconeError,
    NumericalFailure,
    ResourceLimit,
    UnsupportedRegime,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "LightconeError",
    "InvalidInput",
    "ResourceLimit",
    "NumericalFailure",
    "UnsupportedRegime",
    "InsufficientData",
]
