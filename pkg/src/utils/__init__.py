# Utilities Package
from src.utils.errors import (
    NetworkEffectsError,
    ValidationError,
    DataError,
    NumericalError,
)

__all__ = [
    "NetworkEffectsError",
    "ValidationError",
    "DataError",
    "NumericalError",
]
