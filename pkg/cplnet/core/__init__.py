"""
Core modules: configuration and error types
"""

from .config import settings
from .exceptions import (
    CplNetError,
    ConfigError,
    ModelError,
    NumericalError,
)

__all__ = [
    "settings",
    "CplNetError",
    "ConfigError",
    "ModelError",
    "NumericalError",
]
