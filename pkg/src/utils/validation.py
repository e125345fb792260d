"""
Validation Utilities
Helper functions for validating user inputs and numerical preconditions
"""

import math
import os
from typing import Tuple, Optional, Sequence, Type

import numpy as np

from src.utils.errors import ValidationError, NetworkEffectsError

# Try to import logger
try:
    from src.utils.logger import logger
except ImportError:
    import logging
    logger = logging.getLogger(__name__)
    logger.addHandler(logging.NullHandler())


def ensure_valid(result: Tuple[bool, Optional[str]], error_cls: Type[NetworkEffectsError] = ValidationError):
    """
    Raise if a validator reported a problem
    
    Args:
        result: (is_valid, error_message) tuple from a validate_* function
        error_cls: Exception class to raise
    """
    is_valid, message = result
    if not is_valid:
        logger.debug(f"Validation failed: {message}")
        raise error_cls(message)


def validate_path(path: str, must_exist: bool = True, must_be_file: bool = False, must_be_dir: bool = False) -> Tuple[bool, Optional[str]]:
    """
    Validate a file or directory path
    
    Args:
        path: Path to validate
        must_exist: Whether path must exist
        must_be_file: Whether path must be a file
        must_be_dir: Whether path must be a directory
        
    Returns:
        Tuple of (is_valid, error_message)
    """
    if not path or not isinstance(path, str):
        return False, "Path is required"
    
    path = path.strip()
    if not path:
        return False, "Path cannot be empty"
    
    if must_exist:
        if not os.path.exists(path):
            return False, f"Path does not exist: {path}"
        
        if must_be_file and not os.path.isfile(path):
            return False, f"Path is not a file: {path}"
        
        if must_be_dir and not os.path.isdir(path):
            return False, f"Path is not a directory: {path}"
    
    return True, None


def validate_probability(value: float, name: str = "p") -> Tuple[bool, Optional[str]]:
    """Check that value lies in the closed interval [0, 1]"""
    try:
        value = float(value)
    except (TypeError, ValueError):
        return False, f"{name} must be a number, got {value!r}"
    if not math.isfinite(value) or value < 0.0 or value > 1.0:
        return False, f"{name} must lie in [0, 1], got {value}"
    return True, None


def validate_alpha(alpha: float) -> Tuple[bool, Optional[str]]:
    """Check that a confidence level parameter lies in the open interval (0, 1)"""
    try:
        alpha = float(alpha)
    except (TypeError, ValueError):
        return False, f"alpha must be a number, got {alpha!r}"
    if not (0.0 < alpha < 1.0):
        return False, f"alpha must lie in (0, 1), got {alpha}"
    return True, None


def validate_count(value: int, name: str, minimum: int = 1) -> Tuple[bool, Optional[str]]:
    """Check that value is an integer no smaller than minimum"""
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        return False, f"{name} must be an integer, got {value!r}"
    if value < minimum:
        return False, f"{name} must be >= {minimum}, got {value}"
    return True, None


def validate_choice(value: str, choices: Sequence[str], name: str) -> Tuple[bool, Optional[str]]:
    """Check that value is one of the allowed choices"""
    if value not in choices:
        return False, f"{name} must be one of {', '.join(choices)}; got {value!r}"
    return True, None


def validate_permutation(perm: Sequence[int], n: int) -> Tuple[bool, Optional[str]]:
    """Check that perm is a bijection of 0..n-1"""
    perm = np.asarray(perm)
    if perm.ndim != 1 or perm.shape[0] != n:
        return False, f"permutation must have length {n}"
    if not np.issubdtype(perm.dtype, np.integer):
        return False, "permutation entries must be integers"
    if not np.array_equal(np.sort(perm), np.arange(n)):
        return False, f"permutation is not a bijection of 0..{n - 1}"
    return True, None


def validate_rows(n_rows: int, n: int, what: str = "vector") -> Tuple[bool, Optional[str]]:
    """Check that an array has one row per unit"""
    if n_rows != n:
        return False, f"{what} has {n_rows} rows, expected {n} (one per unit)"
    return True, None
