"""Small input-validation helpers used across the package.

These mirror the style of scikit-learn's ``check_*`` utilities but raise the
package's own :class:`~qstar.errors.DomainError` so callers can distinguish
bad values from library bugs.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError


def check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return value


def check_positive(name: str, value: float) -> float:
    value = check_finite(name, value)
    if value <= 0.0:
        raise DomainError(f"{name} must be > 0, got {value!r}")
    return value


def check_in_range(
    name: str,
    value: float,
    lo: float,
    hi: float,
    *,
    inclusive_lo: bool = True,
    inclusive_hi: bool = True,
) -> float:
    value = check_finite(name, value)
    ok_lo = value >= lo if inclusive_lo else value > lo
    ok_hi = value <= hi if inclusive_hi else value < hi
    if not (ok_lo and ok_hi):
        lo_b = "[" if inclusive_lo else "("
        hi_b = "]" if inclusive_hi else ")"
        raise DomainError(f"{name} must lie in {lo_b}{lo:g}, {hi:g}{hi_b}, got {value!r}")
    return value


def as_float_array(name: str, values: Iterable[float], *, min_len: int = 0) -> np.ndarray:
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_len:
        raise DomainError(f"{name} needs at least {min_len} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def check_same_length(name_x: str, x: Sequence, name_y: str, y: Sequence) -> None:
    if len(x) != len(y):
        raise DomainError(
            f"{name_x} and {name_y} must have equal length, got {len(x)} and {len(y)}"
        )
