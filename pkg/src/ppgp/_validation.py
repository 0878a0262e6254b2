"""Input validation helpers built on top of :mod:`sklearn.utils.validation`."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DataError, InputError


def check_points(X, d=None, *, allow_empty=False, name="X"):
    """Return ``X`` as a float array of shape ``(n, d)``.

    One dimensional input of shape ``(n,)`` is read as ``n`` points on the
    line. ``d`` enforces the dimension when given.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(-1, 1) if d in (None, 1) else X.reshape(1, -1)
    if X.ndim != 2:
        raise InputError(f"{name} must be a 1-D or 2-D array of points, got shape {X.shape}")
    if X.shape[0] == 0:
        if not allow_empty:
            raise InputError(f"{name} must contain at least one point")
        if d is not None and X.shape[1] not in (0, d):
            raise InputError(f"{name} has dimension {X.shape[1]}, expected {d}")
        return np.empty((0, d if d is not None else X.shape[1]))
    try:
        X = check_array(X, dtype=np.float64, ensure_2d=True)
    except ValueError as exc:
        raise InputError(f"{name}: {exc}") from exc
    if d is not None and X.shape[1] != d:
        raise InputError(f"{name} has dimension {X.shape[1]}, expected {d}")
    return X


def check_in_domain(X, domain, *, name="X"):
    """Raise :class:`DataError` listing rows of ``X`` outside ``domain``."""
    X = check_points(X, domain.dim, allow_empty=True, name=name)
    outside = ~domain.contains(X)
    if np.any(outside):
        rows = np.flatnonzero(outside)
        shown = ", ".join(str(r + 1) for r in rows[:10])
        more = "" if rows.size <= 10 else f" (+{rows.size - 10} more)"
        raise DataError(f"{rows.size} point(s) of {name} lie outside the domain: rows {shown}{more}")
    return X


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise InputError(f"{name} must be a finite positive number, got {value!r}")
    return value
