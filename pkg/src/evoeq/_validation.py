"""Input validation helpers in the spirit of ``sklearn.utils.validation``.

scikit-learn's own ``check_array`` rejects complex input, so the few checks
needed here are reimplemented for complex operators and signals.
"""

import numbers

import numpy as np

from .errors import ShapeError

#: Reciprocal-condition threshold below which a block counts as singular.
RCOND_THRESHOLD = 1e-12


def check_operator(x, *, square=False, name="operator"):
    """Return ``x`` as a finite 2-D complex array."""
    arr = np.asarray(x)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    arr = arr.astype(complex, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} has non-finite entries")
    if square and arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {arr.shape}")
    return arr


def check_vector(x, dim=None, *, name="vector"):
    arr = np.asarray(x, dtype=complex).reshape(-1)
    if dim is not None and arr.shape[0] != dim:
        raise ShapeError(f"{name} has length {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} has non-finite entries")
    return arr


def check_positive(value, name, *, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be nonnegative, got {value!r}")
    return float(value)


def check_same_shape(a, b, what="operators"):
    if a.shape != b.shape:
        raise ShapeError(f"{what} have mismatched shapes {a.shape} and {b.shape}")


def rcond(t):
    """Reciprocal 2-norm condition number; 0x0 blocks count as well conditioned."""
    if t.size == 0:
        return 1.0
    s = np.linalg.svd(t, compute_uv=False)
    if s[0] == 0:
        return 0.0
    return float(s[-1] / s[0])
