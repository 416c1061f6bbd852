"""Input validation helpers.

Thin checks in the spirit of ``sklearn.utils.validation``: normalize the
input to a float64 ndarray, enforce shape/finiteness, and fail with the
package's own exception types.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, ShapeMismatchError


def check_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite float64 2-D array (copies only if needed)."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got ndim={m.ndim}")
    if m.size and not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return m


def check_vector(v, dim: int | None = None, name: str = "vector") -> np.ndarray:
    """Return ``v`` as a finite float64 1-D array, optionally of length ``dim``."""
    x = np.asarray(v, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    if dim is not None and x.shape[0] != dim:
        raise DimensionMismatchError(
            f"{name} has length {x.shape[0]}, expected {dim}"
        )
    return x


def check_image(img, name: str = "image") -> np.ndarray:
    """Return ``img`` as a float64 (height, width, channels) array in [0, 1]."""
    x = np.asarray(img, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3:
        raise ShapeMismatchError(f"{name} must be HxWxC, got ndim={x.ndim}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    if x.size and (x.min() < -1e-9 or x.max() > 1 + 1e-9):
        raise ValueError(f"{name} has pixel values outside [0, 1]")
    return x


def check_same_shape(a: np.ndarray, b: np.ndarray, name: str = "inputs") -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{name} differ in shape: {a.shape} vs {b.shape}")


def readonly(a: np.ndarray) -> np.ndarray:
    """Return a C-contiguous copy of ``a`` marked read-only."""
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out is a:
        out = out.copy()
    out.setflags(write=False)
    return out
