"""Input validation helpers shared by the estimators and the functional API."""

import numpy as np
from sklearn.utils import check_array

UNIT_TOL = 1e-9


def check_points(X, *, min_points=1, name="points"):
    """Return ``X`` as a C-contiguous float64 ``(n, 3)`` array of finite values."""
    if (
        isinstance(X, np.ndarray)
        and X.dtype == np.float64
        and X.ndim == 2
        and X.shape[1] == 3
        and len(X) >= min_points
        and np.isfinite(X).all()
    ):
        return np.ascontiguousarray(X)
    X = check_array(
        X,
        dtype=np.float64,
        ensure_2d=True,
        ensure_min_samples=min_points,
        ensure_all_finite=True,
        input_name=name,
    )
    if X.shape[1] != 3:
        raise ValueError(f"{name} must have 3 columns, got {X.shape[1]}")
    return np.ascontiguousarray(X)


def check_colors(colors, n_points):
    """Validate optional per-point RGB colors as a ``(n_points, 3)`` uint8 array."""
    if colors is None:
        return None
    colors = np.asarray(colors)
    if colors.shape != (n_points, 3):
        raise ValueError(f"colors must have shape ({n_points}, 3), got {colors.shape}")
    if colors.dtype != np.uint8:
        if np.any(colors < 0) or np.any(colors > 255):
            raise ValueError("colors must lie in [0, 255]")
        colors = np.rint(colors).astype(np.uint8)
    return colors


def check_vector(v, name="vector"):
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be a finite 3-vector")
    return v


def check_unit_vector(v, name="vector", *, normalize=True):
    """Return ``v`` as a unit 3-vector.

    With ``normalize=False`` the input must already be unit norm within 1e-9.
    """
    v = check_vector(v, name)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError(f"{name} must be non-zero")
    if not normalize and abs(norm - 1.0) > UNIT_TOL:
        raise ValueError(f"{name} must be unit norm, got |v|={norm!r}")
    return v / norm


def check_rotation(R, tol=1e-9, name="rotation"):
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise ValueError(f"{name} must be a finite 3x3 matrix")
    if np.abs(R.T @ R - np.eye(3)).max() > tol or abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError(f"{name} is not a proper rotation within {tol}")
    return R


def check_random_state(seed):
    """Map ``None``/int/Generator to a ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
