"""Planes, rigid motions and world frames.

All value types are frozen dataclasses over read-only numpy arrays.
Motions use the ``x_b = R @ x_a + t`` convention: a motion maps view-a
coordinates into view-b coordinates.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import check_colors, check_points, check_rotation, check_unit_vector
from .exceptions import DegenerateInput

FIT_TOLERANCE = 0.02
# |offset| below this is a plane through the sensor origin; orientation falls back to a component rule.
_ORIGIN_TIE = 1e-12


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


def canonical_orientation(normal, offset):
    """Sign ``(normal, offset)`` so the normal faces the sensor origin (offset <= 0).

    Planes through the origin get their largest-magnitude normal component positive.
    """
    if offset > _ORIGIN_TIE:
        return -normal, -offset
    if offset < -_ORIGIN_TIE:
        return normal, offset
    k = int(np.argmax(np.abs(normal)))
    if normal[k] < 0:
        return -normal, -offset
    return normal, offset


@dataclass(frozen=True, eq=False)
class Plane:
    """A detected planar region.

    Attributes:
        normal: unit normal, oriented toward the sensor origin.
        offset: signed offset ``d = normal . p`` for points ``p`` on the plane (meters).
        inliers: ``(n, 3)`` supporting points.
        centroid: mean of the inliers.
        colors: optional ``(n, 3)`` uint8 RGB per inlier.
    """

    normal: np.ndarray
    offset: float
    inliers: np.ndarray
    centroid: np.ndarray
    colors: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "normal", _frozen(self.normal))
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "inliers", _frozen(np.reshape(self.inliers, (-1, 3))))
        object.__setattr__(self, "centroid", _frozen(self.centroid))
        if self.colors is not None:
            object.__setattr__(self, "colors", _frozen(self.colors, np.uint8))

    @property
    def n_inliers(self):
        return len(self.inliers)

    def signed_distance(self, points):
        return np.asarray(points, dtype=np.float64) @ self.normal - self.offset

    def flipped(self):
        """Same plane with the opposite normal orientation (not canonical)."""
        return Plane(-self.normal, -self.offset, self.inliers, self.centroid, self.colors)

    def __repr__(self):
        n = np.array2string(self.normal, precision=4)
        return f"Plane(normal={n}, offset={self.offset:.4f}, n_inliers={self.n_inliers})"


@dataclass(frozen=True, eq=False)
class RigidMotion:
    """Rotation plus translation mapping view-a coordinates into view-b coordinates."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen(np.reshape(self.rotation, (3, 3))))
        object.__setattr__(self, "translation", _frozen(np.reshape(self.translation, 3)))

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix, tol=1e-6):
        """Build from a homogeneous 4x4 matrix, checking the last row and orthonormality."""
        M = np.asarray(matrix, dtype=np.float64)
        if M.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {M.shape}")
        if not np.array_equal(M[3], [0.0, 0.0, 0.0, 1.0]):
            raise ValueError("last row of a rigid transform must be [0, 0, 0, 1]")
        return cls(check_rotation(M[:3, :3], tol), M[:3, 3])

    def as_matrix(self):
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def apply(self, points):
        """Map ``(n, 3)`` points (or a single 3-vector)."""
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def inverse(self):
        return invert(self)

    def __matmul__(self, other):
        return compose(self, other)

    def __repr__(self):
        angle, dist = magnitude(self)
        return f"RigidMotion(angle={angle:.6f} rad, distance={dist:.6f} m)"


@dataclass(frozen=True, eq=False)
class WorldFrame:
    """Orthonormal right-handed frame with ``y_w`` along Up; axes expressed in view coordinates."""

    x_w: np.ndarray
    y_w: np.ndarray
    z_w: np.ndarray

    def __post_init__(self):
        for name in ("x_w", "y_w", "z_w"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def horizontal(self, v):
        """``(v . x_w, v . z_w)`` for a 3-vector or an ``(n, 3)`` array."""
        v = np.asarray(v, dtype=np.float64)
        return np.stack([v @ self.x_w, v @ self.z_w], axis=-1)

    def from_components(self, tx, ty, tz):
        return tx * self.x_w + ty * self.y_w + tz * self.z_w


def cross3(a, b):
    """Cross product of two 3-vectors without the overhead of ``np.cross``."""
    a0, a1, a2 = float(a[0]), float(a[1]), float(a[2])
    b0, b1, b2 = float(b[0]), float(b[1]), float(b[2])
    return np.array([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])


def make_world_frame(up):
    """Complete ``up`` into a deterministic right-handed world frame.

    The helper axis is the canonical basis vector least aligned with ``up``
    (lowest index on ties).
    """
    y = check_unit_vector(up, "up")
    e = np.zeros(3)
    e[int(np.argmin(np.abs(y)))] = 1.0
    z = cross3(y, e)
    z /= np.linalg.norm(z)
    x = cross3(y, z)
    return WorldFrame(x, y, z)


def fit_plane(points, colors=None):
    """Least-squares plane through ``points``: the least-variance direction of the centered points.

    Args:
        points: ``(n, 3)`` array, n >= 3, not collinear.
        colors: optional per-point RGB carried onto the plane.

    Returns:
        Plane with centroid = mean, normal = least-variance direction and
        offset = normal . centroid, oriented toward the origin.

    Raises:
        DegenerateInput: fewer than 3 points, or collinear/coincident points.
    """
    P = check_points(points, min_points=1)
    if len(P) < 3:
        raise DegenerateInput(f"need at least 3 points to fit a plane, got {len(P)}")
    colors = check_colors(colors, len(P))
    centroid = P.mean(axis=0)
    Q = P - centroid
    # eigenvalues of the scatter matrix are the squared singular values of Q
    w, V = np.linalg.eigh(Q.T @ Q)
    s = np.sqrt(np.clip(w[::-1], 0.0, None))
    # squared singular values leave a roundoff floor near sqrt(eps)
    if s[1] <= 1e-6 * max(s[0], 1.0):
        raise DegenerateInput("points are collinear or coincident")
    normal = V[:, 0]
    normal = normal / np.linalg.norm(normal)
    normal, offset = canonical_orientation(normal, float(normal @ centroid))
    return Plane(normal, offset, P, centroid, colors)


def transform_plane(motion, plane):
    """Move a plane (parameters, inliers and centroid) by ``motion``.

    The new offset is ``offset + R n . t``; orientation is re-canonicalized
    for the new sensor origin.
    """
    R, t = motion.rotation, motion.translation
    normal = R @ plane.normal
    normal, offset = canonical_orientation(normal, plane.offset + float(normal @ t))
    return Plane(normal, offset, motion.apply(plane.inliers), R @ plane.centroid + t, plane.colors)


def compose(a, b):
    """Motion applying ``b`` first, then ``a``."""
    return RigidMotion(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(m):
    Rt = m.rotation.T
    return RigidMotion(Rt, -(Rt @ m.translation))


def rotation_angle(R):
    """Angle of a rotation matrix in [0, pi]."""
    R = np.asarray(R, dtype=np.float64)
    c = (R[0, 0] + R[1, 1] + R[2, 2] - 1.0) / 2.0
    s = 0.5 * math.hypot(R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1])
    # atan2 keeps full precision near 0 where arccos of the trace does not.
    return float(math.atan2(s, c))


def magnitude(m):
    """``(rotation angle in radians, translation norm in meters)``."""
    return rotation_angle(m.rotation), float(np.linalg.norm(m.translation))


def rotation_about(axis, angle):
    """Rodrigues rotation matrix for a unit ``axis`` and ``angle`` in radians."""
    k = np.asarray(axis, dtype=np.float64)
    k = k / np.linalg.norm(k)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def align_vectors(a, b):
    """Minimal rotation taking unit vector ``a`` onto unit vector ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    axis = cross3(a, b)
    s = np.linalg.norm(axis)
    c = float(np.clip(a @ b, -1.0, 1.0))
    if s < 1e-15:
        if c > 0:
            return np.eye(3)
        e = np.zeros(3)
        e[int(np.argmin(np.abs(a)))] = 1.0
        perp = cross3(a, e)
        return rotation_about(perp, np.pi)
    return rotation_about(axis / s, np.arctan2(s, c))


def in_plane_basis(normal):
    """Two unit vectors spanning the plane orthogonal to ``normal``."""
    e = np.zeros(3)
    e[int(np.argmin(np.abs(normal)))] = 1.0
    u = cross3(normal, e)
    u /= np.linalg.norm(u)
    return u, cross3(normal, u)
