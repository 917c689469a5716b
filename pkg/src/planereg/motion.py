"""Rigid motion from matched planes, one group of degrees of freedom at a time.

* rotation from matched vertical planes and the Up vectors of both views;
* horizontal translation from vertical planes, either along a single common
  direction or over the full horizontal plane with a quadric minimizer;
* vertical translation from horizontal planes.

Components without plane evidence can be filled in from a prior motion.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.transform import Rotation

from .classification import (
    ClassConfig,
    PairClass,
    PlaneClass,
    angle_between_lines,
    classify_plane,
    classify_relative,
)
from .exceptions import DegenerateInput, SingularSystem, Underconstrained
from .geometry import RigidMotion, align_vectors, cross3, make_world_frame, rotation_about

MAX_CONDITION = 1e6
_VERTICAL_COS = np.cos(np.radians(10.0))


def _align_sign(normal, reference):
    return 1.0 if float(normal @ reference) >= 0.0 else -1.0


def refine_up(horizontal_planes, up):
    """Replace ``up`` by the horizontal normal with the median deviation from it.

    Normals are first oriented along ``up``.  With an even count the lower
    of the two middle deviations is used; no planes leaves ``up`` unchanged.
    """
    up = np.asarray(up, dtype=np.float64)
    if not horizontal_planes:
        return up.copy()
    normals = np.array([getattr(p, "normal", p) for p in horizontal_planes], dtype=np.float64)
    normals *= np.where(normals @ up >= 0.0, 1.0, -1.0)[:, None]
    deviation = np.arccos(np.clip(normals @ up, -1.0, 1.0))
    order = np.argsort(deviation, kind="stable")
    chosen = normals[order[(len(order) - 1) // 2]]
    return chosen / np.linalg.norm(chosen)


def _project_off(n, up):
    v = n - (n @ up) * up
    return v / np.linalg.norm(v)


def rotation_from_plane(n_a, n_b, up_a, up_b):
    """Rotation taking the local frame (N, Up, Up x N) of view a onto that of view b.

    Normals are projected orthogonally to their view's Up before building
    the frames, so the result is a proper rotation mapping ``up_a`` to
    ``up_b`` and the projected ``n_a`` to the projected ``n_b``.

    Raises:
        DegenerateInput: a normal is within 10 degrees of its Up vector.
    """
    n_a, n_b, up_a, up_b = (np.asarray(v, dtype=np.float64) for v in (n_a, n_b, up_a, up_b))
    if abs(n_a @ up_a) > _VERTICAL_COS or abs(n_b @ up_b) > _VERTICAL_COS:
        raise DegenerateInput("plane too close to horizontal to define a rotation frame")
    n_a = _project_off(n_a, up_a)
    n_b = _project_off(n_b, up_b)
    B_a = np.column_stack([n_a, up_a, cross3(up_a, n_a)])
    B_b = np.column_stack([n_b, up_b, cross3(up_b, n_b)])
    return B_b @ B_a.T


def project_to_so3(M):
    """Closest rotation to ``M`` in Frobenius norm."""
    U, _, Vt = np.linalg.svd(M)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt)) or 1.0])
    return U @ D @ Vt


def average_rotations(rotations):
    """Chordal L2 mean: SO(3) projection of the entrywise mean matrix."""
    rotations = [np.asarray(R, dtype=np.float64) for R in rotations]
    if not rotations:
        raise ValueError("need at least one rotation")
    if len(rotations) == 1:
        return rotations[0].copy()
    return project_to_so3(np.mean(rotations, axis=0))


def horizontal_translation_parallel(normals, offsets_a, offsets_b, frame):
    """Translation along the common direction of parallel vertical planes.

    Args:
        normals: ``(n, 3)`` view-b normals of the matched planes.
        offsets_a: offsets of the view-a planes after rotation (rotation
            leaves offsets unchanged), signed along the same normals.
        offsets_b: offsets of the view-b planes.
        frame: world frame of view b.

    Returns:
        ``(t, direction)``: the ``(x_w, z_w)`` components of
        ``median(d_b - d_a) * N`` and the horizontal unit direction ``N``.
    """
    normals = np.atleast_2d(np.asarray(normals, dtype=np.float64))
    delta = np.asarray(offsets_b, dtype=np.float64) - np.asarray(offsets_a, dtype=np.float64)
    ref = normals[0]
    signs = np.where(normals @ ref >= 0.0, 1.0, -1.0)
    direction = (normals * signs[:, None]).mean(axis=0)
    direction = _project_off(direction, frame.y_w)
    delta = delta * np.where(normals @ direction >= 0.0, 1.0, -1.0)
    t_n = float(np.median(delta)) * direction
    return frame.horizontal(t_n), direction


@dataclass(frozen=True, eq=False)
class QuadricAccumulator:
    """Sum of homogeneous 2D plane quadrics ``p p^T`` over the horizontal plane."""

    K: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    count: int = 0


def quadric_accumulate(acc, n, d_a, d_b, frame):
    """Add ``p p^T`` with ``p = [N.x_w, N.z_w, -(d_a - d_b)]``.

    The 2D normal part is rescaled to unit length and the offset term by
    the same factor, so tilted planes keep full weight.
    """
    n = np.asarray(n, dtype=np.float64)
    ab = frame.horizontal(n)
    scale = np.linalg.norm(ab)
    if scale == 0.0:
        raise DegenerateInput("normal has no horizontal component")
    p = np.array([ab[0], ab[1], -(d_a - d_b)]) / scale
    return QuadricAccumulator(acc.K + np.outer(p, p), acc.count + 1)


def quadric_minimize(acc):
    """Horizontal ``(x_w, z_w)`` translation encoded by the accumulated quadric.

    The quadric's stationary point ``v* = -A^{-1} b`` (with ``A`` the top
    left 2x2 block and ``b`` the upper part of the last column) moves the
    view-b planes back onto the view-a planes, i.e. it is the opposite of
    the a-to-b sensor translation; ``-v*`` is returned so the result agrees
    with :func:`horizontal_translation_parallel`.

    Raises:
        SingularSystem: fewer than two planes or condition number above 1e6.
    """
    A = acc.K[:2, :2]
    b = acc.K[:2, 2]
    if acc.count < 2 or np.linalg.cond(A) > MAX_CONDITION:
        raise SingularSystem("quadric system is singular (parallel or too few planes)")
    v_star = -np.linalg.solve(A, b)
    return -v_star


def vertical_translation(offsets_a, offsets_b):
    """Median of ``d_b - d_a`` with both offsets measured along Up."""
    delta = np.asarray(offsets_b, dtype=np.float64) - np.asarray(offsets_a, dtype=np.float64)
    if delta.size == 0:
        raise ValueError("no horizontal matches")
    return float(np.median(delta))


def yaw_about(R, axis):
    """Twist angle of ``R`` about ``axis`` (swing-twist decomposition)."""
    q = Rotation.from_matrix(R).as_quat()
    return 2.0 * np.arctan2(float(q[:3] @ axis), q[3])


@dataclass(frozen=True, eq=False)
class ObservedDoF:
    rotation: bool = False
    horizontal_full: bool = False
    horizontal_1d: Optional[np.ndarray] = None
    vertical: bool = False

    @property
    def all(self):
        return self.rotation and self.horizontal_full and self.vertical


@dataclass(frozen=True, eq=False)
class MotionEstimate:
    """An estimated motion and which of its components came from plane evidence.

    ``frame`` is the world frame (in view-b coordinates) the translation was
    assembled in; ``up_a``/``up_b`` are the refined Up vectors.
    """

    motion: RigidMotion
    observed: ObservedDoF
    sources: dict
    frame: object
    up_a: np.ndarray
    up_b: np.ndarray

    def observed_translation_basis(self):
        """Orthonormal columns spanning the translation directions backed by planes."""
        cols = []
        if self.observed.horizontal_full:
            cols += [self.frame.x_w, self.frame.z_w]
        elif self.observed.horizontal_1d is not None:
            cols.append(self.observed.horizontal_1d)
        if self.observed.vertical:
            cols.append(self.frame.y_w)
        if not cols:
            return np.zeros((3, 0))
        return np.column_stack(cols)


def estimate_motion(matches, planes_a, planes_b, up_a, up_b, prior=None, *,
                    classes=None, config=ClassConfig(), refine=True, partial=False):
    """Estimate the view-a to view-b motion from plane matches.

    Args:
        matches: sequence of ``(index_a, index_b)``.
        planes_a, planes_b: plane lists the indices refer to.
        up_a, up_b: unit Up vectors of each view.
        prior: optional RigidMotion filling components without plane evidence.
        classes: per-match PlaneClass; computed from ``up_a`` when omitted.
        config: classification thresholds.
        refine: refine Up in each view from the matched horizontal planes.
        partial: return identity/zero for unobserved components instead of
            raising (used to score single candidates).

    Raises:
        Underconstrained: some component has neither plane evidence nor prior.
    """
    up_a = np.asarray(up_a, dtype=np.float64)
    up_b = np.asarray(up_b, dtype=np.float64)
    matches = [(int(i), int(j)) for i, j in matches]
    if classes is None:
        classes = [classify_plane(planes_a[i], up_a, config)[0] for i, _ in matches]
    vertical = [m for m, c in zip(matches, classes) if c is PlaneClass.VERTICAL]
    horizontal = [m for m, c in zip(matches, classes) if c is PlaneClass.HORIZONTAL]

    if refine and horizontal:
        up_a = refine_up([planes_a[i] for i, _ in horizontal], up_a)
        up_b = refine_up([planes_b[j] for _, j in horizontal], up_b)

    rotations = []
    used_vertical = []
    for i, j in vertical:
        try:
            rotations.append(rotation_from_plane(planes_a[i].normal, planes_b[j].normal, up_a, up_b))
        except DegenerateInput:
            continue
        used_vertical.append((i, j))

    missing = []
    R_align = align_vectors(up_a, up_b)
    if rotations:
        R = average_rotations(rotations)
    elif prior is not None:
        R = rotation_about(up_b, yaw_about(prior.rotation @ R_align.T, up_b)) @ R_align
    else:
        R = R_align
        missing.append("rotation")

    frame = make_world_frame(up_b)
    t_x = t_z = t_y = 0.0
    direction = None
    horizontal_full = False

    if used_vertical:
        n_b = np.array([planes_b[j].normal for _, j in used_vertical])
        d_b = np.array([planes_b[j].offset for _, j in used_vertical])
        n_a = np.array([R @ planes_a[i].normal for i, _ in used_vertical])
        d_a = np.array([planes_a[i].offset for i, _ in used_vertical])
        s = np.where(np.einsum("ij,ij->i", n_a, n_b) >= 0.0, 1.0, -1.0)
        d_a = d_a * s
        if _has_non_parallel(n_b, config):
            acc = QuadricAccumulator()
            for k in range(len(used_vertical)):
                acc = quadric_accumulate(acc, n_b[k], d_a[k], d_b[k], frame)
            try:
                t_x, t_z = quadric_minimize(acc)
                horizontal_full = True
            except SingularSystem:
                pass
        if not horizontal_full:
            (t_x, t_z), direction = horizontal_translation_parallel(n_b, d_a, d_b, frame)
    else:
        missing.append("horizontal")

    if horizontal:
        da_up = []
        db_up = []
        for i, j in horizontal:
            n_a = R @ planes_a[i].normal
            da_up.append(_align_sign(n_a, up_b) * planes_a[i].offset)
            db_up.append(_align_sign(planes_b[j].normal, up_b) * planes_b[j].offset)
        t_y = vertical_translation(da_up, db_up)
    else:
        missing.append("vertical")

    if direction is not None:
        missing.append("horizontal_complement")

    t = frame.from_components(t_x, t_y, t_z)
    if prior is not None:
        t_p = prior.translation
        if "horizontal" in missing:
            t = t + (t_p @ frame.x_w) * frame.x_w + (t_p @ frame.z_w) * frame.z_w
        if "horizontal_complement" in missing:
            comp = cross3(frame.y_w, direction)
            comp /= np.linalg.norm(comp)
            t = t + (t_p @ comp) * comp
        if "vertical" in missing:
            t = t + (t_p @ frame.y_w) * frame.y_w
    elif missing and not partial:
        raise Underconstrained(missing)

    observed = ObservedDoF(
        rotation=bool(rotations),
        horizontal_full=horizontal_full,
        horizontal_1d=direction,
        vertical=bool(horizontal),
    )
    sources = {"vertical": len(used_vertical), "horizontal": len(horizontal)}
    return MotionEstimate(RigidMotion(R, t), observed, sources, frame, up_a, up_b)


def _has_non_parallel(normals, config):
    for k in range(len(normals)):
        for m in range(k + 1, len(normals)):
            alpha = angle_between_lines(normals[k], normals[m])
            if classify_relative(alpha, config) is PairClass.VERTICAL_NON_PARALLEL:
                return True
    return False
