"""Greedy sequential RANSAC plane detection."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_colors, check_points, check_random_state
from .exceptions import DegenerateInput
from .geometry import Plane, fit_plane

_BATCH = 128
_MAX_REFITS = 5


@dataclass(frozen=True)
class DetectConfig:
    """RANSAC settings. ``min_inliers=None`` means ``max(500, 1% of the cloud)``."""

    distance_threshold: float = 0.02
    min_inliers: Optional[int] = None
    max_planes: int = 10
    ransac_iterations: int = 1000
    rng_seed: int = 0

    def __post_init__(self):
        if not self.distance_threshold > 0:
            raise ValueError("distance_threshold must be positive")
        if self.min_inliers is not None and self.min_inliers < 3:
            raise ValueError("min_inliers must be >= 3")
        if self.max_planes < 1:
            raise ValueError("max_planes must be >= 1")
        if self.ransac_iterations < 1:
            raise ValueError("ransac_iterations must be >= 1")

    def resolved_min_inliers(self, n_points):
        if self.min_inliers is not None:
            return self.min_inliers
        return max(500, int(np.ceil(0.01 * n_points)))


def _sample_triplets(rng, n, count):
    idx = rng.integers(0, n, size=(count, 3))
    bad = (idx[:, 0] == idx[:, 1]) | (idx[:, 0] == idx[:, 2]) | (idx[:, 1] == idx[:, 2])
    while bad.any():
        idx[bad] = rng.integers(0, n, size=(int(bad.sum()), 3))
        bad = (idx[:, 0] == idx[:, 1]) | (idx[:, 0] == idx[:, 2]) | (idx[:, 1] == idx[:, 2])
    return idx


def _best_hypothesis(points, rng, iterations, threshold):
    """Plane through 3 random points with the most inliers; ties go to the
    lower summed squared inlier distance."""
    n = len(points)
    triplets = _sample_triplets(rng, n, iterations)
    best = (-1, np.inf)
    best_plane = None
    for start in range(0, iterations, _BATCH):
        tri = points[triplets[start:start + _BATCH]]
        normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        norms = np.linalg.norm(normals, axis=1)
        ok = norms > 1e-12
        if not ok.any():
            continue
        normals = normals[ok] / norms[ok, None]
        offsets = np.einsum("ij,ij->i", normals, tri[ok, 0])
        dist = np.abs(points @ normals.T - offsets)
        inside = dist <= threshold
        counts = inside.sum(axis=0)
        sq = np.where(inside, dist * dist, 0.0).sum(axis=0)
        for k in range(len(counts)):
            key = (int(counts[k]), -float(sq[k]))
            if key > (best[0], -best[1]):
                best = (key[0], -key[1])
                best_plane = (normals[k], offsets[k])
    return best_plane, best[0]


def detect_planes(cloud, colors=None, config=DetectConfig()):
    """Extract planes one at a time, removing each plane's inliers before the next.

    Each plane is refit by SVD on its inlier set, re-selecting the inliers
    within ``distance_threshold`` of the fit until the set is stable.

    Returns:
        Planes sorted by decreasing inlier count; empty when no candidate
        reaches ``min_inliers``.
    """
    return [plane for plane, _ in _detect(cloud, colors, config)]


def _detect(cloud, colors, config):
    points = check_points(cloud, name="cloud")
    colors = check_colors(colors, len(points))
    rng = check_random_state(config.rng_seed)
    min_inliers = config.resolved_min_inliers(len(points))
    thr = config.distance_threshold
    remaining = np.arange(len(points))
    planes = []
    while len(planes) < config.max_planes and len(remaining) >= max(min_inliers, 3):
        pts = points[remaining]
        hyp, count = _best_hypothesis(pts, rng, config.ransac_iterations, thr)
        if hyp is None or count < min_inliers:
            break
        mask = np.abs(pts @ hyp[0] - hyp[1]) <= thr
        try:
            plane, mask = _refit(pts, mask, thr)
        except DegenerateInput:
            break
        if mask.sum() < min_inliers:
            break
        chosen = remaining[mask]
        plane = Plane(plane.normal, plane.offset, points[chosen], plane.centroid,
                      None if colors is None else colors[chosen])
        planes.append((plane, chosen))
        remaining = remaining[~mask]
    planes = _reassign(points, colors, planes, thr)
    planes.sort(key=lambda pc: -pc[0].n_inliers)
    return planes


def _reassign(points, colors, planes, thr):
    """Give each claimed point to its nearest detected plane and refit.

    Greedy extraction lets an early plane absorb points of a later one near
    their intersection; those points tilt the early fit.
    """
    if len(planes) < 2:
        return planes
    for _ in range(_MAX_REFITS):
        idx = np.concatenate([chosen for _, chosen in planes])
        owner = np.concatenate([np.full(len(chosen), k) for k, (_, chosen) in enumerate(planes)])
        normals = np.array([p.normal for p, _ in planes])
        offsets = np.array([p.offset for p, _ in planes])
        dist = np.abs(points[idx] @ normals.T - offsets)
        nearest = np.argmin(dist, axis=1)
        if np.array_equal(nearest, owner):
            return planes
        updated = []
        for k in range(len(planes)):
            chosen = np.sort(idx[nearest == k])
            if len(chosen) < 3:
                continue
            try:
                fit, mask = _refit(points[chosen], np.ones(len(chosen), bool), thr)
            except DegenerateInput:
                continue
            chosen = chosen[mask]
            updated.append((Plane(fit.normal, fit.offset, points[chosen], fit.centroid,
                                  None if colors is None else colors[chosen]), chosen))
        planes = updated
    return planes


def _refit(pts, mask, thr):
    for _ in range(_MAX_REFITS):
        plane = fit_plane(pts[mask])
        new_mask = np.abs(pts @ plane.normal - plane.offset) <= thr
        if np.array_equal(new_mask, mask):
            return plane, mask
        if new_mask.sum() < 3:
            break
        mask = new_mask
    # Not converged: keep only points that satisfy the bound for the last fit.
    plane = fit_plane(pts[mask])
    mask = mask & (np.abs(pts @ plane.normal - plane.offset) <= thr)
    centroid = pts[mask].mean(axis=0)
    return Plane(plane.normal, plane.offset, pts[mask], centroid), mask


class PlaneDetector(ClusterMixin, BaseEstimator):
    """Sequential RANSAC plane detector with a scikit-learn clustering interface.

    Parameters
    ----------
    distance_threshold : float, default=0.02
        Maximum point-to-plane distance of an inlier, in meters.
    min_inliers : int or None, default=None
        Smallest accepted plane; None means ``max(500, 1% of the cloud)``.
    max_planes : int, default=10
    ransac_iterations : int, default=1000
        Hypotheses drawn per extracted plane.
    random_state : int, default=0

    Attributes
    ----------
    planes_ : list of Plane
        Detected planes, largest first.
    labels_ : ndarray of shape (n_points,)
        Index into ``planes_`` for each point, -1 for unassigned points.
    """

    def __init__(self, distance_threshold=0.02, min_inliers=None, max_planes=10,
                 ransac_iterations=1000, random_state=0):
        self.distance_threshold = distance_threshold
        self.min_inliers = min_inliers
        self.max_planes = max_planes
        self.ransac_iterations = ransac_iterations
        self.random_state = random_state

    def _config(self):
        return DetectConfig(self.distance_threshold, self.min_inliers, self.max_planes,
                            self.ransac_iterations, self.random_state)

    def fit(self, X, y=None, colors=None):
        X = check_points(X, name="X")
        found = _detect(X, colors, self._config())
        self.planes_ = [plane for plane, _ in found]
        self.labels_ = np.full(len(X), -1, dtype=np.intp)
        for k, (_, idx) in enumerate(found):
            self.labels_[idx] = k
        self.n_features_in_ = 3
        return self

    def fit_predict(self, X, y=None, colors=None):
        return self.fit(X, colors=colors).labels_

    @property
    def n_planes_(self):
        check_is_fitted(self, "planes_")
        return len(self.planes_)
