"""Plane tracking under a coarse prior motion."""

from dataclasses import dataclass

import numpy as np
import shapely

from ._validation import check_colors, check_points
from .classification import ClassConfig, PlaneClass, classify_plane
from .exceptions import DegenerateInput
from .geometry import fit_plane, in_plane_basis, transform_plane
from .motion import estimate_motion


@dataclass(frozen=True)
class TrackConfig:
    """Support band (meters) and minimum support as a fraction of the original inlier count.

    ``refine_iterations`` re-collects support around each refitted plane;
    0 means a single collection around the transported plane.
    """

    support_dist: float = 0.05
    min_support_ratio: float = 0.3
    refine_iterations: int = 0

    def __post_init__(self):
        if not self.support_dist > 0:
            raise ValueError("support_dist must be positive")
        if not 0.0 < self.min_support_ratio <= 1.0:
            raise ValueError("min_support_ratio must lie in (0, 1]")
        if self.refine_iterations < 0:
            raise ValueError("refine_iterations must be >= 0")


@dataclass(frozen=True, eq=False)
class TrackedPlane:
    index: int
    plane: object
    transported: object
    support: np.ndarray
    support_ratio: float


def _support_mask(plane, region, cloud, band):
    near = np.abs(cloud @ plane.normal - plane.offset) <= band
    if region is None or not near.any():
        return near
    u, v = in_plane_basis(plane.normal)
    rel = cloud[near] - plane.centroid
    inside = shapely.contains_xy(region, rel @ u, rel @ v)
    mask = np.zeros(len(cloud), dtype=bool)
    mask[np.flatnonzero(near)[inside]] = True
    return mask


def _region(plane, dilation):
    """Convex hull of the plane's inliers in its own 2D basis, grown by ``dilation``."""
    u, v = in_plane_basis(plane.normal)
    rel = plane.inliers - plane.centroid
    hull = shapely.convex_hull(shapely.multipoints(np.column_stack([rel @ u, rel @ v])))
    region = hull.buffer(dilation)
    shapely.prepare(region)
    return region


def _region_for(plane, anchor_region, anchor):
    """Re-express a region built around ``anchor`` in ``plane``'s 2D basis."""
    if anchor is plane:
        return anchor_region
    u0, v0 = in_plane_basis(anchor.normal)
    u1, v1 = in_plane_basis(plane.normal)
    ring = np.asarray(anchor_region.exterior.coords)
    pts = anchor.centroid + ring[:, :1] * u0 + ring[:, 1:] * v0 - plane.centroid
    region = shapely.Polygon(np.column_stack([pts @ u1, pts @ v1]))
    shapely.prepare(region)
    return region


def track_planes(planes_a, cloud_b, prior, cfg=TrackConfig(), colors_b=None):
    """Transport view-a planes with ``prior`` and refit those supported in view b.

    A plane is tracked when at least ``min_support_ratio`` times its inlier
    count of view-b points lie within ``support_dist`` of the transported
    plane and inside its convex hull dilated by ``support_dist``; its
    refined parameters come from an SVD fit of that support.

    Returns:
        list of TrackedPlane, in view-a index order.
    """
    cloud_b = check_points(cloud_b, min_points=0, name="cloud_b")
    colors_b = check_colors(colors_b, len(cloud_b))
    moved = [transform_plane(prior, p) for p in planes_a]
    regions = [_region(m, cfg.support_dist) for m in moved]
    masks = [_support_mask(m, r, cloud_b, cfg.support_dist) for m, r in zip(moved, regions)]
    current = list(moved)
    refined = [None] * len(planes_a)
    for it in range(cfg.refine_iterations + 1):
        if it > 0:
            new = [m if r is None else _support_mask(r, _region_for(r, reg, mv), cloud_b, cfg.support_dist)
                   for m, r, reg, mv in zip(masks, refined, regions, moved)]
            if all(np.array_equal(a, b) for a, b in zip(new, masks)):
                break
            masks = new
        owned = _exclusive(masks, current, cloud_b)
        for k, plane in enumerate(planes_a):
            if owned[k].sum() < max(cfg.min_support_ratio * plane.n_inliers, 3):
                refined[k] = None
                continue
            try:
                refined[k] = fit_plane(cloud_b[owned[k]], None if colors_b is None else colors_b[owned[k]])
            except DegenerateInput:
                refined[k] = None
        current = [m if r is None else r for m, r in zip(moved, refined)]
    return [TrackedPlane(k, refined[k], moved[k], np.flatnonzero(owned[k]),
                         float(owned[k].sum()) / planes_a[k].n_inliers)
            for k in range(len(planes_a)) if refined[k] is not None]


def _exclusive(masks, planes, cloud, rounds=10):
    """Keep each claimed point only for the plane estimate nearest to it.

    Points near a seam fall inside a neighbour's support band and tilt its
    refit. Ownership is decided against ``planes`` and then against the
    refits of the owned points until stable; a point nearest to a plane
    that did not claim it is dropped.
    """
    if len(masks) < 2:
        return masks
    claims = np.array(masks)
    claimed = claims.any(axis=0)
    if not claimed.any():
        return masks
    idx = np.flatnonzero(claimed)
    pts = cloud[idx]
    owned = claims.copy()
    for _ in range(rounds):
        dist = np.array([np.abs(pts @ p.normal - p.offset) for p in planes])
        winner = np.argmin(dist, axis=0)
        new = np.zeros_like(claims)
        new[winner, idx] = True
        new &= claims
        if np.array_equal(new, owned):
            break
        owned = new
        fitted = []
        for k, p in enumerate(planes):
            try:
                fitted.append(fit_plane(cloud[owned[k]]) if owned[k].sum() >= 3 else p)
            except DegenerateInput:
                fitted.append(p)
        planes = fitted
    return list(owned)


def refine_motion(planes_a, tracked, up_a, up_b, prior, ccfg=ClassConfig(), refine_up=True):
    """Motion from tracked planes, with the prior filling unobserved components."""
    planes_b = [t.plane for t in tracked]
    matches = [(t.index, k) for k, t in enumerate(tracked)]
    classes = [classify_plane(planes_a[i], up_a, ccfg)[0] for i, _ in matches]
    keep = [k for k, c in enumerate(classes) if c is not PlaneClass.UNCLASSIFIED]
    return estimate_motion([matches[k] for k in keep], planes_a, planes_b, up_a, up_b,
                           prior=prior, classes=[classes[k] for k in keep], config=ccfg,
                           refine=refine_up)
