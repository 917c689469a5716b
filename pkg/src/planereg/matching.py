"""Plane matching between two views without a prior motion.

Planes of each view are grouped into same-category pairs, pairs are compared
across views with view-independent penalties, and every surviving candidate
is checked by computing its motion and testing the implied plane matches.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Optional

import numpy as np
import shapely
from scipy.spatial import ConvexHull, QhullError

from ._validation import check_random_state
from .classification import (
    ClassConfig,
    PairClass,
    PlaneClass,
    angle_between_lines,
    classify_plane,
    pair_class,
)
from .exceptions import NoMotion, Underconstrained
from .geometry import in_plane_basis, magnitude
from .motion import estimate_motion


class Reason:
    MAGNITUDE_EXCEEDED = "MagnitudeExceeded"
    NORMAL_ANGLE = "NormalAngle"
    OFFSET_DIFFERENCE = "OffsetDifference"
    INLIER_DISTANCE = "InlierDistance"
    HULL_OVERLAP = "HullOverlap"
    COLOR_HISTOGRAM = "ColorHistogram"


@dataclass(frozen=True)
class ValidationConfig:
    """Gates applied to pair penalties and to candidate motions (radians, meters)."""

    angle_penalty_max: float = math.radians(10.0)
    distance_penalty_max: float = 0.10
    motion_rot_max: float = math.pi / 2
    motion_trans_max: float = 5.0
    normal_angle_max: float = math.radians(10.0)
    offset_diff_max: float = 0.10
    inlier_sample: int = 100
    inlier_dist_max: float = 0.05
    hull_overlap_min: float = 0.3
    hist_similarity_min: float = 0.5
    hist_bins: tuple = (8, 8)

    def __post_init__(self):
        for name in ("angle_penalty_max", "distance_penalty_max", "motion_rot_max",
                     "motion_trans_max", "normal_angle_max", "offset_diff_max",
                     "inlier_dist_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.inlier_sample < 1:
            raise ValueError("inlier_sample must be >= 1")
        for name in ("hull_overlap_min", "hist_similarity_min"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")


@dataclass(frozen=True)
class PlanePair:
    """Two planes of one view. ``signed_gap`` is ``N_first . (P_first - P_second)``
    and ``reverse_gap`` the same with the roles swapped; horizontal pairs
    measure both along Up."""

    first: int
    second: int
    category: PairClass
    alpha_rel: float
    signed_gap: float
    reverse_gap: float


@dataclass(frozen=True)
class PairCandidate:
    """Hypothesis that two pairs (or, for the fallback, two single planes) correspond."""

    implied_matches: tuple
    penalty: float = 0.0
    pair_a: Optional[PlanePair] = None
    pair_b: Optional[PlanePair] = None


@dataclass(frozen=True, eq=False)
class Validation:
    """Outcome of checking one candidate.

    ``distances`` maps each implied match to its excess mean inlier distance
    and ``support`` counts the view-a planes explained by the motion.
    """

    candidate: PairCandidate
    accepted: bool
    estimate: object
    reason: Optional[str] = None
    distances: dict = field(default_factory=dict)
    support: int = 0

    @property
    def motion(self):
        return self.estimate.motion


@dataclass(frozen=True)
class MatchSet:
    matches: tuple = ()
    classes: tuple = ()
    distances: tuple = ()

    def __len__(self):
        return len(self.matches)

    def __iter__(self):
        return iter(self.matches)


@dataclass(frozen=True, eq=False)
class MatchResult:
    matches: MatchSet
    estimate: object
    validations: tuple = ()

    @property
    def motion(self):
        return self.estimate.motion


# -- per-plane features ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PlaneFeatures:
    """Cached data for validation: an inlier sample, its mean residual to the
    plane and a color histogram. The convex hull (3D vertices on the plane)
    and its area are computed on first use."""

    plane: object
    sample: np.ndarray
    residual: float
    histogram: Optional[np.ndarray]

    @cached_property
    def _hull(self):
        p = self.plane
        u, v = in_plane_basis(p.normal)
        rel = p.inliers - p.centroid
        ring, area = _hull2d(np.column_stack([rel @ u, rel @ v]))
        if ring is None or area <= 0.0:
            return np.zeros((0, 3)), 0.0, None
        return p.centroid + ring[:, :1] * u + ring[:, 1:] * v, area, ring

    @property
    def hull(self):
        return self._hull[0]

    @property
    def area(self):
        return self._hull[1]

    @cached_property
    def polygon(self):
        """Hull polygon in the plane's own in-plane basis about its centroid."""
        return _polygon(self._hull[2])


def rgb_to_hue_saturation(colors):
    rgb = np.asarray(colors, dtype=np.float64) / 255.0
    mx = rgb.max(axis=1)
    mn = rgb.min(axis=1)
    chroma = mx - mn
    sat = np.divide(chroma, mx, out=np.zeros_like(mx), where=mx > 0)
    r, g, b = rgb.T
    safe = np.where(chroma > 0, chroma, 1.0)
    hue = np.where(
        mx == r, ((g - b) / safe) % 6.0,
        np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    ) / 6.0
    hue = np.where(chroma > 0, hue, 0.0)
    return hue, sat


def color_histogram(colors, bins=(8, 8)):
    """L1-normalized hue-saturation histogram."""
    hue, sat = rgb_to_hue_saturation(colors)
    hist, _, _ = np.histogram2d(hue, sat, bins=bins, range=[[0.0, 1.0], [0.0, 1.0]])
    total = hist.sum()
    return hist / total if total > 0 else hist


def histogram_intersection(h1, h2):
    return float(np.minimum(h1, h2).sum())


def _hull2d(xy):
    """Ordered convex hull vertices of 2D points and the hull area, or ``(None, 0)``."""
    if len(xy) < 3:
        return None, 0.0
    try:
        hull = ConvexHull(xy)
    except QhullError:
        return None, 0.0
    # qhull reports a 2D hull's area as its volume
    return xy[hull.vertices], float(hull.volume)


def _polygon(ring):
    """Polygon from ordered convex vertices (either orientation)."""
    if ring is None or len(ring) < 3:
        return None
    poly = shapely.polygons(ring)
    return poly if poly.area > 0.0 else None


def plane_features(plane, vcfg=ValidationConfig(), random_state=None):
    rng = check_random_state(random_state)
    pts = plane.inliers
    k = min(vcfg.inlier_sample, len(pts))
    sample = pts[rng.choice(len(pts), size=k, replace=False)]
    residual = float(np.mean(np.abs(plane.signed_distance(sample))))
    hist = color_histogram(plane.colors, vcfg.hist_bins) if plane.colors is not None else None
    return PlaneFeatures(plane, sample, residual, hist)


# -- pairs and penalties -----------------------------------------------------

def _pair_gaps(pa, pb, category, up):
    na, nb = pa.normal, pb.normal
    if category is PairClass.HORIZONTAL:
        na = na if na @ up >= 0 else -na
        nb = nb if nb @ up >= 0 else -nb
    delta = pa.centroid - pb.centroid
    return float(na @ delta), float(nb @ -delta)


def generate_pairs(planes, classes, up, config=ClassConfig()):
    """All unordered pairs of same-class planes whose pair category is not OTHER."""
    pairs = []
    for i, j in combinations(range(len(planes)), 2):
        alpha = angle_between_lines(planes[i].normal, planes[j].normal)
        category = pair_class(classes[i], classes[j], alpha, config)
        if category is PairClass.OTHER:
            continue
        gap, reverse = _pair_gaps(planes[i], planes[j], category, up)
        pairs.append(PlanePair(i, j, category, alpha, gap, reverse))
    return pairs


def assignment_penalties(pa, pb):
    """Penalties ``(straight, swapped)`` for the two role assignments of view-b's pair."""
    if pa.category is not pb.category:
        raise ValueError("pairs belong to different categories")
    if pa.category is PairClass.VERTICAL_NON_PARALLEL:
        e = abs(pa.alpha_rel - pb.alpha_rel)
        return e, e
    if pa.category is PairClass.VERTICAL_PARALLEL:
        # Canonical normal signs depend on the sensor position, so only the
        # unsigned gap is view-independent; both roles score alike.
        e = abs(_unsigned_gap(pa) - _unsigned_gap(pb))
        return e, e
    return abs(pa.signed_gap - pb.signed_gap), abs(pa.signed_gap - pb.reverse_gap)


def _unsigned_gap(pair):
    return 0.5 * (abs(pair.signed_gap) + abs(pair.reverse_gap))


def _implied(pa, pb, swapped):
    if swapped:
        return ((pa.first, pb.second), (pa.second, pb.first))
    return ((pa.first, pb.first), (pa.second, pb.second))


def pair_penalty(pa, pb):
    """Smallest view-agnostic penalty over both role assignments.

    Returns ``(penalty, implied_matches)``: relative-angle difference for
    non-parallel pairs, signed-gap difference for parallel ones.
    """
    straight, swapped = assignment_penalties(pa, pb)
    if swapped < straight:
        return swapped, _implied(pa, pb, True)
    return straight, _implied(pa, pb, False)


def penalty_gate(category, vcfg):
    if category is PairClass.VERTICAL_NON_PARALLEL:
        return vcfg.angle_penalty_max
    return vcfg.distance_penalty_max


def generate_candidates(pairs_a, pairs_b, vcfg=ValidationConfig()):
    """Candidates for every same-category pair of pairs and every role
    assignment passing the penalty gate."""
    out = []
    for pa in pairs_a:
        for pb in pairs_b:
            if pa.category is not pb.category:
                continue
            gate = penalty_gate(pa.category, vcfg)
            for swapped, e in zip((False, True), assignment_penalties(pa, pb)):
                if e <= gate:
                    out.append(PairCandidate(_implied(pa, pb, swapped), e, pa, pb))
    return out


# -- validation --------------------------------------------------------------

def _moved_plane(motion, plane):
    n = motion.rotation @ plane.normal
    return n, plane.offset + float(n @ motion.translation)


def hull_overlap(feat_a, feat_b, plane_a, plane_b, estimate):
    """Overlap ratio of the moved view-a hull and the view-b hull inside plane b.

    Translation components without plane evidence are replaced by the
    centroid offset. Returns None when the rotation itself is unobserved.
    """
    if not estimate.observed.rotation:
        return None
    if feat_a.area <= 0.0 or feat_b.area <= 0.0:
        return 0.0
    m = estimate.motion
    hull_a = m.apply(feat_a.hull)
    delta = plane_b.centroid - m.apply(plane_a.centroid)
    O = estimate.observed_translation_basis()
    hull_a = hull_a + (delta - O @ (O.T @ delta))
    u, v = in_plane_basis(plane_b.normal)
    basis = np.column_stack([u, v])
    # Projections of convex rings onto a nearly parallel plane stay convex.
    poly_a = _polygon((hull_a - plane_b.centroid) @ basis)
    if feat_b.plane is plane_b:
        poly_b = feat_b.polygon
    else:
        poly_b = _polygon((feat_b.hull - plane_b.centroid) @ basis)
    if poly_a is None or poly_b is None:
        return 0.0
    smaller = min(poly_a.area, poly_b.area)
    if smaller <= 0.0:
        return 0.0
    return float(poly_a.intersection(poly_b).area / smaller)


def check_match(estimate, plane_a, plane_b, feat_a, feat_b, vcfg):
    """Plane-wise checks of one implied match; returns ``(reason or None, excess distance)``."""
    m = estimate.motion
    n_a, d_a = _moved_plane(m, plane_a)
    if n_a @ plane_b.normal < 0:
        n_a, d_a = -n_a, -d_a
    if angle_between_lines(n_a, plane_b.normal) > vcfg.normal_angle_max:
        return Reason.NORMAL_ANGLE, math.inf
    if abs(d_a - plane_b.offset) > vcfg.offset_diff_max:
        return Reason.OFFSET_DIFFERENCE, math.inf
    sample_a = m.apply(feat_a.sample)
    to_b = np.mean(np.abs(sample_a @ plane_b.normal - plane_b.offset))
    to_a = np.mean(np.abs(feat_b.sample @ n_a - d_a))
    excess = float(0.5 * (to_b + to_a) - 0.5 * (feat_a.residual + feat_b.residual))
    if excess > vcfg.inlier_dist_max:
        return Reason.INLIER_DISTANCE, excess
    overlap = hull_overlap(feat_a, feat_b, plane_a, plane_b, estimate)
    if overlap is not None and overlap < vcfg.hull_overlap_min:
        return Reason.HULL_OVERLAP, excess
    if feat_a.histogram is not None and feat_b.histogram is not None:
        if histogram_intersection(feat_a.histogram, feat_b.histogram) < vcfg.hist_similarity_min:
            return Reason.COLOR_HISTOGRAM, excess
    return None, excess


def motion_support(estimate, planes_a, planes_b, classes_a, classes_b, vcfg):
    """Number of view-a planes with a same-class view-b plane consistent with the motion.

    Offsets are compared only along translation directions the estimate
    observes; vertical planes are skipped when the rotation is unobserved.
    """
    m = estimate.motion
    O = estimate.observed_translation_basis()
    min_cos = math.cos(vcfg.normal_angle_max)
    count = 0
    for i, pa in enumerate(planes_a):
        ca = classes_a[i]
        if ca is PlaneClass.UNCLASSIFIED:
            continue
        if ca is PlaneClass.VERTICAL and not estimate.observed.rotation:
            continue
        n, d = _moved_plane(m, pa)
        check_offset = np.linalg.norm(O.T @ n) >= min_cos
        for j, pb in enumerate(planes_b):
            if classes_b[j] is not ca:
                continue
            s = 1.0 if n @ pb.normal >= 0 else -1.0
            if angle_between_lines(n, pb.normal) > vcfg.normal_angle_max:
                continue
            if check_offset and abs(s * d - pb.offset) > vcfg.offset_diff_max:
                continue
            count += 1
            break
    return count


def validate_candidate(cand, planes_a, planes_b, up_a, up_b, vcfg=ValidationConfig(),
                       ccfg=ClassConfig(), *, classes_a=None, classes_b=None,
                       features_a=None, features_b=None, random_state=None):
    """Compute a candidate's motion and test every implied match.

    Vertical candidates give rotation and horizontal translation,
    horizontal ones vertical translation with an Up-aligning rotation.
    The candidate is rejected when the motion magnitude exceeds the gates or
    any implied match fails a plane-wise check.
    """
    if classes_a is None:
        classes_a = [classify_plane(p, up_a, ccfg)[0] for p in planes_a]
    if classes_b is None:
        classes_b = [classify_plane(p, up_b, ccfg)[0] for p in planes_b]
    if features_a is None or features_b is None:
        rng = check_random_state(random_state)
        if features_a is None:
            features_a = [plane_features(p, vcfg, rng) for p in planes_a]
        if features_b is None:
            features_b = [plane_features(p, vcfg, rng) for p in planes_b]

    matches = list(cand.implied_matches)
    est = estimate_motion(matches, planes_a, planes_b, up_a, up_b,
                          classes=[classes_a[i] for i, _ in matches], config=ccfg,
                          partial=True)
    angle, dist = magnitude(est.motion)
    if angle > vcfg.motion_rot_max or dist > vcfg.motion_trans_max:
        return Validation(cand, False, est, Reason.MAGNITUDE_EXCEEDED)
    distances = {}
    for i, j in matches:
        reason, excess = check_match(est, planes_a[i], planes_b[j], features_a[i], features_b[j], vcfg)
        if reason is not None:
            return Validation(cand, False, est, reason, distances)
        distances[(i, j)] = excess
    support = motion_support(est, planes_a, planes_b, classes_a, classes_b, vcfg)
    return Validation(cand, True, est, None, distances, support)


# -- conflict resolution -------------------------------------------------------

def resolve_conflicts(validations, classes_a=None):
    """One-to-one match set from accepted candidates.

    Matches are ranked by the support of the candidate that produced them
    (more explained planes first), then by smallest mean inlier distance,
    then by index; each is kept unless one of its planes is already taken.
    """
    best = {}
    for val in validations:
        if not val.accepted:
            continue
        for match, dist in val.distances.items():
            key = (-val.support, dist)
            if match not in best or key < best[match]:
                best[match] = key
    ranked = sorted(best.items(), key=lambda kv: (kv[1], kv[0]))
    used_a, used_b = set(), set()
    kept = []
    for (i, j), (_, dist) in ranked:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        kept.append((i, j, dist))
    kept.sort()
    classes = tuple(classes_a[i] for i, _, _ in kept) if classes_a is not None else ()
    return MatchSet(tuple((i, j) for i, j, _ in kept), classes, tuple(d for _, _, d in kept))


def single_plane_candidates(classes_a, classes_b):
    out = []
    for i, ca in enumerate(classes_a):
        if ca is PlaneClass.UNCLASSIFIED:
            continue
        for j, cb in enumerate(classes_b):
            if cb is ca:
                out.append(PairCandidate(((i, j),)))
    return out


def match_single_planes(planes_a, planes_b, up_a, up_b, vcfg=ValidationConfig(),
                        ccfg=ClassConfig(), *, classes_a=None, classes_b=None,
                        features_a=None, features_b=None, random_state=None):
    """Fallback matching of same-class single planes, validated like pairs."""
    if classes_a is None:
        classes_a = [classify_plane(p, up_a, ccfg)[0] for p in planes_a]
    if classes_b is None:
        classes_b = [classify_plane(p, up_b, ccfg)[0] for p in planes_b]
    if features_a is None or features_b is None:
        rng = check_random_state(random_state)
        if features_a is None:
            features_a = [plane_features(p, vcfg, rng) for p in planes_a]
        if features_b is None:
            features_b = [plane_features(p, vcfg, rng) for p in planes_b]
    vals = [
        validate_candidate(c, planes_a, planes_b, up_a, up_b, vcfg, ccfg,
                           classes_a=classes_a, classes_b=classes_b,
                           features_a=features_a, features_b=features_b)
        for c in single_plane_candidates(classes_a, classes_b)
    ]
    return resolve_conflicts(vals, classes_a), vals


def complete_matches(match_set, planes_a, planes_b, up_a, up_b, vcfg=ValidationConfig(),
                     ccfg=ClassConfig(), *, classes_a, classes_b, features_a, features_b):
    """Add single-plane matches to a match set that leaves degrees of freedom open.

    Each unmatched same-class plane combination is validated together with
    the existing matches; accepted additions are resolved like pair
    candidates and merged.
    """
    used_a = {i for i, _ in match_set.matches}
    used_b = {j for _, j in match_set.matches}
    base = tuple(match_set.matches)
    vals = []
    for cand in single_plane_candidates(classes_a, classes_b):
        (i, j), = cand.implied_matches
        if i in used_a or j in used_b:
            continue
        val = validate_candidate(PairCandidate(base + ((i, j),)), planes_a, planes_b, up_a, up_b,
                                 vcfg, ccfg, classes_a=classes_a, classes_b=classes_b,
                                 features_a=features_a, features_b=features_b)
        if val.accepted:
            val = Validation(cand, True, val.estimate, None, {(i, j): val.distances[(i, j)]},
                             val.support)
        vals.append(val)
    added = resolve_conflicts(vals, classes_a)
    merged = sorted(zip(base + added.matches, match_set.distances + added.distances))
    matches = tuple(m for m, _ in merged)
    return MatchSet(matches, tuple(classes_a[i] for i, _ in matches),
                    tuple(d for _, d in merged)), vals


def _final_check(estimate, matches, planes_a, planes_b, vcfg):
    keep = []
    for i, j in matches:
        n, d = _moved_plane(estimate.motion, planes_a[i])
        pb = planes_b[j]
        if n @ pb.normal < 0:
            n, d = -n, -d
        if angle_between_lines(n, pb.normal) > vcfg.normal_angle_max:
            continue
        if abs(d - pb.offset) > vcfg.offset_diff_max:
            continue
        keep.append((i, j))
    return keep


def match_views(planes_a, planes_b, up_a, up_b, ccfg=ClassConfig(), vcfg=ValidationConfig(),
                random_state=None, refine_up=True):
    """Match the planes of two views and compute the motion between them.

    Classify, pair, gate by penalty, validate, resolve conflicts (falling
    back to single planes when no pair matches), then recompute the motion
    from the whole match set.

    Returns:
        MatchResult with the MatchSet and the MotionEstimate.

    Raises:
        NoMotion: no planes, no matches, or a match set that cannot
            constrain every degree of freedom.
    """
    if not planes_a or not planes_b:
        raise NoMotion("no planes")
    rng = check_random_state(random_state)
    up_a = np.asarray(up_a, dtype=np.float64)
    up_b = np.asarray(up_b, dtype=np.float64)
    classes_a = [classify_plane(p, up_a, ccfg)[0] for p in planes_a]
    classes_b = [classify_plane(p, up_b, ccfg)[0] for p in planes_b]
    features_a = [plane_features(p, vcfg, rng) for p in planes_a]
    features_b = [plane_features(p, vcfg, rng) for p in planes_b]
    shared = dict(classes_a=classes_a, classes_b=classes_b,
                  features_a=features_a, features_b=features_b)

    pairs_a = generate_pairs(planes_a, classes_a, up_a, ccfg)
    pairs_b = generate_pairs(planes_b, classes_b, up_b, ccfg)
    validations = [
        validate_candidate(c, planes_a, planes_b, up_a, up_b, vcfg, ccfg, **shared)
        for c in generate_candidates(pairs_a, pairs_b, vcfg)
    ]
    match_set = resolve_conflicts(validations, classes_a)

    n_classified = min(
        sum(c is not PlaneClass.UNCLASSIFIED for c in classes_a),
        sum(c is not PlaneClass.UNCLASSIFIED for c in classes_b),
    )
    if not match_set.matches or n_classified < 2:
        match_set, single = match_single_planes(planes_a, planes_b, up_a, up_b, vcfg, ccfg, **shared)
        validations += single
    if not match_set.matches:
        raise NoMotion("no matches")

    def solve(matches):
        return estimate_motion(matches, planes_a, planes_b, up_a, up_b,
                               classes=[classes_a[i] for i, _ in matches], config=ccfg,
                               refine=refine_up)

    try:
        estimate = solve(match_set.matches)
    except Underconstrained:
        match_set, extra = complete_matches(match_set, planes_a, planes_b, up_a, up_b, vcfg, ccfg,
                                            **shared)
        validations += extra
        try:
            estimate = solve(match_set.matches)
        except Underconstrained as exc:
            raise NoMotion("insufficient constraints", exc.missing) from exc
    kept = _final_check(estimate, match_set.matches, planes_a, planes_b, vcfg)
    if kept and len(kept) < len(match_set.matches):
        try:
            estimate = solve(kept)
        except Underconstrained:
            pass
        else:
            idx = [match_set.matches.index(m) for m in kept]
            match_set = MatchSet(tuple(kept), tuple(match_set.classes[k] for k in idx),
                                 tuple(match_set.distances[k] for k in idx))
    return MatchResult(match_set, estimate, tuple(validations))
