"""scikit-learn style estimator for plane-based registration of two views."""

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin, clone
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points, check_random_state, check_unit_vector
from .classification import ClassConfig
from .detection import PlaneDetector
from .exceptions import NoMotion, Underconstrained
from .matching import MatchSet, ValidationConfig, match_views
from .tracking import TrackConfig, refine_motion, track_planes


class PlaneRegistration(TransformerMixin, BaseEstimator):
    """Estimate the rigid motion between two overlapping views from their planes.

    Without a prior, planes are matched by pairs and validated; with a
    prior motion, view-a planes are tracked into view b and the motion is
    re-estimated from them.  ``transform`` maps view-a points into view b.

    Parameters
    ----------
    alpha_thresh_up, alpha_thresh_rel : float, default=10 degrees
        Classification thresholds in radians.
    angle_penalty_max, distance_penalty_max : float
        Pair penalty gates (radians for non-parallel pairs, meters for parallel).
    motion_rot_max, motion_trans_max : float
        Largest candidate motion accepted during validation.
    normal_angle_max, offset_diff_max, inlier_sample, inlier_dist_max,
    hull_overlap_min, hist_similarity_min, hist_bins
        Plane-wise validation settings, see :class:`ValidationConfig`.
    support_dist, min_support_ratio, track_iterations
        Tracking settings used when a prior is given, see :class:`TrackConfig`.
    refine_up : bool, default=True
        Refine each view's Up from its matched horizontal planes.
    detector : PlaneDetector or None
        Detector used by :meth:`fit`; cloned before use.
    random_state : int, Generator or None, default=0

    Attributes
    ----------
    motion_ : RigidMotion
    estimate_ : MotionEstimate
    matches_ : MatchSet
    planes_a_, planes_b_ : list of Plane
        Planes the motion was computed from (tracked planes for ``planes_b_``
        when a prior was used).
    """

    def __init__(self, alpha_thresh_up=math.radians(10.0), alpha_thresh_rel=math.radians(10.0),
                 angle_penalty_max=math.radians(10.0), distance_penalty_max=0.10,
                 motion_rot_max=math.pi / 2, motion_trans_max=5.0,
                 normal_angle_max=math.radians(10.0), offset_diff_max=0.10, inlier_sample=100,
                 inlier_dist_max=0.05, hull_overlap_min=0.3, hist_similarity_min=0.5,
                 hist_bins=(8, 8), support_dist=0.05, min_support_ratio=0.3,
                 track_iterations=0, refine_up=True, detector=None, random_state=0):
        self.alpha_thresh_up = alpha_thresh_up
        self.alpha_thresh_rel = alpha_thresh_rel
        self.angle_penalty_max = angle_penalty_max
        self.distance_penalty_max = distance_penalty_max
        self.motion_rot_max = motion_rot_max
        self.motion_trans_max = motion_trans_max
        self.normal_angle_max = normal_angle_max
        self.offset_diff_max = offset_diff_max
        self.inlier_sample = inlier_sample
        self.inlier_dist_max = inlier_dist_max
        self.hull_overlap_min = hull_overlap_min
        self.hist_similarity_min = hist_similarity_min
        self.hist_bins = hist_bins
        self.support_dist = support_dist
        self.min_support_ratio = min_support_ratio
        self.track_iterations = track_iterations
        self.refine_up = refine_up
        self.detector = detector
        self.random_state = random_state

    def class_config(self):
        return ClassConfig(self.alpha_thresh_up, self.alpha_thresh_rel)

    def validation_config(self):
        return ValidationConfig(
            angle_penalty_max=self.angle_penalty_max,
            distance_penalty_max=self.distance_penalty_max,
            motion_rot_max=self.motion_rot_max,
            motion_trans_max=self.motion_trans_max,
            normal_angle_max=self.normal_angle_max,
            offset_diff_max=self.offset_diff_max,
            inlier_sample=self.inlier_sample,
            inlier_dist_max=self.inlier_dist_max,
            hull_overlap_min=self.hull_overlap_min,
            hist_similarity_min=self.hist_similarity_min,
            hist_bins=tuple(self.hist_bins),
        )

    def track_config(self):
        return TrackConfig(self.support_dist, self.min_support_ratio, self.track_iterations)

    def fit(self, X, X_b, *, up_a=None, up_b=None, prior=None, colors_a=None, colors_b=None):
        """Detect planes in both clouds and register view ``X`` onto view ``X_b``.

        ``up_a``/``up_b`` default to the normal of the largest near-horizontal
        detected plane.
        """
        from .io import resolve_up

        X = check_points(X, name="X")
        X_b = check_points(X_b, name="X_b")
        detector = clone(self.detector) if self.detector is not None else PlaneDetector()
        planes_a = detector.fit(X, colors=colors_a).planes_
        planes_b = clone(detector).fit(X_b, colors=colors_b).planes_
        up_a = resolve_up("from-planes" if up_a is None else up_a, planes_a)
        up_b = resolve_up("from-planes" if up_b is None else up_b, planes_b)
        self.n_features_in_ = 3
        return self.fit_planes(planes_a, planes_b, up_a=up_a, up_b=up_b, prior=prior,
                               cloud_b=X_b, colors_b=colors_b)

    def fit_planes(self, planes_a, planes_b, *, up_a, up_b, prior=None, cloud_b=None,
                   colors_b=None, random_state=None):
        """Register from already-detected planes.

        With ``prior`` the view-a planes are tracked into ``cloud_b`` (the
        union of the view-b inliers when omitted).

        Raises:
            NoMotion: matching failed or the motion is underconstrained.
        """
        up_a = check_unit_vector(up_a, "up_a")
        up_b = check_unit_vector(up_b, "up_b")
        rng = check_random_state(self.random_state if random_state is None else random_state)
        ccfg = self.class_config()
        planes_a = list(planes_a)
        if prior is None:
            result = match_views(planes_a, list(planes_b), up_a, up_b, ccfg,
                                 self.validation_config(), random_state=rng,
                                 refine_up=self.refine_up)
            self.matches_ = result.matches
            self.estimate_ = result.estimate
            self.planes_b_ = list(planes_b)
        else:
            if cloud_b is None:
                cloud_b = np.concatenate([p.inliers for p in planes_b]) if planes_b else np.zeros((0, 3))
            tracked = track_planes(planes_a, cloud_b, prior, self.track_config(), colors_b)
            if not tracked:
                raise NoMotion("no matches")
            self.planes_b_ = [t.plane for t in tracked]
            try:
                self.estimate_ = refine_motion(planes_a, tracked, up_a, up_b, prior, ccfg,
                                               self.refine_up)
            except Underconstrained as exc:
                raise NoMotion("insufficient constraints", exc.missing) from exc
            self.matches_ = MatchSet(tuple((t.index, k) for k, t in enumerate(tracked)))
        self.planes_a_ = planes_a
        self.motion_ = self.estimate_.motion
        return self

    def transform(self, X):
        """Map view-a points into view-b coordinates."""
        check_is_fitted(self, "motion_")
        return self.motion_.apply(check_points(X, name="X"))
