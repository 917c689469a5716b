import math

import numpy as np
import pytest

from planereg.classification import angle_between_lines
from planereg.geometry import RigidMotion, compose, fit_plane, rotation_about, transform_plane
from planereg.toy import UP, make_toy_scene
from planereg.tracking import TrackConfig, refine_motion, track_planes


def toy_views(rng, truth, n=400):
    planes_a = make_toy_scene().planes(n, rng)
    cloud_b = truth.apply(np.vstack([p.inliers for p in planes_a]))
    return planes_a, cloud_b


def perturbed(truth, deg, shift, axis=(0.3, 1.0, 0.2)):
    d = RigidMotion(rotation_about(axis, math.radians(deg)), np.array([1.0, -1.0, 1.0]) / math.sqrt(3) * shift)
    return compose(d, truth)


def plane_error(plane, truth_plane):
    s = 1.0 if plane.normal @ truth_plane.normal >= 0 else -1.0
    return angle_between_lines(plane.normal, truth_plane.normal), abs(s * plane.offset - truth_plane.offset)


TRUTH = RigidMotion(rotation_about(UP, 0.4), [0.3, 0.1, -0.2])


class TestTrackConfig:
    @pytest.mark.parametrize("kwargs", [{"support_dist": 0}, {"min_support_ratio": 0},
                                        {"min_support_ratio": 1.5}, {"refine_iterations": -1}])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            TrackConfig(**kwargs)


class TestTrackPlanes:
    def test_ground_truth_prior(self, rng):
        planes_a, cloud_b = toy_views(rng, TRUTH)
        tracked = track_planes(planes_a, cloud_b, TRUTH)
        assert [t.index for t in tracked] == [0, 1, 2, 3]
        for t in tracked:
            expected = transform_plane(TRUTH, planes_a[t.index])
            ang, off = plane_error(t.plane, expected)
            assert ang < 1e-9 and off < 1e-9

    def test_far_prior_tracks_nothing(self, rng):
        planes_a, cloud_b = toy_views(rng, TRUTH)
        prior = compose(RigidMotion(np.eye(3), [3.0, 3.0, 3.0]), TRUTH)
        assert track_planes(planes_a, cloud_b, prior) == []

    def test_perturbed_prior_improves(self, rng):
        planes_a, cloud_b = toy_views(rng, TRUTH)
        prior = perturbed(TRUTH, 2.0, 0.03)
        tracked = track_planes(planes_a, cloud_b, prior)
        assert len(tracked) == 4
        for t in tracked:
            target = transform_plane(TRUTH, planes_a[t.index])
            ang_r, off_r = plane_error(t.plane, target)
            ang_p, off_p = plane_error(t.transported, target)
            assert ang_r < ang_p and off_r < off_p

    def test_identity_full_support(self, rng):
        planes_a, cloud_b = toy_views(rng, RigidMotion.identity())
        for t in track_planes(planes_a, cloud_b, RigidMotion.identity()):
            assert t.support_ratio >= 0.99

    def test_support_within_band(self, rng):
        planes_a, cloud_b = toy_views(rng, TRUTH)
        cfg = TrackConfig()
        for t in track_planes(planes_a, cloud_b, perturbed(TRUTH, 2.0, 0.03), cfg):
            d = np.abs(cloud_b[t.support] @ t.transported.normal - t.transported.offset)
            assert np.all(d <= cfg.support_dist)

    def test_refit_never_worse_on_support(self, rng):
        planes_a = make_toy_scene().planes(400, rng)
        cloud_b = TRUTH.apply(np.vstack([p.inliers for p in planes_a]))
        cloud_b = cloud_b + rng.uniform(-0.01, 0.01, cloud_b.shape)
        for t in track_planes(planes_a, cloud_b, perturbed(TRUTH, 1.0, 0.02)):
            pts = cloud_b[t.support]
            refit = np.mean(np.abs(pts @ t.plane.normal - t.plane.offset))
            before = np.mean(np.abs(pts @ t.transported.normal - t.transported.offset))
            assert refit <= before + 1e-12

    def test_hull_gating(self, rng):
        planes_a, cloud_b = toy_views(rng, RigidMotion.identity())
        # a coplanar slab beyond the floor's extent must not count as support
        far = np.column_stack([rng.uniform(10, 14, 2000), np.zeros(2000), rng.uniform(-2, 2, 2000)])
        (t,) = track_planes([planes_a[2]], np.vstack([planes_a[2].inliers[:50], far]), RigidMotion.identity(),
                            TrackConfig(min_support_ratio=0.1))
        assert len(t.support) == 50

    def test_colors_carried(self, rng):
        planes_a, cloud_b = toy_views(rng, TRUTH)
        colors = np.tile(np.array([10, 200, 30], np.uint8), (len(cloud_b), 1))
        for t in track_planes(planes_a, cloud_b, TRUTH, colors_b=colors):
            assert t.plane.colors.shape == (len(t.support), 3)

    def test_empty_cloud(self, rng):
        planes_a, _ = toy_views(rng, TRUTH)
        assert track_planes(planes_a, np.zeros((0, 3)), TRUTH) == []

    def test_refine_iterations(self, rng):
        planes_a, cloud_b = toy_views(rng, TRUTH)
        tracked = track_planes(planes_a, cloud_b, perturbed(TRUTH, 2.0, 0.03), TrackConfig(refine_iterations=3))
        assert len(tracked) == 4
        for t in tracked:
            ang, off = plane_error(t.plane, transform_plane(TRUTH, planes_a[t.index]))
            assert ang < 1e-9 and off < 1e-9


class TestRefineMotion:
    def test_recovers_truth(self, rng):
        planes_a, cloud_b = toy_views(rng, TRUTH)
        prior = perturbed(TRUTH, 2.0, 0.03)
        tracked = track_planes(planes_a, cloud_b, prior)
        est = refine_motion(planes_a, tracked, UP, prior.rotation @ UP, prior)
        np.testing.assert_allclose(est.motion.as_matrix(), TRUTH.as_matrix(), atol=1e-9)

    def test_prior_fills_missing(self, rng):
        planes_a, cloud_b = toy_views(rng, TRUTH)
        prior = perturbed(TRUTH, 0.0, 0.03)
        tracked = [t for t in track_planes(planes_a, cloud_b, prior) if t.index == 2]
        est = refine_motion(planes_a, tracked, UP, TRUTH.rotation @ UP, prior)
        assert est.observed.vertical and not est.observed.rotation
        np.testing.assert_allclose(est.motion.rotation, prior.rotation, atol=1e-12)
        assert est.motion.translation[1] == pytest.approx(TRUTH.translation[1], abs=1e-9)
