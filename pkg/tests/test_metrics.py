import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from planereg.exceptions import EmptyCorrespondences
from planereg.geometry import RigidMotion, compose, invert, rotation_about
from planereg.metrics import CorrespondenceSet, PairResult, aggregate, correspondence_error
from planereg.toy import UP

from conftest import random_rotation


def ring_points(n=64, radius=2.0):
    a = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return np.column_stack([radius * np.cos(a), np.zeros(n), radius * np.sin(a)])


class TestCorrespondenceError:
    def test_ground_truth_zero(self, rng):
        truth = RigidMotion(random_rotation(rng), rng.uniform(-1, 1, 3))
        pa = rng.uniform(-3, 3, (50, 3))
        assert correspondence_error(truth, CorrespondenceSet(pa, truth.apply(pa))) == pytest.approx(0, abs=1e-12)

    def test_constant_shift(self, rng):
        pa = rng.uniform(-3, 3, (50, 3))
        err = correspondence_error(RigidMotion.identity(), CorrespondenceSet(pa, pa + [0.3, 0, 0]))
        assert err == pytest.approx(0.3, abs=1e-12)

    def test_yaw_error_per_point(self):
        pa = ring_points()
        est = RigidMotion(rotation_about(UP, math.radians(1.0)), np.zeros(3))
        err = correspondence_error(est, CorrespondenceSet(pa, pa))
        per_point = np.mean([np.linalg.norm(est.rotation @ p - p) for p in pa])
        assert err == pytest.approx(per_point, abs=1e-15)
        assert err == pytest.approx(2 * math.sin(math.radians(0.5)) * 2.0, abs=1e-12)
        assert err == pytest.approx(0.035, abs=1e-3)

    def test_empty(self):
        with pytest.raises(EmptyCorrespondences):
            correspondence_error(RigidMotion.identity(), CorrespondenceSet(np.zeros((0, 3)), np.zeros((0, 3))))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            CorrespondenceSet(np.zeros((2, 3)), np.zeros((3, 3)))

    def test_non_finite(self):
        with pytest.raises(ValueError):
            CorrespondenceSet(np.array([[np.inf, 0, 0]]), np.zeros((1, 3)))

    def test_rows_round_trip(self, rng):
        rows = rng.uniform(-1, 1, (7, 6))
        c = CorrespondenceSet.from_rows(rows)
        assert len(c) == 7
        np.testing.assert_array_equal(c.to_rows(), rows)

    def test_conjugation_invariance(self, rng):
        for _ in range(50):
            pa = rng.uniform(-3, 3, (20, 3))
            pb = rng.uniform(-3, 3, (20, 3))
            est = RigidMotion(random_rotation(rng), rng.uniform(-1, 1, 3))
            g = RigidMotion(random_rotation(rng), rng.uniform(-5, 5, 3))
            moved = CorrespondenceSet(g.apply(pa), g.apply(pb))
            conj = compose(g, compose(est, invert(g)))
            assert correspondence_error(conj, moved) == pytest.approx(
                correspondence_error(est, CorrespondenceSet(pa, pb)), abs=1e-9)


class TestAggregate:
    def test_all_registered(self):
        r = aggregate([(True, 0.1, 5.0)] * 4)
        assert (r.success, r.recall, r.precision) == (100.0, 100.0, 100.0)
        assert r.rmse == pytest.approx(0.1, abs=1e-15) and r.mae == pytest.approx(0.1, abs=1e-15)
        assert r.mean_time_ms == 5.0 and not r.degenerate

    def test_hand_computed(self):
        r = aggregate([(True, 0.1, 0), (True, 0.3, 0), (False, None, 0), (False, None, 0)])
        assert r.success == 50.0
        assert r.recall == 25.0
        assert r.precision == 50.0
        assert r.mae == pytest.approx(0.2, abs=1e-15)
        assert r.rmse == pytest.approx(math.sqrt(0.05), abs=1e-15)

    def test_zero_registered(self):
        r = aggregate([(False, None, 1.0)] * 3)
        assert (r.success, r.recall, r.precision, r.rmse, r.mae) == (0, 0, 0, 0, 0)
        assert r.degenerate

    def test_threshold_strict(self):
        r = aggregate([PairResult(True, 0.2), PairResult(True, 0.1999)])
        assert r.valid == 1
        assert aggregate([PairResult(True, 0.2)], threshold=0.25).valid == 1

    def test_empty(self):
        r = aggregate([])
        assert r.total == 0 and r.degenerate and math.isnan(r.mean_time_ms)

    def test_as_dict_keys(self):
        d = aggregate([(True, 0.1, 1.0)]).as_dict()
        assert set(d) == {"success", "recall", "precision", "rmse", "mae", "mean_time_ms", "total",
                          "registered", "valid", "degenerate"}

    @given(st.lists(st.tuples(st.booleans(), st.floats(0, 1), st.floats(0, 100)), min_size=1, max_size=40))
    def test_invariants(self, rows):
        rows = [(reg, err if reg else None, t) for reg, err, t in rows]
        r = aggregate(rows)
        assert 0 <= r.recall <= r.success <= 100
        assert r.recall == pytest.approx(r.precision * r.success / 100, abs=1e-9)
        errors = sorted(e for reg, e, _ in rows if reg)
        if errors:
            assert r.rmse >= np.mean(errors) - 1e-12 >= -1e-12
            assert r.mae == pytest.approx(np.percentile(errors, 50), abs=1e-12)
