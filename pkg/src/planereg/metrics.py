"""Registration scoring against ground-truth point correspondences."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import check_points
from .exceptions import EmptyCorrespondences

VALID_THRESHOLD = 0.20


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    """Corresponding points of view a and view b, one row each, meters."""

    points_a: np.ndarray
    points_b: np.ndarray

    def __post_init__(self):
        a = check_points(self.points_a, min_points=0, name="points_a")
        b = check_points(self.points_b, min_points=0, name="points_b")
        if a.shape != b.shape:
            raise ValueError("points_a and points_b must have the same shape")
        object.__setattr__(self, "points_a", a)
        object.__setattr__(self, "points_b", b)

    @classmethod
    def from_rows(cls, rows):
        """Build from ``[ax, ay, az, bx, by, bz]`` rows."""
        rows = np.asarray(rows, dtype=np.float64).reshape(-1, 6)
        return cls(rows[:, :3], rows[:, 3:])

    def to_rows(self):
        return np.hstack([self.points_a, self.points_b])

    def __len__(self):
        return len(self.points_a)


def correspondence_error(motion, corr):
    """Mean distance between moved view-a points and their view-b partners.

    Raises:
        EmptyCorrespondences: ``corr`` has no pairs.
    """
    if len(corr) == 0:
        raise EmptyCorrespondences("correspondence set is empty")
    moved = motion.apply(corr.points_a)
    return float(np.mean(np.linalg.norm(moved - corr.points_b, axis=1)))


@dataclass(frozen=True)
class PairResult:
    """Outcome for one registered view pair; ``corr_error`` is None when unregistered."""

    registered: bool
    corr_error: Optional[float] = None
    elapsed_ms: float = 0.0

    def is_valid(self, threshold=VALID_THRESHOLD):
        return self.registered and self.corr_error is not None and self.corr_error < threshold


@dataclass(frozen=True)
class EvalReport:
    """Aggregate scores; percentages in [0, 100], errors in meters, time in ms.

    ``degenerate`` is set when no pair registered, in which case precision,
    RMSE and MAE are reported as 0.
    """

    success: float
    recall: float
    precision: float
    rmse: float
    mae: float
    mean_time_ms: float
    total: int
    registered: int
    valid: int
    degenerate: bool = False

    def as_dict(self):
        return {
            "success": self.success,
            "recall": self.recall,
            "precision": self.precision,
            "rmse": self.rmse,
            "mae": self.mae,
            "mean_time_ms": self.mean_time_ms,
            "total": self.total,
            "registered": self.registered,
            "valid": self.valid,
            "degenerate": self.degenerate,
        }


def _as_result(r):
    if isinstance(r, PairResult):
        return r
    registered, error, elapsed = r
    return PairResult(bool(registered), None if error is None else float(error), float(elapsed))


def aggregate(results, threshold=VALID_THRESHOLD):
    """Success, recall, precision, RMSE, MAE (median error) and mean time.

    Args:
        results: PairResult objects or ``(registered, corr_error, elapsed_ms)``
            tuples.
        threshold: correspondence error below which a registered pair is valid.
    """
    results = [_as_result(r) for r in results]
    total = len(results)
    errors = np.array([r.corr_error for r in results if r.registered and r.corr_error is not None])
    registered = sum(r.registered for r in results)
    valid = sum(r.is_valid(threshold) for r in results)
    pct = lambda num, den: 100.0 * num / den if den else 0.0  # noqa: E731
    return EvalReport(
        success=pct(registered, total),
        recall=pct(valid, total),
        precision=pct(valid, registered),
        rmse=float(np.sqrt(np.mean(errors ** 2))) if errors.size else 0.0,
        mae=float(np.median(errors)) if errors.size else 0.0,
        mean_time_ms=float(np.mean([r.elapsed_ms for r in results])) if total else math.nan,
        total=total,
        registered=registered,
        valid=valid,
        degenerate=registered == 0,
    )
