"""Gaussian classification of planes and plane pairs against the Up direction.

A category wins when its Gaussian likelihood is the largest and reaches 0.5;
each sigma is chosen so the likelihood crosses 0.5 exactly at the
configured angle threshold.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidThreshold

HALF = 0.5
_TIE = 1e-12


class PlaneClass(enum.Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"
    UNCLASSIFIED = "unclassified"


class PairClass(enum.Enum):
    HORIZONTAL = "horizontal"
    VERTICAL_PARALLEL = "vertical_parallel"
    VERTICAL_NON_PARALLEL = "vertical_non_parallel"
    OTHER = "other"

    @property
    def is_parallel(self):
        return self in (PairClass.HORIZONTAL, PairClass.VERTICAL_PARALLEL)


def gaussian(alpha, mu, sigma):
    """Unnormalized Gaussian ``exp(-(alpha - mu)^2 / (2 sigma^2))``, peak value 1."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return math.exp(-((alpha - mu) ** 2) / (2.0 * sigma * sigma))


def sigma_from_threshold(alpha_thresh, mu):
    """Standard deviation putting ``gaussian(alpha_thresh, mu, sigma)`` at exactly 0.5."""
    if alpha_thresh == mu:
        raise InvalidThreshold("alpha_thresh must differ from mu")
    return math.sqrt(-((alpha_thresh - mu) ** 2) / (2.0 * math.log(HALF)))


@dataclass(frozen=True)
class ClassConfig:
    """Angle thresholds (radians) for the Up test and the relative-angle test."""

    alpha_thresh_up: float = math.radians(10.0)
    alpha_thresh_rel: float = math.radians(10.0)

    def __post_init__(self):
        for name in ("alpha_thresh_up", "alpha_thresh_rel"):
            v = getattr(self, name)
            if not 0.0 < v < math.pi / 4:
                raise InvalidThreshold(f"{name} must lie in (0, pi/4), got {v}")

    # Horizontal/parallel are centered at 0, vertical/non-parallel at pi/2; the
    # thresholds sit alpha_thresh away from each center.
    @property
    def sigma_up(self):
        return sigma_from_threshold(self.alpha_thresh_up, 0.0)

    @property
    def sigma_rel(self):
        return sigma_from_threshold(self.alpha_thresh_rel, 0.0)


def angle_between_lines(n1, n2):
    """``arccos(|n1 . n2|)`` in [0, pi/2]: the sign-free angle between two directions."""
    c = abs(float(np.dot(n1, n2)))
    return math.acos(min(c, 1.0))


def _argmax_with_floor(p_low, p_high, low, high, reject):
    if abs(p_low - p_high) <= _TIE:
        return reject
    if p_low > p_high:
        return low if p_low >= HALF else reject
    return high if p_high >= HALF else reject


def classify_angle_up(alpha_up, config=ClassConfig()):
    sigma = config.sigma_up
    g_h = gaussian(alpha_up, 0.0, sigma)
    g_v = gaussian(alpha_up, math.pi / 2, sigma)
    return _argmax_with_floor(g_h, g_v, PlaneClass.HORIZONTAL, PlaneClass.VERTICAL,
                              PlaneClass.UNCLASSIFIED)


def classify_plane(plane, up, config=ClassConfig()):
    """Return ``(PlaneClass, alpha_up)`` with ``alpha_up = arccos(|N . up|)``."""
    alpha_up = angle_between_lines(plane.normal, up)
    return classify_angle_up(alpha_up, config), alpha_up


def classify_relative(alpha_rel, config=ClassConfig()):
    """Parallel vs non-parallel for two vertical planes, or OTHER when neither reaches 0.5."""
    sigma = config.sigma_rel
    g_p = gaussian(alpha_rel, 0.0, sigma)
    g_np = gaussian(alpha_rel, math.pi / 2, sigma)
    return _argmax_with_floor(g_p, g_np, PairClass.VERTICAL_PARALLEL,
                              PairClass.VERTICAL_NON_PARALLEL, PairClass.OTHER)


def pair_class(class_a, class_b, alpha_rel, config=ClassConfig()):
    if class_a is not class_b or class_a is PlaneClass.UNCLASSIFIED:
        return PairClass.OTHER
    if class_a is PlaneClass.HORIZONTAL:
        return PairClass.HORIZONTAL
    return classify_relative(alpha_rel, config)


def classify_pair(a, b, up, config=ClassConfig()):
    """Return ``(PairClass, alpha_rel)`` for two planes of the same view."""
    class_a, _ = classify_plane(a, up, config)
    class_b, _ = classify_plane(b, up, config)
    alpha_rel = angle_between_lines(a.normal, b.normal)
    return pair_class(class_a, class_b, alpha_rel, config), alpha_rel
