"""Synthetic four-plane room, random motions and the noise sweep benchmark."""

import math
from dataclasses import dataclass, replace

import numpy as np

from ._validation import check_random_state
from .exceptions import NoMotion, Underconstrained
from .geometry import (
    RigidMotion,
    canonical_orientation,
    fit_plane,
    rotation_about,
    rotation_angle,
)

UP = np.array([0.0, 1.0, 0.0])
MAX_DISPLACEMENT = 2.0
VALID_ROTATION = math.radians(20.0)
VALID_TRANSLATION = 0.20
CSV_COLUMNS = (
    "noiseperc",
    "roterrorrad",
    "roterrorradstd",
    "transerrormet",
    "transerrormetstd",
    "success",
    "valid",
)


@dataclass(frozen=True, eq=False)
class Rectangle:
    """Bounded planar patch ``center + s * half_u + t * half_v`` for s, t in [-1, 1]."""

    center: np.ndarray
    half_u: np.ndarray
    half_v: np.ndarray

    @property
    def normal(self):
        n = np.cross(self.half_u, self.half_v)
        return n / np.linalg.norm(n)

    @property
    def area(self):
        return 4.0 * float(np.linalg.norm(np.cross(self.half_u, self.half_v)))

    def params(self):
        """Canonically oriented ``(normal, offset)``."""
        n = self.normal
        return canonical_orientation(n, float(n @ self.center))

    def moved(self, motion):
        R = motion.rotation
        return Rectangle(motion.apply(self.center), R @ self.half_u, R @ self.half_v)

    def sample(self, n, rng):
        st = rng.uniform(-1.0, 1.0, size=(n, 2))
        return self.center + st[:, :1] * self.half_u + st[:, 1:] * self.half_v


@dataclass(frozen=True, eq=False)
class ToyScene:
    """Left wall, far wall, floor and ceiling of a box room, in that order."""

    rectangles: tuple
    width: float = 4.0
    depth: float = 4.0
    height: float = 2.5
    names: tuple = ("left_wall", "far_wall", "floor", "ceiling")

    def moved(self, motion):
        return replace(self, rectangles=tuple(r.moved(motion) for r in self.rectangles))

    def planes(self, samples_per_plane=400, rng=None):
        """Noise-free planes sampled from each rectangle."""
        rng = check_random_state(rng)
        return [fit_plane(r.sample(samples_per_plane, rng)) for r in self.rectangles]


def make_toy_scene(extent=1.0):
    """Room with walls at x = -2 and z = -2, floor y = 0 and ceiling y = 2.5.

    Walls are 4 m x 2.5 m and floor and ceiling 4 m x 4 m rectangles;
    ``extent`` scales the rectangle sizes about their centers while keeping
    the plane positions.
    """
    if not extent > 0:
        raise ValueError("extent must be positive")
    h = 2.5
    w = 2.0 * extent
    hv = 0.5 * h * extent

    def rect(center, u, v):
        return Rectangle(np.array(center, float), np.array(u, float), np.array(v, float))

    rects = (
        rect([-2.0, h / 2, 0.0], [0.0, 0.0, w], [0.0, hv, 0.0]),
        rect([0.0, h / 2, -2.0], [w, 0.0, 0.0], [0.0, hv, 0.0]),
        rect([0.0, 0.0, 0.0], [w, 0.0, 0.0], [0.0, 0.0, w]),
        rect([0.0, h, 0.0], [w, 0.0, 0.0], [0.0, 0.0, w]),
    )
    return ToyScene(rects, 4.0, 4.0, h)


_MANHATTAN_PLANES = ("floor", "ceiling", "wall_x_min", "wall_x_max", "wall_z_min", "wall_z_max")


def make_manhattan_scene(rng, n_planes=None):
    """Random box room seen from inside, with 3 to 6 bounded plane patches.

    The room is non-square (width and depth differ by at least 0.5 m) so
    that wall pairs are distinguishable. At least one horizontal patch and
    two perpendicular walls are always present. Coordinates are relative to
    a sensor near the room center at 1.2 to 1.6 m height.
    """
    rng = check_random_state(rng)
    if n_planes is None:
        n_planes = int(rng.integers(3, 7))
    if not 3 <= n_planes <= 6:
        raise ValueError("n_planes must lie in [3, 6]")
    width = rng.uniform(3.0, 6.0)
    depth = width + rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0)
    depth = depth if 2.5 <= depth <= 7.0 else width - np.sign(depth - width) * rng.uniform(0.5, 2.0)
    height = rng.uniform(2.4, 3.0)
    cam = np.array([rng.uniform(-0.3, 0.3), rng.uniform(1.2, 1.6), rng.uniform(-0.3, 0.3)])

    chosen = [rng.choice([0, 1]), 2 + rng.integers(0, 2), 4 + rng.integers(0, 2)]
    rest = [k for k in range(6) if k not in chosen]
    chosen += list(rng.permutation(rest)[: n_planes - 3])
    chosen = sorted(int(k) for k in chosen)

    def frac(lo=0.5, hi=0.9):
        return rng.uniform(lo, hi)

    rects = []
    for k in chosen:
        name = _MANHATTAN_PLANES[k]
        if k < 2:
            y = 0.0 if k == 0 else height
            hu, hv = 0.5 * width * frac(), 0.5 * depth * frac()
            c = np.array([rng.uniform(-1, 1) * (0.5 * width - hu), y, rng.uniform(-1, 1) * (0.5 * depth - hv)])
            u, v = np.array([hu, 0.0, 0.0]), np.array([0.0, 0.0, hv])
        elif k < 4:
            x = -0.5 * width if k == 2 else 0.5 * width
            hu, hv = 0.5 * depth * frac(), 0.5 * height * frac()
            c = np.array([x, rng.uniform(-1, 1) * (0.5 * height - hv) + 0.5 * height,
                          rng.uniform(-1, 1) * (0.5 * depth - hu)])
            u, v = np.array([0.0, 0.0, hu]), np.array([0.0, hv, 0.0])
        else:
            z = -0.5 * depth if k == 4 else 0.5 * depth
            hu, hv = 0.5 * width * frac(), 0.5 * height * frac()
            c = np.array([rng.uniform(-1, 1) * (0.5 * width - hu),
                          rng.uniform(-1, 1) * (0.5 * height - hv) + 0.5 * height, z])
            u, v = np.array([hu, 0.0, 0.0]), np.array([0.0, hv, 0.0])
        rects.append((name, Rectangle(c - cam, u, v)))
    return ToyScene(tuple(r for _, r in rects), width, depth, height, tuple(n for n, _ in rects))


def random_gated_motion(rng, max_yaw=math.pi / 3, max_tilt=math.radians(3.0), max_translation=1.0, up=UP):
    """Yaw about ``up``, a small tilt about a random horizontal axis and a
    translation of bounded norm; stays inside the default validation gates."""
    rng = check_random_state(rng)
    up = np.asarray(up, dtype=np.float64)
    yaw = rotation_about(up, rng.uniform(-max_yaw, max_yaw))
    axis = np.array([rng.standard_normal(), 0.0, rng.standard_normal()])
    tilt = rotation_about(axis, rng.uniform(0.0, max_tilt))
    direction = rng.standard_normal(3)
    t = direction / np.linalg.norm(direction) * max_translation * np.cbrt(rng.uniform())
    return RigidMotion(tilt @ yaw, t)


def sample_view(scene, noise, rng, motion=None):
    """Noisy refit planes of every patch, optionally after moving the scene."""
    rects = scene.rectangles if motion is None else scene.moved(motion).rectangles
    return [perturb_plane(r, noise, rng) for r in rects]


def random_motion(rng, up=UP):
    """Uniform yaw in [-pi, pi] about ``up`` and uniform per-axis translation in [-1, 1] m."""
    rng = check_random_state(rng)
    angle = rng.uniform(-np.pi, np.pi)
    t = rng.uniform(-1.0, 1.0, size=3)
    return RigidMotion(rotation_about(up, angle), t)


@dataclass(frozen=True)
class NoiseConfig:
    """Uniform ball noise of radius ``level / 100 * max_displacement`` meters."""

    level: float = 0.0
    max_displacement: float = MAX_DISPLACEMENT
    samples_per_plane: int = 400
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.level <= 100.0:
            raise ValueError("noise level must be a percentage in [0, 100]")
        if self.samples_per_plane < 3:
            raise ValueError("samples_per_plane must be >= 3")

    @property
    def radius(self):
        return self.level / 100.0 * self.max_displacement


def uniform_ball(n, radius, rng):
    """``n`` points uniformly distributed in a ball of the given radius."""
    d = rng.standard_normal((n, 3))
    d /= np.sqrt(np.einsum("ij,ij->i", d, d))[:, None]
    r = radius * np.cbrt(rng.uniform(0.0, 1.0, size=n))
    return d * r[:, None]


def perturb_plane(rect, noise, rng):
    """Sample a rectangle, displace every sample inside a ball, refit the plane."""
    rng = check_random_state(rng)
    pts = rect.sample(noise.samples_per_plane, rng)
    if noise.radius > 0.0:
        pts = pts + uniform_ball(len(pts), noise.radius, rng)
    return fit_plane(pts)


@dataclass(frozen=True)
class TrialResult:
    success: bool
    rot_error: float = math.nan
    trans_error: float = math.nan

    @property
    def valid(self):
        return self.success and self.rot_error < VALID_ROTATION and self.trans_error < VALID_TRANSLATION


def motion_errors(estimated, truth):
    """Rotation angle of ``R_est R_gt^T`` and translation distance."""
    rot = rotation_angle(estimated.rotation @ truth.rotation.T)
    return rot, float(np.linalg.norm(estimated.translation - truth.translation))


@dataclass(frozen=True)
class BenchmarkRow:
    noise_level: float
    rot_error_mean: float
    rot_error_std: float
    trans_error_mean: float
    trans_error_std: float
    success: float
    validity: float
    trials: int
    rot_error_max: float = math.nan
    trans_error_max: float = math.nan

    def as_csv_row(self):
        return {
            "noiseperc": self.noise_level,
            "roterrorrad": self.rot_error_mean,
            "roterrorradstd": self.rot_error_std,
            "transerrormet": self.trans_error_mean,
            "transerrormetstd": self.trans_error_std,
            "success": self.success,
            "valid": self.validity,
        }


def _level_key(level):
    return int(round(float(level) * 1000))


def trial_rng(seed, level, index):
    """Independent stream per (seed, level, trial) so trials can run in any order."""
    return np.random.default_rng([int(seed), _level_key(level), int(index)])


def run_trial(level, rng, scene=None, registration=None):
    """One noisy registration of the toy room under a random motion."""
    scene = make_toy_scene() if scene is None else scene
    registration = toy_registration() if registration is None else registration
    noise = NoiseConfig(level=level)
    truth = random_motion(rng)
    planes_a = [perturb_plane(r, noise, rng) for r in scene.rectangles]
    planes_b = [perturb_plane(r.moved(truth), noise, rng) for r in scene.rectangles]
    up_b = truth.rotation @ UP
    try:
        registration.fit_planes(planes_a, planes_b, up_a=UP, up_b=up_b,
                                random_state=rng.integers(2**63))
    except (NoMotion, Underconstrained):
        return TrialResult(False)
    rot, trans = motion_errors(registration.motion_, truth)
    return TrialResult(True, rot, trans)


def toy_registration():
    """Registration settings for the toy sweep: yaw can reach pi, so the rotation gate is pi."""
    from .registration import PlaneRegistration

    return PlaneRegistration(motion_rot_max=np.pi)


def aggregate_trials(level, results):
    ok = [r for r in results if r.success]
    rot = np.array([r.rot_error for r in ok])
    trans = np.array([r.trans_error for r in ok])
    n = len(results)

    def stat(f, a):
        return float(f(a)) if len(a) else math.nan

    return BenchmarkRow(
        noise_level=level,
        rot_error_mean=stat(np.mean, rot),
        rot_error_std=stat(np.std, rot),
        trans_error_mean=stat(np.mean, trans),
        trans_error_std=stat(np.std, trans),
        success=100.0 * len(ok) / n if n else math.nan,
        validity=100.0 * sum(r.valid for r in results) / n if n else math.nan,
        trials=n,
        rot_error_max=stat(np.max, rot),
        trans_error_max=stat(np.max, trans),
    )


def _run_level(level, trials, seed):
    scene = make_toy_scene()
    reg = toy_registration()
    results = [run_trial(level, trial_rng(seed, level, i), scene, reg) for i in range(trials)]
    return aggregate_trials(level, results)


def run_benchmark(levels=(0, 5, 10, 20, 30, 50, 80, 100), trials_per_level=10000, seed=0, n_jobs=1):
    """Noise sweep over the toy room; one BenchmarkRow per level, deterministic per seed."""
    levels = list(levels)
    if n_jobs == 1 or len(levels) == 1:
        return [_run_level(lv, trials_per_level, seed) for lv in levels]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(_run_level)(lv, trials_per_level, seed) for lv in levels)
