"""Registration of two 3D views from their planes."""

from .classification import ClassConfig, PairClass, PlaneClass, classify_pair, classify_plane
from .detection import DetectConfig, PlaneDetector, detect_planes
from .exceptions import (
    DegenerateInput,
    EmptyCorrespondences,
    InvalidThreshold,
    NoHorizontalPlane,
    NoMotion,
    ParseError,
    PlaneRegError,
    SingularSystem,
    Underconstrained,
    UnsupportedFormat,
)
from .geometry import Plane, RigidMotion, WorldFrame, fit_plane, make_world_frame, transform_plane
from .matching import MatchResult, MatchSet, ValidationConfig, match_views
from .metrics import CorrespondenceSet, EvalReport, aggregate, correspondence_error
from .motion import MotionEstimate, estimate_motion
from .registration import PlaneRegistration
from .tracking import TrackConfig, track_planes

__version__ = "0.1.0"

__all__ = [
    "ClassConfig",
    "CorrespondenceSet",
    "DegenerateInput",
    "DetectConfig",
    "EmptyCorrespondences",
    "EvalReport",
    "InvalidThreshold",
    "MatchResult",
    "MatchSet",
    "MotionEstimate",
    "NoHorizontalPlane",
    "NoMotion",
    "PairClass",
    "ParseError",
    "Plane",
    "PlaneClass",
    "PlaneDetector",
    "PlaneRegError",
    "PlaneRegistration",
    "RigidMotion",
    "SingularSystem",
    "TrackConfig",
    "Underconstrained",
    "UnsupportedFormat",
    "ValidationConfig",
    "WorldFrame",
    "aggregate",
    "classify_pair",
    "classify_plane",
    "correspondence_error",
    "detect_planes",
    "estimate_motion",
    "fit_plane",
    "make_world_frame",
    "match_views",
    "track_planes",
    "transform_plane",
]
