"""Domain types shared across the package: poses, keyframes, windows, stores.

Distances between poses are plain Euclidean norms of the translation part.
Orientation quaternions are carried along for I/O fidelity only and never
enter any metric.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

# Minimum arc-length step between consecutive poses. Stationary robots
# produce repeated poses; clamping keeps downstream finite differences
# away from zero denominators.
MIN_ARC_STEP = 1e-6


class ValidationError(ValueError):
    """Raised when input data violates a documented invariant."""


@dataclass(frozen=True)
class Pose:
    """A position in meters plus a unit quaternion (x, y, z, w)."""

    position: np.ndarray
    quaternion: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0])
    )

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        if not np.all(np.isfinite(pos)):
            raise ValidationError("pose position must be finite")
        quat = np.asarray(self.quaternion, dtype=float).reshape(4)
        norm = float(np.linalg.norm(quat))
        if not np.isfinite(norm) or norm < 1e-9:
            raise ValidationError("quaternion norm too small to normalize")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "quaternion", quat / norm)


def as_descriptor(values) -> np.ndarray:
    """Validate and return a 1-D finite descriptor vector."""
    d = np.asarray(values, dtype=float).reshape(-1)
    if d.size < 1:
        raise ValidationError("descriptor must have at least one component")
    if not np.all(np.isfinite(d)):
        raise ValidationError("descriptor components must be finite")
    return d


@dataclass(frozen=True)
class Keyframe:
    """The atomic sampled unit: id + pose + descriptor (+ scan reference).

    Scans are held by reference (a path or file offset), never copied.
    """

    id: int
    pose: Pose
    descriptor: np.ndarray
    scan_ref: str | None = None

    def __post_init__(self):
        if self.id < 0:
            raise ValidationError("keyframe id must be non-negative")
        object.__setattr__(self, "descriptor", as_descriptor(self.descriptor))


@dataclass
class KeyframeWindow:
    """Ordered buffer of keyframes under optimization.

    The first entry is the anchor and is never removed by optimization
    within this window. The extension holds revisit neighbors merged in
    for one optimization cycle; |entries| + |extension| stays at or below
    capacity + 5.
    """

    capacity: int
    entries: list[Keyframe] = field(default_factory=list)
    extension: list[Keyframe] = field(default_factory=list)

    def is_full(self) -> bool:
        return len(self.entries) >= self.capacity


class KeyframeStore:
    """Append-only accumulated keyframe set with a spatial index over poses.

    Single-writer append; any number of readers may query between appends.
    The k-d tree is rebuilt lazily on the first query after an append, so
    index contents always equal the stored positions.
    """

    def __init__(self):
        self._keyframes: list[Keyframe] = []
        self._ids: set[int] = set()
        self._tree: cKDTree | None = None

    def __len__(self) -> int:
        return len(self._keyframes)

    def __iter__(self):
        return iter(self._keyframes)

    def __contains__(self, keyframe_id: int) -> bool:
        return keyframe_id in self._ids

    @property
    def keyframes(self) -> list[Keyframe]:
        return list(self._keyframes)

    def ids(self) -> list[int]:
        return [k.id for k in self._keyframes]

    def append(self, keyframe: Keyframe) -> None:
        if keyframe.id in self._ids:
            raise ValidationError(f"duplicate keyframe id {keyframe.id}")
        self._keyframes.append(keyframe)
        self._ids.add(keyframe.id)
        self._tree = None

    def radius_query(self, center: Pose, radius: float) -> list[int]:
        """Ids of stored keyframes within `radius` meters of `center`.

        The boundary is inclusive; results are sorted ascending by id.
        """
        if radius <= 0:
            raise ValidationError("radius must be positive")
        if not self._keyframes:
            return []
        if self._tree is None:
            pts = np.array([k.pose.position for k in self._keyframes])
            self._tree = cKDTree(pts)
        # cKDTree's bound is inclusive up to round-off; pad a hair so points
        # at exactly `radius` survive, then filter exactly.
        idx = self._tree.query_ball_point(
            center.position, radius * (1.0 + 1e-12) + 1e-12
        )
        out = []
        for i in idx:
            kf = self._keyframes[i]
            if pose_distance(center, kf.pose) <= radius:
                out.append(kf.id)
        return sorted(out)


@dataclass
class Session:
    """One mapping or query sequence: poses plus optional descriptors/scans."""

    poses: list[Pose]
    descriptors: np.ndarray | None = None
    scan_paths: list[str] | None = None

    def __post_init__(self):
        n = len(self.poses)
        if self.descriptors is not None:
            self.descriptors = np.asarray(self.descriptors, dtype=float)
            if self.descriptors.ndim != 2 or self.descriptors.shape[0] != n:
                raise ValidationError(
                    "descriptor matrix rows must equal the pose count"
                )
        if self.scan_paths is not None and len(self.scan_paths) != n:
            raise ValidationError("scan path count must equal the pose count")

    @property
    def frame_count(self) -> int:
        return len(self.poses)

    def keyframes(self) -> list[Keyframe]:
        if self.descriptors is None:
            raise ValidationError("session has no descriptors")
        paths = self.scan_paths or [None] * self.frame_count
        return [
            Keyframe(i, self.poses[i], self.descriptors[i], paths[i])
            for i in range(self.frame_count)
        ]


def pose_distance(a: Pose, b: Pose) -> float:
    """Euclidean distance between the translation parts, in meters."""
    return float(np.linalg.norm(a.position - b.position))


def cumulative_arclength(poses: list[Pose]) -> np.ndarray:
    """Cumulative pose-to-pose distance along the sequence.

    Steps are clamped from below at MIN_ARC_STEP so the result is strictly
    increasing even for repeated poses.
    """
    if len(poses) == 0:
        raise ValidationError("empty pose sequence")
    out = np.empty(len(poses))
    out[0] = 0.0
    for i in range(1, len(poses)):
        step = max(pose_distance(poses[i - 1], poses[i]), MIN_ARC_STEP)
        out[i] = out[i - 1] + step
    return out
