"""Keyframe samplers behind a common sklearn-style estimator interface.

Every sampler is fitted on a Session and exposes `selected_ids_` (ascending
frame ids) plus optional `per_frame_state_` diagnostics, so the optimizer
and all baselines are interchangeable in evaluation pipelines. The
functional wrappers (`sample_all`, `sample_constant`, ...) cover one-shot
use.

The spaciousness and entropy baselines are reconstructions of the cited
adaptive keyframing ideas at the level the comparison requires, not ports
of any specific odometry package; every knob is configurable.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import optimizer as opt
from .core import Session, ValidationError, pose_distance
from .dataset_io import read_pointcloud_bin
from .optimizer import WindowConfig


@dataclass
class SamplerOutput:
    selected_ids: list[int]
    per_frame_state: dict[int, float] | None = None


def _check_session(session: Session) -> None:
    if not isinstance(session, Session):
        raise ValidationError("expected a Session")


def _require_scans(session: Session, what: str) -> list[np.ndarray]:
    if session.scan_paths is None:
        raise ValidationError(f"{what} requires point clouds")
    return [read_pointcloud_bin(p) for p in session.scan_paths]


class BaseKeyframeSampler(BaseEstimator):
    """Shared fit/transform surface for all samplers."""

    def fit(self, session: Session, y=None):
        _check_session(session)
        out = self._sample(session)
        self.selected_ids_ = out.selected_ids
        self.per_frame_state_ = out.per_frame_state
        return self

    def transform(self, session: Session):
        """Rows of the session descriptor matrix for the selected frames."""
        if not hasattr(self, "selected_ids_"):
            raise ValidationError("sampler is not fitted")
        if session.descriptors is None:
            raise ValidationError("session has no descriptors to select from")
        return session.descriptors[np.asarray(self.selected_ids_, dtype=int)]

    def fit_transform(self, session: Session, y=None):
        return self.fit(session).transform(session)

    def _sample(self, session: Session) -> SamplerOutput:
        raise NotImplementedError


class AllFramesSampler(BaseKeyframeSampler):
    """Keeps every frame; the keep-everything baseline."""

    def _sample(self, session: Session) -> SamplerOutput:
        return SamplerOutput(list(range(session.frame_count)))


class ConstantIntervalSampler(BaseKeyframeSampler):
    """Keeps a frame when the travelled distance since the last kept frame
    reaches `interval` meters; frame 0 is always kept."""

    def __init__(self, interval: float = 1.0):
        self.interval = interval

    def _sample(self, session: Session) -> SamplerOutput:
        if self.interval < 0:
            raise ValidationError("interval must be non-negative")
        if session.frame_count == 0:
            return SamplerOutput([])
        selected = [0]
        travelled = 0.0
        for i in range(1, session.frame_count):
            travelled += pose_distance(session.poses[i - 1], session.poses[i])
            if travelled >= self.interval:
                selected.append(i)
                travelled = 0.0
        return SamplerOutput(selected)


def spaciousness_signal(points: np.ndarray) -> float:
    """Instantaneous spaciousness: median point range (0 for empty clouds)."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return 0.0
    ranges = np.linalg.norm(pts[:, :3], axis=1)
    return float(np.median(ranges))


class SpaciousnessSampler(BaseKeyframeSampler):
    """Adapts the constant-interval rule to a smoothed spaciousness signal.

    The smoothed median range selects one of four interval bands split at
    three ascending thresholds; the live interval then drives the
    distance-based keep rule.
    """

    def __init__(
        self,
        thresholds=(5.0, 10.0, 20.0),
        intervals=(0.5, 1.0, 5.0, 10.0),
        smoothing: float = 0.95,
    ):
        self.thresholds = thresholds
        self.intervals = intervals
        self.smoothing = smoothing

    def _interval_for(self, spaciousness: float) -> float:
        for threshold, interval in zip(self.thresholds, self.intervals):
            if spaciousness < threshold:
                return interval
        return self.intervals[-1]

    def _sample(self, session: Session) -> SamplerOutput:
        if list(self.thresholds) != sorted(self.thresholds):
            raise ValidationError("spaciousness thresholds must be ascending")
        if len(self.intervals) != len(self.thresholds) + 1:
            raise ValidationError(
                "need one interval per threshold band "
                f"({len(self.thresholds) + 1}), got {len(self.intervals)}"
            )
        if any(v <= 0 for v in self.intervals):
            raise ValidationError("intervals must be positive")
        if not (0 < self.smoothing < 1):
            raise ValidationError("smoothing must be in (0, 1)")
        clouds = _require_scans(session, "spaciousness sampling")
        if session.frame_count == 0:
            return SamplerOutput([])
        selected = [0]
        state: dict[int, float] = {}
        smoothed = spaciousness_signal(clouds[0])
        state[0] = smoothed
        travelled = 0.0
        for i in range(1, session.frame_count):
            smoothed = (
                self.smoothing * smoothed
                + (1.0 - self.smoothing) * spaciousness_signal(clouds[i])
            )
            state[i] = smoothed
            travelled += pose_distance(session.poses[i - 1], session.poses[i])
            if travelled >= self._interval_for(smoothed):
                selected.append(i)
                travelled = 0.0
        return SamplerOutput(selected, state)


def scan_entropy(
    points: np.ndarray, bins: int = 64, max_range: float = 80.0
) -> float:
    """Shannon entropy (nats) of the point-range histogram over [0, max_range]."""
    if bins < 1:
        raise ValidationError("bins must be at least 1")
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return 0.0
    ranges = np.linalg.norm(pts[:, :3], axis=1)
    hist, _ = np.histogram(ranges, bins=bins, range=(0.0, max_range))
    total = hist.sum()
    if total == 0:
        return 0.0
    p = hist[hist > 0] / total
    return float(-np.sum(p * np.log(p)))


class EntropySampler(BaseKeyframeSampler):
    """Keeps a frame when the scan-range entropy moved by at least
    `threshold` nats since the last kept frame."""

    def __init__(
        self, threshold: float = 0.05, bins: int = 64, max_range: float = 80.0
    ):
        self.threshold = threshold
        self.bins = bins
        self.max_range = max_range

    def _sample(self, session: Session) -> SamplerOutput:
        clouds = _require_scans(session, "entropy sampling")
        if session.frame_count == 0:
            return SamplerOutput([])
        state: dict[int, float] = {}
        last_kept = scan_entropy(clouds[0], self.bins, self.max_range)
        state[0] = last_kept
        selected = [0]
        for i in range(1, session.frame_count):
            h = scan_entropy(clouds[i], self.bins, self.max_range)
            state[i] = h
            if abs(h - last_kept) >= self.threshold:
                selected.append(i)
                last_kept = h
        return SamplerOutput(selected, state)


class WindowOptimizedSampler(BaseKeyframeSampler):
    """Streams the session through the sliding-window optimizer."""

    def __init__(self, config: WindowConfig | None = None):
        self.config = config

    def _sample(self, session: Session) -> SamplerOutput:
        if session.descriptors is None:
            raise ValidationError("optimized sampling requires descriptors")
        config = self.config or WindowConfig()
        state = opt.run(session.keyframes(), config)
        objective_values = {
            i: sel.objective_value
            for i, sel in enumerate(state.selections)
        }
        self.optimizer_state_ = state
        return SamplerOutput(sorted(state.store.ids()), objective_values)


_METHODS = {
    "all": AllFramesSampler,
    "constant": ConstantIntervalSampler,
    "spaciousness": SpaciousnessSampler,
    "entropy": EntropySampler,
    "optimized": WindowOptimizedSampler,
}


def make_sampler(method: str, **kwargs) -> BaseKeyframeSampler:
    if method not in _METHODS:
        raise ValidationError(
            f"unknown sampling method {method!r}; "
            f"choose from {sorted(_METHODS)}"
        )
    return _METHODS[method](**kwargs)


def sample_all(session: Session) -> SamplerOutput:
    sampler = AllFramesSampler().fit(session)
    return SamplerOutput(sampler.selected_ids_, sampler.per_frame_state_)


def sample_constant(session: Session, interval: float) -> SamplerOutput:
    sampler = ConstantIntervalSampler(interval).fit(session)
    return SamplerOutput(sampler.selected_ids_, sampler.per_frame_state_)


def sample_spaciousness(session: Session, **kwargs) -> SamplerOutput:
    sampler = SpaciousnessSampler(**kwargs).fit(session)
    return SamplerOutput(sampler.selected_ids_, sampler.per_frame_state_)


def sample_entropy(session: Session, **kwargs) -> SamplerOutput:
    sampler = EntropySampler(**kwargs).fit(session)
    return SamplerOutput(sampler.selected_ids_, sampler.per_frame_state_)


def sample_optimized(
    session: Session, config: WindowConfig | None = None
) -> SamplerOutput:
    sampler = WindowOptimizedSampler(config).fit(session)
    return SamplerOutput(sampler.selected_ids_, sampler.per_frame_state_)
