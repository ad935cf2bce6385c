"""Retrieval evaluation: PR curves, AUC, F1-max, memory ratio, query timing.

Two tasks are covered. Global place recognition (GPR) matches every query
frame against a fixed map set; loop closure detection (LCD) streams one
session and matches each frame against the sampled keyframes older than an
exclusion window, restricted to the k nearest candidates.

Conventions: a query is a ground-truth positive iff some candidate map
keyframe lies within `tp_radius` of its pose; precision is reported as 1
when no positives are predicted.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import Keyframe, Session, ValidationError


@dataclass(frozen=True)
class EvalConfig:
    tp_radius: float = 5.0
    lcd_k: int = 25
    lcd_exclusion_frames: int = 100
    thresholds: int = 200

    def __post_init__(self):
        if self.tp_radius <= 0:
            raise ValidationError("tp_radius must be positive")
        if self.lcd_k < 1:
            raise ValidationError("lcd_k must be at least 1")
        if self.thresholds < 2:
            raise ValidationError("need at least 2 threshold sweep points")


@dataclass
class EvalReport:
    pr_points: list[tuple[float, float, float]]  # (threshold, precision, recall)
    auc: float
    f1_max: float
    memory_ratio: float
    query_wall_time: float
    counts: tuple[int, int, int, int]  # TP/FP/FN/TN at the F1-max threshold


def f1_max(pr_points) -> float:
    """Maximum harmonic mean of precision and recall over the sweep."""
    if not pr_points:
        raise ValidationError("empty PR point list")
    best = 0.0
    for _, precision, recall in pr_points:
        if precision + recall > 0:
            best = max(best, 2.0 * precision * recall / (precision + recall))
    return best


def auc(pr_points) -> float:
    """Trapezoidal area of precision over recall, clipped to [0, 1].

    Points are sorted by recall; duplicate recalls keep their maximum
    precision so repeated sweep points cannot distort the integral.
    """
    if len(pr_points) < 2:
        raise ValidationError("need at least two PR points for AUC")
    by_recall: dict[float, float] = {}
    for _, precision, recall in pr_points:
        by_recall[recall] = max(by_recall.get(recall, 0.0), precision)
    recalls = sorted(by_recall)
    if len(recalls) == 1:
        return float(np.clip(by_recall[recalls[0]], 0.0, 1.0))
    precisions = [by_recall[r] for r in recalls]
    trapezoid = getattr(np, "trapezoid", np.trapz)
    area = float(trapezoid(precisions, recalls))
    return float(np.clip(area, 0.0, 1.0))


def memory_ratio(selected_count: int, total_count: int) -> float:
    if total_count <= 0:
        raise ValidationError("total count must be positive")
    if not (0 < selected_count <= total_count):
        raise ValidationError("selected count must be in 1..total")
    return selected_count / total_count


def _sweep(top1_distance, retrieval_correct, gt_positive, n_thresholds):
    """PR curve over evenly spaced quantiles of observed top-1 distances.

    `top1_distance` may contain NaN for queries with no candidates; those
    are never predicted positive.
    """
    top1_distance = np.asarray(top1_distance, dtype=float)
    retrieval_correct = np.asarray(retrieval_correct, dtype=bool)
    gt_positive = np.asarray(gt_positive, dtype=bool)
    valid = ~np.isnan(top1_distance)
    observed = top1_distance[valid]
    if observed.size == 0:
        thresholds = np.zeros(n_thresholds)
    else:
        qs = np.linspace(0.0, 1.0, n_thresholds)
        thresholds = np.quantile(observed, qs)
    total_positive = int(np.count_nonzero(gt_positive))
    points = []
    for theta in thresholds:
        predicted = valid & (top1_distance <= theta)
        tp = int(np.count_nonzero(predicted & retrieval_correct))
        fp = int(np.count_nonzero(predicted & ~retrieval_correct))
        fn = total_positive - int(
            np.count_nonzero(predicted & retrieval_correct & gt_positive)
        )
        precision = tp / (tp + fp) if (tp + fp) > 0 else 1.0
        recall = tp / total_positive if total_positive > 0 else 0.0
        points.append((float(theta), precision, recall))
    return points


def _counts_at_best(points, top1_distance, retrieval_correct, gt_positive):
    top1_distance = np.asarray(top1_distance, dtype=float)
    retrieval_correct = np.asarray(retrieval_correct, dtype=bool)
    gt_positive = np.asarray(gt_positive, dtype=bool)
    valid = ~np.isnan(top1_distance)
    best_theta = points[0][0]
    best_f1 = -1.0
    for theta, precision, recall in points:
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        if f1 > best_f1:
            best_f1, best_theta = f1, theta
    predicted = valid & (top1_distance <= best_theta)
    tp = int(np.count_nonzero(predicted & retrieval_correct))
    fp = int(np.count_nonzero(predicted & ~retrieval_correct))
    total_positive = int(np.count_nonzero(gt_positive))
    fn = total_positive - int(
        np.count_nonzero(predicted & retrieval_correct & gt_positive)
    )
    tn = int(np.count_nonzero(~predicted & ~gt_positive))
    return tp, fp, fn, tn


def evaluate_gpr(
    map_keyframes: list[Keyframe],
    query_session: Session,
    config: EvalConfig = EvalConfig(),
    total_map_frames: int | None = None,
) -> EvalReport:
    """Top-1 retrieval of every query frame against the whole map set."""
    if not map_keyframes:
        raise ValidationError("empty map keyframe set")
    if query_session.descriptors is None or query_session.frame_count == 0:
        raise ValidationError("query session needs descriptors")
    map_desc = np.array([k.descriptor for k in map_keyframes])
    query_desc = np.asarray(query_session.descriptors, dtype=float)
    if map_desc.shape[1] != query_desc.shape[1]:
        raise ValidationError(
            f"descriptor dimension mismatch: map {map_desc.shape[1]} vs "
            f"query {query_desc.shape[1]}"
        )
    map_pos = np.array([k.pose.position for k in map_keyframes])
    query_pos = np.array([p.position for p in query_session.poses])

    t0 = time.perf_counter()
    desc_d = np.linalg.norm(
        query_desc[:, None, :] - map_desc[None, :, :], axis=2
    )
    top1 = np.argmin(desc_d, axis=1)
    top1_distance = desc_d[np.arange(len(top1)), top1]
    elapsed = time.perf_counter() - t0

    pose_d = np.linalg.norm(
        query_pos[:, None, :] - map_pos[None, :, :], axis=2
    )
    gt_positive = np.min(pose_d, axis=1) <= config.tp_radius
    retrieval_correct = (
        pose_d[np.arange(len(top1)), top1] <= config.tp_radius
    )

    points = _sweep(
        top1_distance, retrieval_correct, gt_positive, config.thresholds
    )
    counts = _counts_at_best(
        points, top1_distance, retrieval_correct, gt_positive
    )
    total = total_map_frames or len(map_keyframes)
    return EvalReport(
        pr_points=points,
        auc=auc(points),
        f1_max=f1_max(points),
        memory_ratio=memory_ratio(len(map_keyframes), total),
        query_wall_time=elapsed,
        counts=counts,
    )


def evaluate_lcd(
    session: Session,
    sampled_ids: list[int],
    config: EvalConfig = EvalConfig(),
) -> EvalReport:
    """Streamed in-session retrieval against older sampled keyframes."""
    if session.descriptors is None or session.frame_count == 0:
        raise ValidationError("session needs descriptors")
    sampled = sorted(set(sampled_ids))
    if not sampled:
        raise ValidationError("empty sampled id list")
    if sampled[0] < 0 or sampled[-1] >= session.frame_count:
        raise ValidationError("sampled ids outside the session range")
    desc = np.asarray(session.descriptors, dtype=float)
    pos = np.array([p.position for p in session.poses])
    sampled_arr = np.asarray(sampled)

    top1_distance = np.full(session.frame_count, np.nan)
    retrieval_correct = np.zeros(session.frame_count, dtype=bool)
    gt_positive = np.zeros(session.frame_count, dtype=bool)

    t0 = time.perf_counter()
    for q in range(session.frame_count):
        candidates = sampled_arr[sampled_arr <= q - config.lcd_exclusion_frames]
        if candidates.size == 0:
            continue
        pose_d = np.linalg.norm(pos[candidates] - pos[q], axis=1)
        gt_positive[q] = bool(np.min(pose_d) <= config.tp_radius)
        desc_d = np.linalg.norm(desc[candidates] - desc[q], axis=1)
        if candidates.size > config.lcd_k:
            keep = np.argsort(desc_d, kind="stable")[: config.lcd_k]
        else:
            keep = np.arange(candidates.size)
        best_local = keep[np.argmin(desc_d[keep])]
        top1_distance[q] = desc_d[best_local]
        retrieval_correct[q] = bool(pose_d[best_local] <= config.tp_radius)
    elapsed = time.perf_counter() - t0

    points = _sweep(
        top1_distance, retrieval_correct, gt_positive, config.thresholds
    )
    counts = _counts_at_best(
        points, top1_distance, retrieval_correct, gt_positive
    )
    return EvalReport(
        pr_points=points,
        auc=auc(points),
        f1_max=f1_max(points),
        memory_ratio=memory_ratio(len(sampled), session.frame_count),
        query_wall_time=elapsed,
        counts=counts,
    )


@dataclass(frozen=True)
class QueryBenchmark:
    seconds: float
    comparisons: int
    map_size: int
    query_size: int


def query_benchmark(
    map_keyframes: list[Keyframe], query_descriptors: np.ndarray
) -> QueryBenchmark:
    """Time the full all-queries x all-map descriptor distance sweep."""
    if not map_keyframes:
        raise ValidationError("empty map keyframe set")
    queries = np.asarray(query_descriptors, dtype=float)
    if queries.ndim != 2 or queries.shape[0] == 0:
        return QueryBenchmark(0.0, 0, len(map_keyframes), 0)
    map_desc = np.array([k.descriptor for k in map_keyframes])
    t0 = time.perf_counter()
    for q in queries:
        np.linalg.norm(map_desc - q, axis=1)
    elapsed = time.perf_counter() - t0
    return QueryBenchmark(
        seconds=elapsed,
        comparisons=len(map_keyframes) * queries.shape[0],
        map_size=len(map_keyframes),
        query_size=queries.shape[0],
    )
