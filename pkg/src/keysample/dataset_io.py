"""Dataset ingestion, synthetic session generation, and result emission.

Supported formats:
  - KITTI pose text: 12 space-separated decimals per line (row-major 3x4).
  - TUM pose text: "t tx ty tz qx qy qz qw" lines, '#' comments skipped.
  - Point clouds: raw 16-byte little-endian float32 (x, y, z, intensity)
    records.
  - Descriptor matrices: KDSC binary or CSV (see descriptors module).
  - Results: precision/recall CSV, one-row summary CSV, standalone SVG.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .core import Pose, Session, ValidationError
from .descriptors import SyntheticFieldConfig, synthetic_descriptor


class SplitMix64:
    """SplitMix64 PRNG (Steele et al.); reproducible across implementations.

    state' = state + 0x9E3779B97F4A7C15; output is the mixed state. Used
    for all synthetic-data randomness so sessions are a pure function of
    their spec.
    """

    MASK = 0xFFFFFFFFFFFFFFFF

    def __init__(self, seed: int):
        self.state = seed & self.MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def gauss(self, mu: float, sigma: float) -> float:
        # Box-Muller; one fresh pair per call keeps the stream simple.
        u1 = max(self.random(), 1e-300)
        u2 = self.random()
        return mu + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(
            2.0 * math.pi * u2
        )


def _rotation_matrix_to_quaternion(r: np.ndarray) -> np.ndarray:
    """Convert a 3x3 rotation matrix to an (x, y, z, w) quaternion."""
    t = np.trace(r)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2.0
        w = 0.25 * s
        x = (r[2, 1] - r[1, 2]) / s
        y = (r[0, 2] - r[2, 0]) / s
        z = (r[1, 0] - r[0, 1]) / s
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        w = (r[2, 1] - r[1, 2]) / s
        x = 0.25 * s
        y = (r[0, 1] + r[1, 0]) / s
        z = (r[0, 2] + r[2, 0]) / s
    elif r[1, 1] > r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        w = (r[0, 2] - r[2, 0]) / s
        x = (r[0, 1] + r[1, 0]) / s
        y = 0.25 * s
        z = (r[1, 2] + r[2, 1]) / s
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        w = (r[1, 0] - r[0, 1]) / s
        x = (r[0, 2] + r[2, 0]) / s
        y = (r[1, 2] + r[2, 1]) / s
        z = 0.25 * s
    return np.array([x, y, z, w])


def read_kitti_poses(path) -> list[Pose]:
    """Poses from a KITTI-style text file of row-major 3x4 transforms."""
    poses = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            tokens = line.split()
            if len(tokens) != 12:
                raise ValidationError(
                    f"{path}:{lineno}: expected 12 values, found {len(tokens)}"
                )
            try:
                values = [float(t) for t in tokens]
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            mat = np.array(values).reshape(3, 4)
            quat = _rotation_matrix_to_quaternion(mat[:, :3])
            poses.append(Pose(mat[:, 3], quat))
    return poses


def read_tum_poses(path) -> list[tuple[float, Pose]]:
    """(timestamp, pose) pairs from a TUM-style text file."""
    out: list[tuple[float, Pose]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) != 8:
                raise ValidationError(
                    f"{path}:{lineno}: expected 8 values, found {len(tokens)}"
                )
            try:
                t, tx, ty, tz, qx, qy, qz, qw = (float(v) for v in tokens)
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            if out and t <= out[-1][0]:
                raise ValidationError(
                    f"{path}:{lineno}: non-monotone timestamp {t}"
                )
            out.append((t, Pose([tx, ty, tz], [qx, qy, qz, qw])))
    return out


def write_tum_poses(path, stamped_poses: list[tuple[float, Pose]]) -> None:
    lines = ["# t tx ty tz qx qy qz qw"]
    for t, pose in stamped_poses:
        px, py, pz = pose.position
        qx, qy, qz, qw = pose.quaternion
        lines.append(
            f"{t:.17g} {px:.17g} {py:.17g} {pz:.17g} "
            f"{qx:.17g} {qy:.17g} {qz:.17g} {qw:.17g}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_kitti_poses(path, poses: list[Pose]) -> None:
    """Write poses as KITTI 3x4 lines (identity rotation unless given)."""
    lines = []
    for pose in poses:
        r = _quaternion_to_rotation_matrix(pose.quaternion)
        mat = np.hstack([r, pose.position.reshape(3, 1)])
        lines.append(" ".join(f"{v:.17g}" for v in mat.reshape(-1)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _quaternion_to_rotation_matrix(q: np.ndarray) -> np.ndarray:
    x, y, z, w = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def read_pointcloud_bin(path) -> np.ndarray:
    """Point cloud from raw float32 (x, y, z, intensity) records."""
    size = os.path.getsize(path)
    if size % 16 != 0:
        raise ValidationError(
            f"{path}: size {size} not divisible by 16-byte records"
        )
    with open(path, "rb") as fh:
        data = np.frombuffer(fh.read(), dtype="<f4")
    return data.reshape(-1, 4).astype(float)


def write_pointcloud_bin(path, points: np.ndarray) -> None:
    pts = np.asarray(points, dtype="<f4").reshape(-1, 4)
    with open(path, "wb") as fh:
        fh.write(pts.tobytes(order="C"))


@dataclass(frozen=True)
class SyntheticSessionSpec:
    """Desk-scale substitute for real sequences, deterministic per seed."""

    shape: str = "loop"  # loop | figure_eight | line
    length: float = 100.0  # meters per lap (or line length)
    frame_spacing: float = 0.5
    revisit_laps: int = 1
    descriptor: SyntheticFieldConfig = field(
        default_factory=SyntheticFieldConfig
    )
    pose_noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.shape not in ("loop", "figure_eight", "line"):
            raise ValidationError(f"unknown trajectory shape {self.shape!r}")
        if self.frame_spacing <= 0:
            raise ValidationError("frame spacing must be positive")
        if self.revisit_laps < 1:
            raise ValidationError("revisit laps must be at least 1")


def _shape_point(shape: str, length: float, s: float) -> tuple[float, float]:
    """Planar point at arc-length fraction s in [0, 1) along one lap."""
    if shape == "line":
        return (s * length, 0.0)
    if shape == "loop":
        radius = length / (2.0 * math.pi)
        theta = 2.0 * math.pi * s
        return (radius * math.cos(theta), radius * math.sin(theta))
    # figure_eight: two tangent circles, each half the lap length.
    radius = length / (4.0 * math.pi)
    if s < 0.5:
        theta = 4.0 * math.pi * s
        return (radius * math.sin(theta), radius * (1.0 - math.cos(theta)))
    theta = 4.0 * math.pi * (s - 0.5)
    return (radius * math.sin(theta), -radius * (1.0 - math.cos(theta)))


def generate_synthetic_session(spec: SyntheticSessionSpec) -> Session:
    """Poses along the named shape plus synthetic-field descriptors."""
    rng = SplitMix64(spec.seed)
    frames_per_lap = max(int(round(spec.length / spec.frame_spacing)), 1)
    if spec.shape == "line":
        frames_per_lap += 1  # include both endpoints
    poses = []
    for lap in range(spec.revisit_laps):
        for i in range(frames_per_lap):
            s = i / frames_per_lap if spec.shape != "line" else i / max(
                frames_per_lap - 1, 1
            )
            x, y = _shape_point(spec.shape, spec.length, s)
            if spec.pose_noise_sigma > 0:
                x += rng.gauss(0.0, spec.pose_noise_sigma)
                y += rng.gauss(0.0, spec.pose_noise_sigma)
            # Heading along the path as a yaw-only quaternion.
            ds = 1e-4
            x2, y2 = _shape_point(
                spec.shape, spec.length, min(s + ds, 0.999999)
            )
            yaw = math.atan2(y2 - y, x2 - x) if (x2, y2) != (x, y) else 0.0
            quat = [0.0, 0.0, math.sin(yaw / 2.0), math.cos(yaw / 2.0)]
            poses.append(Pose([x, y, 0.0], quat))
    noise_rng = SplitMix64(spec.seed ^ 0xA5A5A5A5A5A5A5A5)
    descriptors = np.array(
        [
            synthetic_descriptor(p.position, spec.descriptor, rng=noise_rng)
            for p in poses
        ]
    )
    return Session(poses=poses, descriptors=descriptors)


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file + rename so readers never see partial output."""
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise ValidationError(f"cannot write {path}: {exc}") from exc


def write_pr_csv(path, pr_points) -> None:
    lines = ["threshold,precision,recall"]
    for threshold, precision, recall in pr_points:
        lines.append(f"{threshold:.12g},{precision:.12g},{recall:.12g}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_pr_csv(path):
    points = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("threshold"):
            raise ValidationError(f"{path}: missing PR CSV header")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValidationError(f"{path}:{lineno}: expected 3 columns")
            points.append(tuple(float(v) for v in parts))
    return points


def write_results(report, out_dir) -> None:
    """Emit pr.csv plus a one-row summary.csv for an evaluation report."""
    os.makedirs(out_dir, exist_ok=True)
    write_pr_csv(os.path.join(out_dir, "pr.csv"), report.pr_points)
    tp, fp, fn, tn = report.counts
    summary = (
        "auc,f1_max,memory_ratio,query_wall_time,tp,fp,fn,tn\n"
        f"{report.auc:.12g},{report.f1_max:.12g},"
        f"{report.memory_ratio:.12g},{report.query_wall_time:.6f},"
        f"{tp},{fp},{fn},{tn}\n"
    )
    atomic_write_text(os.path.join(out_dir, "summary.csv"), summary)


def write_svg_plot(pr_points, out_path, width=480, height=480) -> None:
    """Standalone SVG line plot of precision (y) vs recall (x), axes [0,1]."""
    margin = 40
    span_x = width - 2 * margin
    span_y = height - 2 * margin

    def to_px(recall, precision):
        return (
            margin + recall * span_x,
            height - margin - precision * span_y,
        )

    pts = sorted((r, p) for _, p, r in pr_points)
    path_data = " ".join(
        f"{'M' if i == 0 else 'L'} {to_px(r, p)[0]:.2f} {to_px(r, p)[1]:.2f}"
        for i, (r, p) in enumerate(pts)
    )
    axes = (
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>'
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black"/>'
    )
    labels = (
        f'<text x="{width // 2}" y="{height - 8}" text-anchor="middle" '
        f'font-size="12">recall</text>'
        f'<text x="12" y="{height // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 12 {height // 2})">precision</text>'
    )
    curve = (
        f'<path d="{path_data}" fill="none" stroke="steelblue" '
        f'stroke-width="1.5"/>'
        if path_data
        else ""
    )
    svg = (
        f'<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f"{axes}\n{labels}\n{curve}\n</svg>\n"
    )
    atomic_write_text(out_path, svg)
