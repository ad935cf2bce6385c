"""Descriptor sources: simplified scan-context, ring-key, a synthetic smooth
field for testing, and the binary/CSV descriptor matrix interchange format.

Descriptor matrix file format ("KDSC"): magic bytes b"KDSC", then three
little-endian uint32 values (version=1, N, M), then N*M little-endian
float32 values row-major. The CSV alternative is one comma-separated row
per frame.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .core import ValidationError

KDSC_MAGIC = b"KDSC"
KDSC_VERSION = 1


@dataclass(frozen=True)
class ScanContextConfig:
    rings: int = 20
    sectors: int = 60
    max_range: float = 80.0

    def __post_init__(self):
        if self.rings < 1 or self.sectors < 1:
            raise ValidationError("rings and sectors must be at least 1")
        if self.max_range <= 0:
            raise ValidationError("max_range must be positive")


def scan_context(
    points: np.ndarray, config: ScanContextConfig = ScanContextConfig()
) -> np.ndarray:
    """Max-height polar occupancy descriptor of length rings * sectors.

    Points are binned by planar range and azimuth; each cell holds the
    maximum z in that cell (0 when empty). Points at or beyond max_range
    are discarded (half-open ring bins). Flattened row-major, ring-major.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return np.zeros(config.rings * config.sectors)
    pts = pts.reshape(pts.shape[0], -1)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    rng = np.hypot(x, y)
    keep = rng < config.max_range
    x, y, z, rng = x[keep], y[keep], z[keep], rng[keep]
    if rng.size == 0:
        return np.zeros(config.rings * config.sectors)
    ring = np.floor(config.rings * rng / config.max_range).astype(int)
    azimuth = np.mod(np.arctan2(y, x), 2.0 * np.pi)
    sector = np.floor(config.sectors * azimuth / (2.0 * np.pi)).astype(int)
    sector = np.minimum(sector, config.sectors - 1)
    # Track emptiness separately: cell value is max z of its points, which
    # may be negative, while empty cells must read exactly 0.
    heights = np.full((config.rings, config.sectors), -np.inf)
    np.maximum.at(heights, (ring, sector), z)
    filled = np.zeros((config.rings, config.sectors), dtype=bool)
    filled[ring, sector] = True
    grid = np.where(filled, heights, 0.0)
    return grid.reshape(-1)


def ring_key(
    descriptor: np.ndarray, config: ScanContextConfig = ScanContextConfig()
) -> np.ndarray:
    """Rotation-invariant summary: per-ring fraction of occupied cells."""
    d = np.asarray(descriptor, dtype=float)
    expected = config.rings * config.sectors
    if d.size != expected:
        raise ValidationError(
            f"descriptor length {d.size} != rings*sectors {expected}"
        )
    grid = d.reshape(config.rings, config.sectors)
    return np.count_nonzero(grid, axis=1) / config.sectors


def shifted_descriptor_distance(
    a: np.ndarray, b: np.ndarray, config: ScanContextConfig = ScanContextConfig()
) -> float:
    """Scan-context distance minimized over cyclic sector shifts.

    Optional alternative for scan-context queries; the optimization terms
    always use the plain Euclidean distance.
    """
    ga = np.asarray(a, dtype=float).reshape(config.rings, config.sectors)
    gb = np.asarray(b, dtype=float).reshape(config.rings, config.sectors)
    best = np.inf
    for shift in range(config.sectors):
        d = float(np.linalg.norm(ga - np.roll(gb, shift, axis=1)))
        best = min(best, d)
    return best


@dataclass(frozen=True)
class SyntheticFieldConfig:
    """A smooth deterministic descriptor field over positions.

    Component m of the field is cos(frequencies[m] . p + phases[m]) plus
    optional Gaussian noise. Frequencies/phases default to a seeded draw.
    """

    dimension: int = 64
    seed: int = 0
    noise_sigma: float = 0.0
    frequencies: np.ndarray | None = None
    phases: np.ndarray | None = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValidationError("dimension must be at least 1")
        from .dataset_io import SplitMix64

        rng = SplitMix64(self.seed)
        if self.frequencies is None:
            freqs = np.array(
                [
                    [rng.uniform(-0.5, 0.5) for _ in range(3)]
                    for _ in range(self.dimension)
                ]
            )
            object.__setattr__(self, "frequencies", freqs)
        else:
            freqs = np.asarray(self.frequencies, dtype=float)
            if freqs.shape != (self.dimension, 3):
                raise ValidationError("frequencies must be dimension x 3")
            object.__setattr__(self, "frequencies", freqs)
        if self.phases is None:
            ph = np.array(
                [rng.uniform(0.0, 2.0 * np.pi) for _ in range(self.dimension)]
            )
            object.__setattr__(self, "phases", ph)
        else:
            ph = np.asarray(self.phases, dtype=float).reshape(-1)
            if ph.shape != (self.dimension,):
                raise ValidationError("phases must have length dimension")
            object.__setattr__(self, "phases", ph)


def synthetic_descriptor(
    position: np.ndarray,
    config: SyntheticFieldConfig,
    rng=None,
) -> np.ndarray:
    """Evaluate the synthetic field at one position.

    With noise_sigma > 0 a SplitMix64-derived Gaussian sample is added per
    component; pass `rng` to draw from a session-level stream.
    """
    p = np.asarray(position, dtype=float).reshape(3)
    values = np.cos(config.frequencies @ p + config.phases)
    if config.noise_sigma > 0:
        from .dataset_io import SplitMix64

        rng = rng or SplitMix64(config.seed ^ 0x9E3779B97F4A7C15)
        noise = np.array(
            [rng.gauss(0.0, config.noise_sigma) for _ in range(values.size)]
        )
        values = values + noise
    return values


def save_descriptors(path, matrix: np.ndarray) -> None:
    """Write an N x M descriptor matrix in the KDSC binary format."""
    m = np.asarray(matrix, dtype=np.float32)
    if m.ndim != 2:
        raise ValidationError("descriptor matrix must be 2-D")
    with open(path, "wb") as fh:
        fh.write(KDSC_MAGIC)
        fh.write(struct.pack("<III", KDSC_VERSION, m.shape[0], m.shape[1]))
        fh.write(m.astype("<f4").tobytes(order="C"))


def load_descriptors(path, expected_count: int | None = None) -> np.ndarray:
    """Read a KDSC binary or CSV descriptor matrix.

    Values are promoted to float64 in memory. `expected_count`, when
    given, must match the number of rows.
    """
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head == KDSC_MAGIC:
            meta = fh.read(12)
            if len(meta) != 12:
                raise ValidationError(f"{path}: truncated KDSC header")
            version, n, m = struct.unpack("<III", meta)
            if version != KDSC_VERSION:
                raise ValidationError(
                    f"{path}: unsupported KDSC version {version}"
                )
            payload = fh.read()
            expected_bytes = 4 * n * m
            if len(payload) != expected_bytes:
                raise ValidationError(
                    f"{path}: expected {expected_bytes} payload bytes, "
                    f"found {len(payload)}"
                )
            matrix = np.frombuffer(payload, dtype="<f4").reshape(n, m)
            matrix = matrix.astype(float)
        else:
            matrix = _load_csv_descriptors(path)
    if not np.all(np.isfinite(matrix)):
        raise ValidationError(f"{path}: non-finite descriptor values")
    if expected_count is not None and matrix.shape[0] != expected_count:
        raise ValidationError(
            f"{path}: expected {expected_count} descriptor rows, "
            f"found {matrix.shape[0]}"
        )
    return matrix


def _load_csv_descriptors(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ValidationError(
                    f"{path}:{lineno}: expected {width} values, "
                    f"found {len(row)}"
                )
            rows.append(row)
    if not rows:
        raise ValidationError(f"{path}: empty descriptor file")
    return np.array(rows)
