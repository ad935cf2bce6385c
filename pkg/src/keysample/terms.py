"""The two optimization terms and their numerical machinery.

Redundancy is the mean similarity of consecutive keyframe descriptors.
Information preservation is the negative mean distance between consecutive
descriptors after projection onto the principal directions of the
descriptor-vs-arclength Jacobian covariance.

Both terms normalize by N-1 (the number of consecutive pairs), which is the
authoritative definition; an |K| divisor also appears in some renderings of
the method and differs by a constant factor only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Keyframe, ValidationError, cumulative_arclength

# J^T J is positive semi-definite in exact arithmetic; eigenvalues in
# (-EIG_CLAMP, 0) are round-off and get clamped to zero.
EIG_CLAMP = 1e-10


@dataclass(frozen=True)
class ObjectiveParams:
    """Weights of the combined objective (redundancy + alpha)/(preservation - beta)."""

    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValidationError("alpha and beta must be strictly positive")


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted descending plus the matching orthonormal eigenvectors.

    Column k of `eigenvectors` pairs with `eigenvalues[k]`. Each column's
    sign is fixed so its first component of magnitude above 1e-12 is
    positive, making downstream transforms deterministic.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def descriptor_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between two descriptors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValidationError(
            f"descriptor dimension mismatch: {a.shape} vs {b.shape}"
        )
    return float(np.linalg.norm(a - b))


def descriptor_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Similarity 1/(1 + distance), in (0, 1]."""
    return 1.0 / (1.0 + descriptor_distance(a, b))


def redundancy(keyframes: list[Keyframe]) -> float:
    """Mean similarity of consecutive descriptors, in (0, 1]."""
    if len(keyframes) < 2:
        raise ValidationError(
            "redundancy undefined for fewer than two keyframes"
        )
    descriptors = np.array([k.descriptor for k in keyframes])
    diffs = np.linalg.norm(np.diff(descriptors, axis=0), axis=1)
    return float(np.mean(1.0 / (1.0 + diffs)))


def numerical_jacobian(
    descriptors: np.ndarray, arclength: np.ndarray
) -> np.ndarray:
    """Rate of change of each descriptor component along the arc length.

    Returns an M x N matrix (component-major, one column per keyframe).
    Interior nodes use the second-order three-point stencil on the
    non-uniform grid; the two boundary nodes use first-order one-sided
    differences. Exact for components affine in arc length.
    """
    descriptors = np.asarray(descriptors, dtype=float)
    arclength = np.asarray(arclength, dtype=float)
    if descriptors.ndim != 2 or descriptors.shape[0] < 2:
        raise ValidationError("need at least two descriptors")
    if arclength.shape != (descriptors.shape[0],):
        raise ValidationError("arclength length must match descriptor rows")
    if np.any(np.diff(arclength) <= 0):
        raise ValidationError("arclength must be strictly increasing")
    grad = np.gradient(descriptors, arclength, axis=0, edge_order=1)
    return grad.T


def eigendecompose(matrix: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a small symmetric matrix, deterministically ordered.

    The input is symmetrized as (A + A^T)/2 first; eigenvalues in
    (-EIG_CLAMP, 0) are clamped to zero.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("matrix must be square")
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix entries must be finite")
    sym = 0.5 * (a + a.T)
    values, vectors = np.linalg.eigh(sym)
    order = np.argsort(values)[::-1]
    values = values[order]
    vectors = vectors[:, order]
    values = np.where((values > -EIG_CLAMP) & (values < 0.0), 0.0, values)
    for k in range(vectors.shape[1]):
        col = vectors[:, k]
        nonzero = np.nonzero(np.abs(col) > 1e-12)[0]
        if nonzero.size and col[nonzero[0]] < 0:
            vectors[:, k] = -col
    return EigenDecomposition(values, vectors)


def transform_descriptors(
    descriptors: np.ndarray, eig: EigenDecomposition
) -> np.ndarray:
    """Project descriptors onto principal directions: D' = sqrt(L) * V * D.

    Negative eigenvalues are clamped to zero before the square root.
    """
    descriptors = np.asarray(descriptors, dtype=float)
    n = descriptors.shape[0]
    if eig.eigenvectors.shape != (n, n):
        raise ValidationError(
            "eigendecomposition size does not match descriptor rows"
        )
    scale = np.sqrt(np.clip(eig.eigenvalues, 0.0, None))
    return (scale[:, None] * eig.eigenvectors) @ descriptors


def preservation(keyframes: list[Keyframe]) -> float:
    """Information preservation term; non-positive, zero when nothing varies."""
    if len(keyframes) < 2:
        raise ValidationError(
            "preservation undefined for fewer than two keyframes"
        )
    descriptors = np.array([k.descriptor for k in keyframes])
    arclength = cumulative_arclength([k.pose for k in keyframes])
    jac = numerical_jacobian(descriptors, arclength)
    eig = eigendecompose(jac.T @ jac)
    transformed = transform_descriptors(descriptors, eig)
    diffs = np.linalg.norm(np.diff(transformed, axis=0), axis=1)
    # + 0.0 normalizes the -0.0 produced by negating a zero mean.
    return float(-np.mean(diffs) + 0.0)


def objective(
    keyframes: list[Keyframe], params: ObjectiveParams = ObjectiveParams()
) -> float:
    """Combined score (redundancy + alpha)/(preservation - beta); always negative."""
    rho = redundancy(keyframes)
    pi = preservation(keyframes)
    return (rho + params.alpha) / (pi - params.beta)
