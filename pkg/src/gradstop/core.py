"""Small numeric kernel shared by every other module.

Vectors and matrices are plain float64 numpy arrays; the helpers here
validate shape/finiteness at module boundaries and implement the few
geometric primitives the gradient metrics are built on. All randomness
in the library flows through explicitly seeded ``numpy.random.Generator``
instances so that runs are reproducible end to end.
"""

from __future__ import annotations

import numpy as np


class NumericError(ValueError):
    """A quantity that must be finite (or nonzero) is not."""


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator: identical seed, identical draw sequence."""
    return np.random.default_rng(int(seed))


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NumericError(f"{name} contains non-finite entries")
    return v


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError(f"{name} contains non-finite entries")
    return m


def norm(v) -> float:
    """Euclidean norm of a non-empty vector."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("norm of an empty vector is undefined")
    return float(np.linalg.norm(v))


def sum_vectors(vectors) -> np.ndarray:
    """Componentwise sum of a non-empty list of equal-length vectors."""
    if len(vectors) == 0:
        raise ValueError("cannot sum an empty list of vectors")
    arrs = [np.asarray(v, dtype=np.float64) for v in vectors]
    dim = arrs[0].shape
    for i, a in enumerate(arrs):
        if a.shape != dim:
            raise ValueError(f"vector {i} has shape {a.shape}, expected {dim}")
    return np.sum(arrs, axis=0)


def angle_between(u, v) -> float:
    """Angle in [0, pi] between two nonzero vectors.

    The cosine is clamped to [-1, 1] before arccos; near-antiparallel
    sums otherwise trip rounding just outside the domain.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("angle with a zero-norm vector is undefined")
    cos = float(np.dot(u, v) / (nu * nv))
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))
