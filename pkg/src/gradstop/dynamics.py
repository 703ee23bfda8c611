"""Gradient-dynamics metrics: the norm-ranked sampler, cohesion and
divergence of gradient sets, rank-based AUC, and class-wise loss means.

The sampler and both metrics are label-free; class_loss_means is
evaluation-only telemetry and the sole function here that reads labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import angle_between
from .data import Dataset, EvalBatch
from .model import ModelParams, per_sample_gradients, score_dataset


class ZeroSumError(ValueError):
    """A gradient set sums to the zero vector; the angle is undefined."""


@dataclass(frozen=True)
class GradientSet:
    """Per-sample gradient rows plus the batch indices they came from."""

    vectors: np.ndarray  # (m, n_params)
    source_indices: np.ndarray  # (m,)

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] == 0:
            raise ValueError("gradient set must be a non-empty 2-D array")
        if self.vectors.shape[0] != self.source_indices.shape[0]:
            raise ValueError("vectors and source_indices lengths differ")

    @property
    def size(self) -> int:
        return int(self.vectors.shape[0])

    def sum_vector(self) -> np.ndarray:
        return self.vectors.sum(axis=0)


@dataclass(frozen=True)
class EpochRecord:
    """One telemetry row per metric epoch."""

    epoch: int
    batch_loss: float
    C_top: float
    C_last: float
    C_delta: float
    D: float
    auc: Optional[float] = None
    mean_inlier_loss: Optional[float] = None
    mean_outlier_loss: Optional[float] = None


TELEMETRY_HEADER = (
    "epoch,batch_loss,C_top,C_last,C_delta,D,auc,"
    "mean_inlier_loss,mean_outlier_loss"
)


def _cell(v: Optional[float]) -> str:
    return "" if v is None else f"{v:.17g}"


def telemetry_row(rec: EpochRecord) -> str:
    return ",".join(
        [
            str(rec.epoch),
            f"{rec.batch_loss:.17g}",
            f"{rec.C_top:.17g}",
            f"{rec.C_last:.17g}",
            f"{rec.C_delta:.17g}",
            f"{rec.D:.17g}",
            _cell(rec.auc),
            _cell(rec.mean_inlier_loss),
            _cell(rec.mean_outlier_loss),
        ]
    )


def grad_sample(
    p: ModelParams, batch: EvalBatch, k: int
) -> tuple[GradientSet, GradientSet]:
    """Split the evaluation batch by per-sample gradient magnitude.

    Returns (top, last): the k largest-norm gradients, which lean
    outlier, and the k smallest-norm gradients, which lean inlier.
    Ties break toward the lower original index (stable argsort), so the
    split is deterministic across platforms.
    """
    n = batch.size
    if not 1 <= k <= n // 2:
        raise ValueError(f"k must satisfy 1 <= k <= floor(n/2), got k={k}, n={n}")
    G = per_sample_gradients(p, batch.X_eval)
    norms = np.linalg.norm(G, axis=1)
    order = np.argsort(norms, kind="stable")
    last_idx = order[:k]
    top_idx = order[n - k :]
    top = GradientSet(vectors=G[top_idx], source_indices=batch.indices[top_idx])
    last = GradientSet(vectors=G[last_idx], source_indices=batch.indices[last_idx])
    return top, last


def cohesion(G: GradientSet) -> float:
    """||sum g|| / sum ||g||: 1 when aligned, 0 under full cancellation.

    An all-zero set carries no directional evidence and maps to 0.
    """
    norms = np.linalg.norm(G.vectors, axis=1)
    total = float(norms.sum())
    if total == 0.0:
        return 0.0
    return float(np.linalg.norm(G.sum_vector()) / total)


def divergence(G1: GradientSet, G2: GradientSet) -> float:
    """Angle in [0, pi] between the two summed gradient directions."""
    s1 = G1.sum_vector()
    s2 = G2.sum_vector()
    if np.linalg.norm(s1) == 0.0 or np.linalg.norm(s2) == 0.0:
        raise ZeroSumError("summed gradient is zero; divergence undefined")
    return angle_between(s1, s2)


def auc(scores, labels, ties: str = "strict") -> float:
    """Probability that a random inlier scores below a random outlier.

    ``ties='strict'`` counts exact score ties as 0 (the discrete
    indicator convention); ``ties='half'`` counts them 0.5, matching
    common ranking tooling. Rank-based, O(n log n).
    """
    if ties not in ("strict", "half"):
        raise ValueError(f"ties must be 'strict' or 'half', got {ties!r}")
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D")
    n_out = int(y.sum())
    n_in = int(y.shape[0] - n_out)
    if n_in == 0 or n_out == 0:
        raise ValueError("AUC needs at least one inlier and one outlier")
    in_sorted = np.sort(s[y == 0])
    out_scores = s[y == 1]
    less = np.searchsorted(in_sorted, out_scores, side="left")
    if ties == "strict":
        wins = less.sum()
    else:
        equal = np.searchsorted(in_sorted, out_scores, side="right") - less
        wins = less.sum() + 0.5 * equal.sum()
    return float(wins / (n_in * n_out))


def class_loss_means(p: ModelParams, ds: Dataset) -> tuple[float, float]:
    """Mean per-sample loss of inliers and of outliers (telemetry only)."""
    if ds.labels is None:
        raise ValueError("class loss means require labels")
    losses = score_dataset(p, ds.X)
    mask_out = ds.labels == 1
    if not mask_out.any() or mask_out.all():
        raise ValueError("both classes must be non-empty")
    return float(losses[~mask_out].mean()), float(losses[mask_out].mean())
