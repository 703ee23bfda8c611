"""Dataset ingestion, preprocessing and synthetic generators.

Datasets are immutable value objects: a float64 feature matrix, an
optional 0/1 label vector used for evaluation only, and a name. The
training code never sees labels; it works on the ``TrainView`` returned
by :meth:`Dataset.train_view`, which carries features only.

CSV ingestion expects UTF-8, a header row, comma separators and '.'
decimals. Anything published in a different container format (e.g. the
common ``.npz`` benchmark archives) is converted first, one line:

    python -c "import numpy as np; d=np.load('X.npz'); np.savetxt('X.csv',
    np.column_stack([d['X'], d['y']]), delimiter=',',
    header=','.join([f'f{i}' for i in range(d['X'].shape[1])]+['label']),
    comments='')"
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import as_matrix


class DataError(Exception):
    """Base class for ingestion/validation failures."""


class CsvParseError(DataError):
    """A cell could not be parsed; message names the row and column."""


class LabelError(DataError):
    """Label column missing, non-binary, or absent when required."""


@dataclass(frozen=True)
class TrainView:
    """Features-only view handed to model and stopper code."""

    X: np.ndarray
    name: str


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    labels: Optional[np.ndarray] = None
    name: str = "dataset"

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        object.__setattr__(self, "X", X)
        if X.shape[0] < 2 or X.shape[1] < 1:
            raise DataError(f"dataset needs n >= 2 and d >= 1, got {X.shape}")
        if self.labels is not None:
            y = np.asarray(self.labels, dtype=np.int64)
            if y.shape != (X.shape[0],):
                raise LabelError(
                    f"labels length {y.shape} does not match n={X.shape[0]}"
                )
            if not np.all((y == 0) | (y == 1)):
                raise LabelError("labels must be 0 (inlier) or 1 (outlier)")
            object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def contamination(self) -> Optional[float]:
        if self.labels is None:
            return None
        return float(np.mean(self.labels))

    def train_view(self) -> TrainView:
        return TrainView(X=self.X, name=self.name)


@dataclass(frozen=True)
class EvalBatch:
    """Fixed row subset on which gradient metrics are computed."""

    indices: np.ndarray
    X_eval: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if len(np.unique(idx)) != len(idx):
            raise ValueError("evaluation batch indices must be distinct")
        if idx.shape[0] != self.X_eval.shape[0]:
            raise ValueError("indices and X_eval row counts differ")
        object.__setattr__(self, "indices", idx)

    @property
    def size(self) -> int:
        return int(self.indices.shape[0])


SCENARIOS = ("blob_uniform", "blob_far_gaussian", "toxic_inverted")


@dataclass(frozen=True)
class SyntheticConfig:
    """Labeled synthetic regimes at desk scale.

    blob_uniform      inliers from a standard Gaussian blob, outliers
                      uniform in a wide box: training helps, then hurts.
    blob_far_gaussian inliers Gaussian, outliers a small tight Gaussian
                      far away: separation is there from the start.
    toxic_inverted    outliers form a tight, easy-to-fit, small-norm
                      cluster while inliers are dispersed; the model
                      fits outliers first and training only hurts.
    """

    n_inlier: int
    n_outlier: int
    d: int
    scenario: str = "blob_uniform"
    inlier_spread: float = 1.0
    outlier_spread: float = float("nan")  # nan: scenario default
    outlier_offset: float = float("nan")

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise DataError(f"unknown scenario {self.scenario!r}")
        if self.n_outlier < 1:
            raise DataError("n_outlier >= 1 required (AUC needs both classes)")
        if self.n_outlier > self.n_inlier:
            raise DataError("n_outlier must not exceed n_inlier")
        if self.d < 1:
            raise DataError("d >= 1 required")

    @property
    def contamination(self) -> float:
        return self.n_outlier / (self.n_inlier + self.n_outlier)


_SCENARIO_DEFAULTS = {
    # (outlier_spread, outlier_offset)
    "blob_uniform": (4.0, 0.0),
    "blob_far_gaussian": (0.25, 6.0),
    "toxic_inverted": (0.01, 0.36),
}


def gen_synthetic(cfg: SyntheticConfig, rng: np.random.Generator) -> Dataset:
    """Draw a labeled dataset for one of the synthetic regimes."""
    spread, offset = _SCENARIO_DEFAULTS[cfg.scenario]
    if not math.isnan(cfg.outlier_spread):
        spread = cfg.outlier_spread
    if not math.isnan(cfg.outlier_offset):
        offset = cfg.outlier_offset

    d = cfg.d
    if cfg.scenario == "blob_uniform":
        inliers = rng.normal(0.0, cfg.inlier_spread, size=(cfg.n_inlier, d))
        outliers = rng.uniform(-spread, spread, size=(cfg.n_outlier, d))
    elif cfg.scenario == "blob_far_gaussian":
        inliers = rng.normal(0.0, cfg.inlier_spread, size=(cfg.n_inlier, d))
        direction = np.ones(d) / math.sqrt(d)
        outliers = offset * direction + rng.normal(
            0.0, spread, size=(cfg.n_outlier, d)
        )
    else:  # toxic_inverted
        # Three populations at small scale: an incoherent inlier bulk, a
        # one-sided far inlier tail, and a tight low-norm outlier cluster
        # on the opposite side of the tail axis. The outlier cluster
        # dominates the descent direction, so it is fitted first and the
        # ranking degrades from epoch one, while the tail keeps the two
        # sampled gradient sets pulling apart (large divergence early).
        s = cfg.inlier_spread
        direction = np.ones(d) / math.sqrt(d)
        n_tail = max(1, int(0.10 * cfg.n_inlier))
        bulk = rng.normal(0.0, 0.19 * s, size=(cfg.n_inlier - n_tail, d))
        tail = 0.85 * s * direction + rng.normal(
            0.0, 0.05 * s, size=(n_tail, d)
        )
        inliers = np.vstack([bulk, tail])
        outliers = -offset * direction + rng.normal(
            0.0, spread, size=(cfg.n_outlier, d)
        )

    X = np.vstack([inliers, outliers])
    y = np.concatenate(
        [np.zeros(cfg.n_inlier, dtype=np.int64), np.ones(cfg.n_outlier, dtype=np.int64)]
    )
    return Dataset(X=X, labels=y, name=f"synthetic-{cfg.scenario}")


def load_csv(path, label_column: Optional[str] = None) -> Dataset:
    """Read a dataset from CSV; the named label column becomes labels."""
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError:
        raise FileNotFoundError(f"dataset file not found: {path}")
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: empty file, header row required")
        header = [h.strip() for h in header]
        label_idx = None
        if label_column is not None:
            if label_column not in header:
                raise LabelError(
                    f"{path}: label column {label_column!r} not in header {header}"
                )
            label_idx = header.index(label_column)

        rows: list[list[float]] = []
        labels: list[int] = []
        for r, record in enumerate(reader, start=2):  # 1-based, after header
            if len(record) != len(header):
                raise CsvParseError(
                    f"{path}: row {r} has {len(record)} cells, "
                    f"header has {len(header)}"
                )
            vals = []
            for c, cell in enumerate(record):
                cell = cell.strip()
                try:
                    x = float(cell)
                except ValueError:
                    raise CsvParseError(
                        f"{path}: non-numeric cell {cell!r} at row {r}, "
                        f"column {header[c] if c < len(header) else c}"
                    )
                if c == label_idx:
                    if x not in (0.0, 1.0):
                        raise LabelError(
                            f"{path}: label {cell!r} at row {r} is not 0 or 1"
                        )
                    labels.append(int(x))
                else:
                    vals.append(x)
            rows.append(vals)

    if not rows:
        raise CsvParseError(f"{path}: header only, no data rows")
    name = os.path.splitext(os.path.basename(str(path)))[0]
    X = np.asarray(rows, dtype=np.float64)
    return Dataset(
        X=X,
        labels=np.asarray(labels, dtype=np.int64) if label_idx is not None else None,
        name=name,
    )


def standardize(ds: Dataset) -> Dataset:
    """Per-feature zero mean, unit population std; constant columns to 0."""
    mu = ds.X.mean(axis=0)
    sigma = ds.X.std(axis=0)  # population convention (divide by n)
    safe = np.where(sigma == 0.0, 1.0, sigma)
    X = (ds.X - mu) / safe
    return replace(ds, X=X)


def downsample(ds: Dataset, max_n: int, rng: np.random.Generator) -> Dataset:
    """Uniform subsample without replacement when the dataset exceeds max_n."""
    if max_n < 2:
        raise ValueError("max_n must be at least 2")
    if ds.n <= max_n:
        return ds
    idx = np.sort(rng.choice(ds.n, size=max_n, replace=False))
    labels = ds.labels[idx] if ds.labels is not None else None
    return Dataset(X=ds.X[idx], labels=labels, name=ds.name)


def sample_eval_batch(
    ds: Dataset, n_eval: int, rng: np.random.Generator
) -> EvalBatch:
    """Draw the fixed evaluation batch, once per training run."""
    if n_eval > ds.n:
        raise ValueError(f"n_eval={n_eval} exceeds dataset size n={ds.n}")
    if n_eval < 1:
        raise ValueError("n_eval must be positive")
    idx = rng.choice(ds.n, size=n_eval, replace=False)
    return EvalBatch(indices=idx, X_eval=ds.X[idx])
