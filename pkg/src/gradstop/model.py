"""Shallow detectors with per-sample gradients and full-batch descent.

Two scorers share one parameter container:

* ``ae``    one-hidden-layer autoencoder, x -> act(W1 x + b1) -> W2 z + b2,
            per-sample loss = squared reconstruction error reduced over
            the d coordinates (mean by default, so thresholds on the
            stopping indicator do not scale with feature count; sum
            selectable for sensitivity checks).
* ``dsvdd`` hypersphere scorer, per-sample loss = ||act(W1 x + b1) - c||^2
            with a center c that is fixed at init and never trained.

Trainable parameters flatten to one vector in a frozen canonical order:

    encoder weights W1 (h x d, row-major), encoder bias b1,
    decoder weights W2 (d x h, row-major), decoder bias b2.

``dsvdd`` has no decoder block; the center is not part of the vector.
Gradient vectors, checkpoints and descent steps all use this layout, so
gradient dimensions are stable across checkpoints of the same topology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import NumericError, as_matrix, as_vector

KINDS = ("ae", "dsvdd")
ACTIVATIONS = ("tanh", "relu")


def _act(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(a)
    return np.maximum(a, 0.0)


def _act_prime(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        t = np.tanh(a)
        return 1.0 - t * t
    return (a > 0.0).astype(np.float64)


@dataclass(frozen=True)
class ModelParams:
    kind: str
    W1: np.ndarray  # (h, d)
    b1: np.ndarray  # (h,)
    W2: Optional[np.ndarray] = None  # (d, h), ae only
    b2: Optional[np.ndarray] = None  # (d,), ae only
    center: Optional[np.ndarray] = None  # (h,), dsvdd only, not trained
    activation: str = "tanh"
    loss_reduction: str = "mean"  # ae only: mean|sum over the d coordinates

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.loss_reduction not in ("mean", "sum"):
            raise ValueError(f"unknown loss reduction {self.loss_reduction!r}")
        if self.kind == "ae" and (self.W2 is None or self.b2 is None):
            raise ValueError("ae requires decoder weights and bias")
        if self.kind == "dsvdd" and self.center is None:
            raise ValueError("dsvdd requires a center vector")

    @property
    def d(self) -> int:
        return self.W1.shape[1]

    @property
    def h(self) -> int:
        return self.W1.shape[0]

    @property
    def n_params(self) -> int:
        n = self.W1.size + self.b1.size
        if self.kind == "ae":
            n += self.W2.size + self.b2.size
        return n

    def to_vector(self) -> np.ndarray:
        """Trainable parameters in the canonical flattening order."""
        parts = [self.W1.ravel(), self.b1]
        if self.kind == "ae":
            parts += [self.W2.ravel(), self.b2]
        return np.concatenate(parts)

    def with_vector(self, theta: np.ndarray) -> "ModelParams":
        """New params with trainable values replaced from a flat vector."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise ValueError(
                f"parameter vector length {theta.shape} != {self.n_params}"
            )
        h, d = self.h, self.d
        W1 = theta[: h * d].reshape(h, d).copy()
        b1 = theta[h * d : h * d + h].copy()
        if self.kind == "ae":
            off = h * d + h
            W2 = theta[off : off + d * h].reshape(d, h).copy()
            b2 = theta[off + d * h :].copy()
            return replace(self, W1=W1, b1=b1, W2=W2, b2=b2)
        return replace(self, W1=W1, b1=b1)


@dataclass(frozen=True)
class Checkpoint:
    epoch: int
    params: ModelParams


@dataclass(frozen=True)
class Hyperparameters:
    """Training-plus-stopper knobs; defaults are the ae profile."""

    epochs: int = 100
    lr: float = 0.005
    k: int = 20
    t_cs: float = 0.01
    t_cb: float = 0.05
    t_d: float = 1.57
    w: int = 20
    r_down: float = 0.001
    n_eval: int = 400
    resample_interval: int = 10
    hidden: int = 64
    activation: str = "tanh"
    loss_reduction: str = "mean"

    def __post_init__(self):
        if self.epochs < 1 or self.lr <= 0 or self.k < 1 or self.w < 1:
            raise ValueError("epochs, lr, k and w must be positive")
        if not self.t_cs < self.t_cb:
            raise ValueError(f"need t_cs < t_cb, got [{self.t_cs}, {self.t_cb}]")
        if self.n_eval < 2 or self.resample_interval < 1:
            raise ValueError("n_eval >= 2 and resample_interval >= 1 required")
        if self.loss_reduction not in ("mean", "sum"):
            raise ValueError(f"unknown loss reduction {self.loss_reduction!r}")


#: Default profiles per model family. The rdp/vae profiles carry the
#: t_d = inf semantics (divergence fallback disabled) even though only
#: ae/dsvdd scorers are trainable here.
PRESETS: dict[str, Hyperparameters] = {
    "ae": Hyperparameters(
        epochs=100, lr=0.005, k=20, t_cs=0.01, t_cb=0.05, t_d=1.57,
        w=20, r_down=0.001, activation="tanh",
    ),
    "dsvdd": Hyperparameters(
        epochs=100, lr=0.001, k=20, t_cs=0.0, t_cb=0.1, t_d=1.57,
        w=10, r_down=0.001, activation="relu",
    ),
    "rdp": Hyperparameters(
        epochs=100, lr=0.5, k=20, t_cs=0.0, t_cb=0.5, t_d=math.inf,
        w=50, r_down=0.001, activation="tanh",
    ),
    "vae": Hyperparameters(
        epochs=100, lr=0.01, k=10, t_cs=0.01, t_cb=0.5, t_d=math.inf,
        w=20, r_down=0.001, activation="tanh",
    ),
}


def init_model(
    kind: str,
    d: int,
    h: int,
    rng: np.random.Generator,
    activation: str = "tanh",
    warmup_batch: Optional[np.ndarray] = None,
    loss_reduction: str = "mean",
) -> ModelParams:
    """Uniform +-1/sqrt(fan_in) weights, zero biases.

    For ``dsvdd`` the center is the mean embedding of ``warmup_batch``
    under the initial weights, with any coordinate |c_i| < 0.1 snapped
    to +-0.1 (sign-preserving) to keep the hypersphere from collapsing
    onto a trivially reachable point.
    """
    if d < 1 or h < 1:
        raise ValueError("d and h must be positive")
    bound1 = 1.0 / math.sqrt(d)
    W1 = rng.uniform(-bound1, bound1, size=(h, d))
    b1 = np.zeros(h)
    if kind == "ae":
        bound2 = 1.0 / math.sqrt(h)
        W2 = rng.uniform(-bound2, bound2, size=(d, h))
        b2 = np.zeros(d)
        return ModelParams(kind="ae", W1=W1, b1=b1, W2=W2, b2=b2,
                           activation=activation, loss_reduction=loss_reduction)
    if kind == "dsvdd":
        if warmup_batch is None:
            raise ValueError("dsvdd init requires a warmup batch for the center")
        Xw = as_matrix(warmup_batch, "warmup_batch")
        Z = _act(Xw @ W1.T + b1, activation)
        c = Z.mean(axis=0)
        small = np.abs(c) < 0.1
        c = np.where(small, np.where(c < 0, -0.1, 0.1), c)
        return ModelParams(kind="dsvdd", W1=W1, b1=b1, center=c,
                           activation=activation)
    raise ValueError(f"unknown model kind {kind!r}")


def _loss_scale(p: ModelParams) -> float:
    """Factor turning a summed square error into the configured loss."""
    return 1.0 / p.d if p.loss_reduction == "mean" else 1.0


def _forward(p: ModelParams, X: np.ndarray):
    """Shared forward pass; returns per-sample losses plus intermediates."""
    A1 = X @ p.W1.T + p.b1  # (n, h)
    Z = _act(A1, p.activation)
    if p.kind == "ae":
        Xhat = Z @ p.W2.T + p.b2
        E = Xhat - X
        losses = _loss_scale(p) * np.sum(E * E, axis=1)
        return losses, A1, Z, E
    diff = Z - p.center
    losses = np.sum(diff * diff, axis=1)
    return losses, A1, Z, diff


def per_sample_loss(p: ModelParams, x) -> float:
    x = as_vector(x, "x")
    if x.shape[0] != p.d:
        raise ValueError(f"x has dimension {x.shape[0]}, model expects {p.d}")
    losses, *_ = _forward(p, x[None, :])
    return float(losses[0])


def per_sample_gradients(p: ModelParams, X) -> np.ndarray:
    """Flattened loss gradients, one row per sample: shape (n, n_params)."""
    X = as_matrix(X, "X")
    if X.shape[1] != p.d:
        raise ValueError(f"X has dimension {X.shape[1]}, model expects {p.d}")
    n = X.shape[0]
    _, A1, Z, E = _forward(p, X)
    if p.kind == "ae":
        dXhat = 2.0 * _loss_scale(p) * E  # (n, d)
        gW2 = np.einsum("ni,nj->nij", dXhat, Z).reshape(n, -1)
        gb2 = dXhat
        dA1 = (dXhat @ p.W2) * _act_prime(A1, p.activation)  # (n, h)
        gW1 = np.einsum("ni,nj->nij", dA1, X).reshape(n, -1)
        return np.concatenate([gW1, dA1, gW2, gb2], axis=1)
    dA1 = 2.0 * E * _act_prime(A1, p.activation)  # E here is Z - center
    gW1 = np.einsum("ni,nj->nij", dA1, X).reshape(n, -1)
    return np.concatenate([gW1, dA1], axis=1)


def per_sample_gradient(p: ModelParams, x) -> np.ndarray:
    x = as_vector(x, "x")
    return per_sample_gradients(p, x[None, :])[0]


def batch_loss_and_gradient(p: ModelParams, X) -> tuple[float, np.ndarray]:
    """Mean per-sample loss and its gradient (mean of per-sample grads)."""
    X = as_matrix(X, "X")
    if X.shape[0] == 0:
        raise ValueError("batch is empty")
    if X.shape[1] != p.d:
        raise ValueError(f"X has dimension {X.shape[1]}, model expects {p.d}")
    n = X.shape[0]
    losses, A1, Z, E = _forward(p, X)
    if p.kind == "ae":
        dXhat = 2.0 * _loss_scale(p) * E / n
        gW2 = dXhat.T @ Z
        gb2 = dXhat.sum(axis=0)
        dA1 = (dXhat @ p.W2) * _act_prime(A1, p.activation)
        gW1 = dA1.T @ X
        gb1 = dA1.sum(axis=0)
        g = np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])
    else:
        dA1 = 2.0 * E * _act_prime(A1, p.activation) / n
        gW1 = dA1.T @ X
        gb1 = dA1.sum(axis=0)
        g = np.concatenate([gW1.ravel(), gb1])
    return float(losses.mean()), g


def gd_step(p: ModelParams, g: np.ndarray, lr: float) -> ModelParams:
    """One step of theta <- theta - lr * g; the dsvdd center is untouched."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (p.n_params,):
        raise ValueError(f"gradient length {g.shape} != {p.n_params}")
    if lr < 0:
        raise ValueError("lr must be nonnegative")
    theta = p.to_vector() - lr * g
    if not np.all(np.isfinite(theta)):
        raise NumericError("parameters left the finite range during descent")
    return p.with_vector(theta)


def score_dataset(p: ModelParams, data) -> np.ndarray:
    """Per-row outlier scores (the per-sample loss; higher = more outlying)."""
    X = data if isinstance(data, np.ndarray) else data.X
    X = as_matrix(X, "X")
    if X.shape[1] != p.d:
        raise ValueError(f"X has dimension {X.shape[1]}, model expects {p.d}")
    losses, *_ = _forward(p, X)
    return losses


# --- checkpoint serialization -------------------------------------------
#
# Stable text format, one file per checkpoint:
#   line 1:  gradstop-checkpoint v1
#   line 2:  kind=<ae|dsvdd> d=<int> h=<int> activation=<name>
#            reduction=<mean|sum> epoch=<int>
#   then the canonical parameter vector, one %.17g value per line; for
#   dsvdd the h center values follow the trainable block.


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    p = ckpt.params
    values = p.to_vector()
    if p.kind == "dsvdd":
        values = np.concatenate([values, p.center])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("gradstop-checkpoint v1\n")
        fh.write(
            f"kind={p.kind} d={p.d} h={p.h} activation={p.activation} "
            f"reduction={p.loss_reduction} epoch={ckpt.epoch}\n"
        )
        for v in values:
            fh.write(f"{v:.17g}\n")


def load_checkpoint(path) -> Checkpoint:
    with open(path, "r", encoding="utf-8") as fh:
        magic = fh.readline().strip()
        if magic != "gradstop-checkpoint v1":
            raise ValueError(f"not a checkpoint file: {path}")
        meta = dict(kv.split("=") for kv in fh.readline().split())
        values = np.array([float(line) for line in fh], dtype=np.float64)
    kind, act = meta["kind"], meta["activation"]
    d, h, epoch = int(meta["d"]), int(meta["h"]), int(meta["epoch"])
    reduction = meta.get("reduction", "mean")
    if kind == "ae":
        template = ModelParams(
            kind="ae", W1=np.zeros((h, d)), b1=np.zeros(h),
            W2=np.zeros((d, h)), b2=np.zeros(d), activation=act,
            loss_reduction=reduction,
        )
        params = template.with_vector(values)
    else:
        template = ModelParams(
            kind="dsvdd", W1=np.zeros((h, d)), b1=np.zeros(h),
            center=np.zeros(h), activation=act,
        )
        n_train = template.n_params
        params = replace(
            template.with_vector(values[:n_train]), center=values[n_train:]
        )
    return Checkpoint(epoch=epoch, params=params)
