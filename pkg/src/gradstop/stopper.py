"""The early-stopping controller and the training loop it observes.

The controller is a pure observer: it watches the per-metric-epoch
indicator C_delta = C(G_last) - C(G_top) and the divergence D, keeps the
checkpoint of the last epoch it judged beneficial, and asks for a stop
once a full window of observations passes without one. It never touches
the parameter trajectory, so a run with the stopper and a vanilla run at
the same seed share every update bit for bit.

An epoch is beneficial when any of three clauses holds:

  1. downtrend_ratio(H, C_delta[t] - window_max) > r_down, with H the
     accumulated indicator change since the last beneficial epoch;
  2. C_delta[t] > t_cb (indicator clearly positive: keep training);
  3. |C_delta[t]| < t_cs (no evident disparity: optimistic default).

Windows count *observations*, not raw epochs: metrics are sampled every
``resample_interval`` epochs (default 10), and the default window sizes
were chosen under that cadence. After the loop, if the mean divergence
over the first ``w`` observation slots exceeds t_d, the untrained
parameters are returned instead (the regime where any training hurts).
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import NumericError
from .data import Dataset, sample_eval_batch
from .dynamics import (
    EpochRecord,
    ZeroSumError,
    auc,
    class_loss_means,
    cohesion,
    divergence,
    grad_sample,
)
from .model import (
    Checkpoint,
    Hyperparameters,
    ModelParams,
    batch_loss_and_gradient,
    gd_step,
    init_model,
    score_dataset,
)


class StopDecision(enum.Enum):
    CONTINUE = "continue"
    STOP = "stop"


class StopReason(enum.Enum):
    WINDOW_EXHAUSTED = "window_exhausted"
    EPOCHS_EXHAUSTED = "epochs_exhausted"


def downtrend_ratio(H: float, drop: float) -> float:
    """(C_delta[t] - window_max) / H with a guard at H ~ 0.

    ``drop`` is nonpositive by construction (the window includes the
    current observation). A flat history carries no downtrend evidence,
    so |H| below 1e-12 pins the ratio to 0 and the clause cannot fire.
    """
    if abs(H) < 1e-12:
        return 0.0
    return drop / H


@dataclass
class StopperState:
    config: Hyperparameters
    theta0: Checkpoint
    C_delta_series: list[float] = field(default_factory=list)
    D_series: list[float] = field(default_factory=list)
    H: float = 0.0
    best_epoch: int = 0
    best_checkpoint: Checkpoint = None
    best_obs: int = 0  # observation ordinal at which best was set
    stopped: Optional[StopReason] = None
    _last_epoch: int = -1

    def __post_init__(self):
        if self.best_checkpoint is None:
            self.best_checkpoint = self.theta0

    @property
    def n_obs(self) -> int:
        return len(self.C_delta_series)


def observe(
    st: StopperState, epoch: int, C_delta: float, D: float, ckpt: Checkpoint
) -> StopDecision:
    """Feed one metric-epoch observation; returns CONTINUE or STOP."""
    if epoch <= st._last_epoch:
        raise ValueError(
            f"epochs must be strictly increasing, got {epoch} after {st._last_epoch}"
        )
    st._last_epoch = epoch

    prev = st.C_delta_series[-1] if st.C_delta_series else 0.0
    st.C_delta_series.append(float(C_delta))
    st.D_series.append(float(D))
    st.H += C_delta - prev

    window = st.C_delta_series[-st.config.w :]
    drop = C_delta - max(window)
    beneficial = (
        downtrend_ratio(st.H, drop) > st.config.r_down
        or C_delta > st.config.t_cb
        or abs(C_delta) < st.config.t_cs
    )
    if beneficial:
        st.best_checkpoint = ckpt
        st.best_epoch = epoch
        st.best_obs = st.n_obs
        st.H = 0.0
        return StopDecision.CONTINUE
    if st.n_obs - st.best_obs >= st.config.w:
        st.stopped = StopReason.WINDOW_EXHAUSTED
        return StopDecision.STOP
    return StopDecision.CONTINUE


def finalize(st: StopperState, theta0: Checkpoint) -> Checkpoint:
    """Select the returned checkpoint after training ends.

    If the mean divergence over the first ``w`` observation slots (all
    of them when the run was shorter) exceeds t_d, the two gradient sets
    pulled apart from the start: the model told inliers and outliers
    apart before any training, and the untrained parameters are the
    safest choice. Otherwise the last beneficial checkpoint is returned.
    """
    if st.n_obs == 0:
        raise ValueError("finalize requires at least one observation")
    head = st.D_series[: st.config.w]
    if sum(head) / len(head) > st.config.t_d:
        return theta0
    return st.best_checkpoint


@dataclass(frozen=True)
class RunResult:
    scores: np.ndarray
    telemetry: list[EpochRecord]
    best_epoch: int
    stop_epoch: int
    stop_reason: StopReason
    selected: Checkpoint
    final: Checkpoint
    wall_time_s: float


def _telemetry_record(
    epoch: int,
    params: ModelParams,
    ds: Dataset,
    C_top: float,
    C_last: float,
    D: float,
    ties: str,
) -> EpochRecord:
    loss, _ = batch_loss_and_gradient(params, ds.X)
    rec_auc = mean_in = mean_out = None
    if ds.labels is not None:
        rec_auc = auc(score_dataset(params, ds.X), ds.labels, ties=ties)
        mean_in, mean_out = class_loss_means(params, ds)
    return EpochRecord(
        epoch=epoch,
        batch_loss=loss,
        C_top=C_top,
        C_last=C_last,
        C_delta=C_last - C_top,
        D=D,
        auc=rec_auc,
        mean_inlier_loss=mean_in,
        mean_outlier_loss=mean_out,
    )


def run_training(
    ds: Dataset,
    hp: Hyperparameters,
    kind: str,
    rng: np.random.Generator,
    use_stopper: bool = True,
    ties: str = "strict",
) -> RunResult:
    """Full-batch gradient descent with metric-epoch observation.

    With ``use_stopper=False`` the loop runs all ``hp.epochs`` epochs
    and returns the final parameters (vanilla mode); telemetry is still
    recorded so the two modes stay comparable row for row.
    """
    t_start = time.perf_counter()
    view = ds.train_view()
    n_eval = min(hp.n_eval, ds.n)
    warmup = view.X[: min(ds.n, 512)]
    params = init_model(
        kind, ds.d, hp.hidden, rng, activation=hp.activation,
        warmup_batch=warmup if kind == "dsvdd" else None,
        loss_reduction=hp.loss_reduction,
    )
    theta0 = Checkpoint(epoch=0, params=params)
    batch = sample_eval_batch(ds, n_eval, rng)

    st = StopperState(config=hp, theta0=theta0)
    telemetry: list[EpochRecord] = []
    stop_reason = StopReason.EPOCHS_EXHAUSTED
    stop_epoch = hp.epochs
    final_epoch = 0

    for t in range(1, hp.epochs + 1):
        loss, g = batch_loss_and_gradient(params, view.X)
        if not np.isfinite(loss):
            raise NumericError(f"batch loss became non-finite at epoch {t}")
        params = gd_step(params, g, hp.lr)
        final_epoch = t
        if t % hp.resample_interval != 0:
            continue

        top, last = grad_sample(params, batch, hp.k)
        C_top = cohesion(top)
        C_last = cohesion(last)
        try:
            D = divergence(top, last)
        except ZeroSumError:
            D = 0.0  # converged/dead set: no directional conflict evidence
        telemetry.append(
            _telemetry_record(t, params, ds, C_top, C_last, D, ties)
        )
        if not use_stopper:
            continue
        decision = observe(
            st, t, C_last - C_top, D, Checkpoint(epoch=t, params=params)
        )
        if decision is StopDecision.STOP:
            stop_reason = StopReason.WINDOW_EXHAUSTED
            stop_epoch = t
            break
    else:
        st.stopped = StopReason.EPOCHS_EXHAUSTED

    final = Checkpoint(epoch=final_epoch, params=params)
    if use_stopper:
        selected = finalize(st, theta0) if st.n_obs > 0 else st.best_checkpoint
    else:
        selected = final
        stop_epoch = final_epoch
    scores = score_dataset(selected.params, view.X)
    return RunResult(
        scores=scores,
        telemetry=telemetry,
        best_epoch=selected.epoch,
        stop_epoch=stop_epoch,
        stop_reason=stop_reason,
        selected=selected,
        final=final,
        wall_time_s=time.perf_counter() - t_start,
    )


def run_with_gradstop(
    ds: Dataset,
    hp: Hyperparameters,
    kind: str,
    rng: np.random.Generator,
    ties: str = "strict",
) -> tuple[np.ndarray, list[EpochRecord], int]:
    """Train with the stopper; returns (scores, telemetry, best_epoch)."""
    res = run_training(ds, hp, kind, rng, use_stopper=True, ties=ties)
    return res.scores, res.telemetry, res.best_epoch
