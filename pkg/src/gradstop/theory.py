"""Empirical validation of the inlier-priority sufficient condition.

At a training snapshot, class-summed gradients over the labeled inliers
and outliers give three measurable quantities: the norm ratio r_t, the
angle theta_t between the two class gradients, and the class-count
ratio R. When r_t clears a closed-form threshold in (cos theta_t, R),
the per-class mean loss of inliers must drop faster than that of
outliers across one sufficiently small descent step; ``probe_dynamics``
realizes such a step and measures the gap directly, and
``verify_theorem`` tallies the implication over many probes.

The smoothness constant behind the derivation is never estimated: the
checkable content at a realized step needs only measured quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import angle_between
from .data import Dataset
from .dynamics import GradientSet, cohesion
from .model import ModelParams, per_sample_gradients, score_dataset


class StepSizeError(RuntimeError):
    """No step size small enough to decrease both class losses."""


def threshold_mean_gap(cos_theta: float, R: float) -> float:
    """Norm-ratio bound above which the mean-loss gap must be positive."""
    return cos_theta * R + math.sqrt(cos_theta**2 * R**2 + 2.0 * R + 1.0)


def threshold_sum_gap(cos_theta: float) -> float:
    """Norm-ratio bound for the summed-loss (class-total) gap."""
    return math.sqrt(cos_theta**2 + 3.0) + cos_theta


@dataclass(frozen=True)
class DynamicsProbe:
    epoch: int
    grad_in: np.ndarray
    grad_out: np.ndarray
    norm_in: float
    norm_out: float
    r_t: float
    theta_t: float
    R: float
    delta_sum: float
    delta_mean: float
    lr_used: float


@dataclass(frozen=True)
class TheoremReport:
    probes: list[DynamicsProbe]
    n_condition_met: int
    n_gap_positive_given_condition: int
    violations: list[int]

    def to_dict(self) -> dict:
        return {
            "n_probes": len(self.probes),
            "n_condition_met": self.n_condition_met,
            "n_gap_positive_given_condition": self.n_gap_positive_given_condition,
            "violations": list(self.violations),
        }


def probe_dynamics(
    p: ModelParams, ds: Dataset, lr: float, epoch: int = 0, max_halvings: int = 40
) -> DynamicsProbe:
    """Measure the loss-decreasing-speed gap across one descent step.

    The step uses the gradient summed over all samples. If either
    class-summed loss fails to decrease, the step was too coarse: the
    rate is halved and the step retried, up to ``max_halvings`` times.
    """
    if ds.labels is None:
        raise ValueError("dynamics probes require labels")
    if lr <= 0:
        raise ValueError("lr must be positive")
    mask_out = ds.labels == 1
    n_out = int(mask_out.sum())
    n_in = int(ds.n - n_out)
    if n_in == 0 or n_out == 0:
        raise ValueError("both classes must be non-empty")

    G = per_sample_gradients(p, ds.X)
    grad_in = G[~mask_out].sum(axis=0)
    grad_out = G[mask_out].sum(axis=0)
    norm_in = float(np.linalg.norm(grad_in))
    norm_out = float(np.linalg.norm(grad_out))
    if norm_in == 0.0 or norm_out == 0.0:
        raise ValueError("a class-summed gradient vanished; probe undefined")
    theta = angle_between(grad_in, grad_out)
    grad_total = grad_in + grad_out

    losses = score_dataset(p, ds.X)
    sum_in_before = float(losses[~mask_out].sum())
    sum_out_before = float(losses[mask_out].sum())

    theta_vec = p.to_vector()
    step_lr = float(lr)
    for _ in range(max_halvings + 1):
        stepped = p.with_vector(theta_vec - step_lr * grad_total)
        losses_after = score_dataset(stepped, ds.X)
        sum_in_after = float(losses_after[~mask_out].sum())
        sum_out_after = float(losses_after[mask_out].sum())
        if sum_in_after < sum_in_before and sum_out_after < sum_out_before:
            break
        step_lr *= 0.5
    else:
        raise StepSizeError(
            f"no decreasing step after {max_halvings} halvings from lr={lr}"
        )

    delta_sum = (sum_in_before - sum_in_after) - (sum_out_before - sum_out_after)
    delta_mean = (sum_in_before - sum_in_after) / n_in - (
        sum_out_before - sum_out_after
    ) / n_out
    return DynamicsProbe(
        epoch=epoch,
        grad_in=grad_in,
        grad_out=grad_out,
        norm_in=norm_in,
        norm_out=norm_out,
        r_t=norm_in / norm_out,
        theta_t=theta,
        R=n_in / n_out,
        delta_sum=delta_sum,
        delta_mean=delta_mean,
        lr_used=step_lr,
    )


def verify_theorem(probes: list[DynamicsProbe]) -> TheoremReport:
    """Check delta_mean > 0 on every probe whose r_t clears the bound.

    The implication is one-directional: probes below the bound are not
    counted either way.
    """
    if not probes:
        raise ValueError("no probes to verify")
    n_met = 0
    n_pos = 0
    violations: list[int] = []
    for i, pr in enumerate(probes):
        bound = threshold_mean_gap(math.cos(pr.theta_t), pr.R)
        if pr.r_t > bound:
            n_met += 1
            if pr.delta_mean > 0:
                n_pos += 1
            else:
                violations.append(i)
    return TheoremReport(
        probes=probes,
        n_condition_met=n_met,
        n_gap_positive_given_condition=n_pos,
        violations=violations,
    )


def cohesion_bridge(
    grad_in_set: GradientSet, grad_out_set: GradientSet
) -> tuple[float, float, float, float]:
    """Inputs of the log norm-ratio decomposition.

    Returns (C_in, C_out, sum_norm_in, sum_norm_out). By the definition
    of cohesion, ||sum g|| = C(G) * sum ||g||, so

        log r = log C_in - log C_out + log(sum_norm_in / sum_norm_out)

    holds exactly, where r is the ratio of the summed-gradient norms.
    """
    c_in = cohesion(grad_in_set)
    c_out = cohesion(grad_out_set)
    sn_in = float(np.linalg.norm(grad_in_set.vectors, axis=1).sum())
    sn_out = float(np.linalg.norm(grad_out_set.vectors, axis=1).sum())
    if c_in * sn_in == 0.0 or c_out * sn_out == 0.0:
        raise ValueError("a gradient set sums to zero; the ratio diverges")
    return c_in, c_out, sn_in, sn_out
