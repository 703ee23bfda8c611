import math

import numpy as np
import pytest

from gradstop.core import make_rng
from gradstop.data import Dataset
from gradstop.dynamics import GradientSet
from gradstop.model import (
    PRESETS,
    batch_loss_and_gradient,
    gd_step,
    init_model,
    per_sample_gradients,
    score_dataset,
)
from gradstop.theory import (
    StepSizeError,
    cohesion_bridge,
    probe_dynamics,
    threshold_mean_gap,
    threshold_sum_gap,
    verify_theorem,
)


def gset(rows):
    rows = np.asarray(rows, dtype=np.float64)
    return GradientSet(vectors=rows, source_indices=np.arange(rows.shape[0]))


def offset_gaussians(seed, n_in=180, n_out=20, d=6, c_in=0.6, tilt=0.45):
    """Two labeled Gaussian clusters on mildly aligned axes."""
    rng = make_rng(seed)
    dir1 = np.ones(d) / math.sqrt(d)
    alt = np.array([1.0, -1.0] * (d // 2))
    dir2 = alt / np.linalg.norm(alt)
    dir_out = tilt * dir1 + math.sqrt(1 - tilt**2) * dir2
    inl = c_in * dir1 + rng.normal(0, 0.15, size=(n_in, d))
    out = 0.35 * dir_out + rng.normal(0, 0.01, size=(n_out, d))
    X = np.vstack([inl, out])
    y = np.array([0] * n_in + [1] * n_out)
    return Dataset(X=X, labels=y, name="offset-gaussians"), rng


class TestThresholds:
    def test_mean_gap_values(self):
        assert threshold_mean_gap(0.0, 1.0) == pytest.approx(math.sqrt(3))
        assert threshold_mean_gap(1.0, 1.0) == pytest.approx(3.0)
        assert threshold_mean_gap(-1.0, 1.0) == pytest.approx(1.0)

    def test_sum_gap_values(self):
        assert threshold_sum_gap(0.0) == pytest.approx(math.sqrt(3))
        assert threshold_sum_gap(1.0) == pytest.approx(3.0)
        assert threshold_sum_gap(-1.0) == pytest.approx(1.0)

    def test_gap_thresholds_coincide_at_unit_ratio(self):
        # on a 1e-3 grid over [-1, 1], setting the class-count ratio to
        # one collapses the mean-gap bound onto the sum-gap bound
        grid = np.arange(-1.0, 1.0 + 1e-9, 1e-3)
        for c in grid:
            assert threshold_mean_gap(c, 1.0) == pytest.approx(
                threshold_sum_gap(c), abs=1e-12
            )

    def test_mean_gap_monotone_in_count_ratio(self):
        for c in np.linspace(0.0, 1.0, 21):
            vals = [threshold_mean_gap(c, R) for R in np.linspace(1, 200, 60)]
            assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


class TestProbeDynamics:
    def test_identical_single_points_are_symmetric(self):
        rng = make_rng(0)
        x = rng.normal(size=5)
        ds = Dataset(X=np.vstack([x, x]), labels=[0, 1])
        p = init_model("ae", 5, 4, rng)
        probe = probe_dynamics(p, ds, lr=1e-3)
        assert probe.theta_t == pytest.approx(0.0, abs=1e-7)
        assert probe.r_t == pytest.approx(1.0)
        assert probe.delta_mean == pytest.approx(0.0, abs=1e-15)

    def test_golden_values_at_init(self):
        # frozen from the seed-0 probe at the initial parameters
        ds, rng = offset_gaussians(0)
        p = init_model("ae", 6, 16, rng)
        probe = probe_dynamics(p, ds, lr=1e-4, epoch=0)
        assert probe.R == pytest.approx(9.0)
        assert probe.r_t == pytest.approx(14.380117078276207, rel=1e-9)
        assert probe.theta_t == pytest.approx(1.1351331332217949, rel=1e-9)
        assert probe.delta_mean == pytest.approx(0.0008561859848561047, rel=1e-9)
        assert probe.lr_used == pytest.approx(1e-4)

    def test_golden_values_blob_at_init(self):
        # contaminated blob at default settings, seed 0, untrained model:
        # the norm ratio is healthy but the class gradients are aligned
        # enough that the count ratio keeps the bound out of reach, and
        # rare outliers fit slower only once training opens the gap (the
        # mean-gap measure starts negative here)
        from gradstop.data import SyntheticConfig, gen_synthetic

        hp = PRESETS["ae"]
        rng = make_rng(0)
        ds = gen_synthetic(SyntheticConfig(n_inlier=990, n_outlier=10, d=10), rng)
        p = init_model("ae", ds.d, hp.hidden, rng, activation=hp.activation)
        probe = probe_dynamics(p, ds, hp.lr / ds.n, epoch=0)
        assert probe.R == pytest.approx(99.0)
        assert probe.r_t == pytest.approx(20.866187567917283, rel=1e-9)
        assert probe.theta_t == pytest.approx(0.8642086415116789, rel=1e-9)
        assert probe.delta_mean == pytest.approx(-0.006979947148738129, rel=1e-9)
        assert probe.lr_used == pytest.approx(5e-06)
        bound = threshold_mean_gap(math.cos(probe.theta_t), probe.R)
        assert probe.r_t < bound  # below the bound: theorem makes no claim

    def test_delta_sum_recomputation_oracle(self):
        # redundant recomputation from raw per-sample losses
        ds, rng = offset_gaussians(3)
        p = init_model("ae", 6, 8, rng)
        probe = probe_dynamics(p, ds, lr=1e-4)
        mask_out = ds.labels == 1
        before = score_dataset(p, ds.X)
        stepped = p.with_vector(
            p.to_vector() - probe.lr_used * (probe.grad_in + probe.grad_out)
        )
        after = score_dataset(stepped, ds.X)
        n_in = int((~mask_out).sum())
        n_out = int(mask_out.sum())
        drop_in = (before[~mask_out] - after[~mask_out]).mean()
        drop_out = (before[mask_out] - after[mask_out]).mean()
        expected_sum = n_in * drop_in - n_out * drop_out
        assert probe.delta_sum == pytest.approx(expected_sum, abs=1e-10)
        assert probe.delta_mean == pytest.approx(drop_in - drop_out, abs=1e-12)

    def test_lr_halved_until_both_classes_decrease(self):
        ds, rng = offset_gaussians(4)
        p = init_model("ae", 6, 8, rng)
        probe = probe_dynamics(p, ds, lr=10.0)  # absurdly coarse start
        assert probe.lr_used < 10.0

    def test_step_size_error_when_no_descent_exists(self):
        # antiparallel class gradients: any step along the sum raises one
        # class's loss, so the halving search must give up
        rng = make_rng(5)
        d = 6
        direction = np.ones(d) / math.sqrt(d)
        inl = 0.5 * direction + rng.normal(0, 0.01, size=(40, d))
        out = -0.5 * direction + rng.normal(0, 0.01, size=(10, d))
        ds = Dataset(
            X=np.vstack([inl, out]), labels=[0] * 40 + [1] * 10
        )
        p = init_model("ae", d, 8, rng)
        with pytest.raises(StepSizeError):
            probe_dynamics(p, ds, lr=1e-3)

    def test_requires_labels(self):
        rng = make_rng(6)
        ds = Dataset(X=rng.normal(size=(10, 4)))
        p = init_model("ae", 4, 3, rng)
        with pytest.raises(ValueError):
            probe_dynamics(p, ds, lr=1e-3)


class TestVerifyTheorem:
    def test_probes_below_bound_are_not_counted(self):
        ds, rng = offset_gaussians(7)
        p = init_model("ae", 6, 8, rng)
        probe = probe_dynamics(p, ds, lr=1e-4)
        report = verify_theorem([probe])
        assert report.n_condition_met == 1  # this geometry clears the bound
        low = probe.__class__(**{**vars(probe), "r_t": 0.5})
        report2 = verify_theorem([low])
        assert report2.n_condition_met == 0
        assert report2.violations == []

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            verify_theorem([])

    def test_condition_met_probes_have_positive_gap(self):
        probes = []
        for seed in range(4):
            ds, rng = offset_gaussians(seed)
            p = init_model("ae", 6, 16, rng)
            hp = PRESETS["ae"]
            probe_lr = hp.lr / ds.n
            for t in range(1, 31):
                _, g = batch_loss_and_gradient(p, ds.X)
                p = gd_step(p, g, hp.lr)
                if t % 10 == 0:
                    probes.append(probe_dynamics(p, ds, probe_lr, epoch=t))
        report = verify_theorem(probes)
        assert report.n_condition_met > 0
        assert report.violations == []
        assert report.n_gap_positive_given_condition == report.n_condition_met


class TestCohesionBridge:
    def test_singleton_identity_exact(self):
        g = np.array([[3.0, 4.0]])
        h = np.array([[0.0, 2.0]])
        c_in, c_out, sn_in, sn_out = cohesion_bridge(gset(g), gset(h))
        assert c_in == 1.0 and c_out == 1.0
        r = np.linalg.norm(g.sum(axis=0)) / np.linalg.norm(h.sum(axis=0))
        assert math.log(r) == pytest.approx(
            math.log(c_in) - math.log(c_out) + math.log(sn_in / sn_out)
        )

    def test_identity_on_random_sets(self):
        rng = make_rng(8)
        for _ in range(100):
            a = rng.normal(size=(int(rng.integers(2, 9)), 7))
            b = rng.normal(size=(int(rng.integers(2, 9)), 7))
            c_in, c_out, sn_in, sn_out = cohesion_bridge(gset(a), gset(b))
            r = np.linalg.norm(a.sum(axis=0)) / np.linalg.norm(b.sum(axis=0))
            lhs = math.log(r)
            rhs = math.log(c_in) - math.log(c_out) + math.log(sn_in / sn_out)
            assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_cancelling_set_rejected(self):
        a = np.array([[1.0, 0.0], [2.0, 0.0]])
        b = np.array([[1.0, 0.0], [-1.0, 0.0]])
        with pytest.raises(ValueError):
            cohesion_bridge(gset(a), gset(b))


class TestClassSummedGradients:
    def test_probe_gradients_match_per_sample_sums(self):
        ds, rng = offset_gaussians(9)
        p = init_model("ae", 6, 8, rng)
        probe = probe_dynamics(p, ds, lr=1e-4)
        G = per_sample_gradients(p, ds.X)
        np.testing.assert_allclose(
            probe.grad_in, G[ds.labels == 0].sum(axis=0), atol=1e-12
        )
        np.testing.assert_allclose(
            probe.grad_out, G[ds.labels == 1].sum(axis=0), atol=1e-12
        )
        assert probe.norm_in == pytest.approx(np.linalg.norm(probe.grad_in))
        assert probe.r_t == pytest.approx(probe.norm_in / probe.norm_out)
