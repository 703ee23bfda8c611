"""Batch experiment runner.

Subcommands:

* ``run``     train per seed and mode (vanilla, gradstop or both), score
              the training set, and write telemetry CSV, scores and
              summary JSON per run plus an aggregate summary.
* ``verify``  probe class-gradient dynamics at every metric epoch and
              report the condition-vs-gap tally as JSON plus a scatter CSV.
* ``presets`` print the named hyperparameter profiles.

Config files are INI-style, flat key = value under [dataset], [model],
[stopper] and [run] sections; see the README for the full key list.
Exit codes: 0 success, 1 config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .core import NumericError, make_rng
from .data import (
    DataError,
    Dataset,
    SyntheticConfig,
    downsample,
    gen_synthetic,
    load_csv,
    standardize,
)
from .dynamics import TELEMETRY_HEADER, auc, telemetry_row
from .model import (
    KINDS,
    PRESETS,
    Hyperparameters,
    batch_loss_and_gradient,
    gd_step,
    init_model,
    score_dataset,
)
from .stopper import RunResult, run_training
from .theory import (
    DynamicsProbe,
    StepSizeError,
    TheoremReport,
    probe_dynamics,
    threshold_mean_gap,
    verify_theorem,
)

OUT_ENV_VAR = "GRADSTOP_OUT"


class ConfigError(Exception):
    """Bad or missing configuration value; message names the location."""


@dataclass(frozen=True)
class RunConfig:
    kind: str
    hp: Hyperparameters
    seeds: tuple[int, ...]
    modes: tuple[str, ...]
    out_dir: Path
    auc_ties: str = "strict"
    csv_path: Optional[str] = None
    label_column: Optional[str] = None
    synthetic: Optional[SyntheticConfig] = None
    apply_standardize: bool = False
    downsample_to: int = 10_000

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not self.modes:
            raise ConfigError("at least one mode is required")
        if (self.csv_path is None) == (self.synthetic is None):
            raise ConfigError("exactly one dataset source (csv or synthetic)")


@dataclass(frozen=True)
class RunRow:
    seed: int
    mode: str
    auc_final: Optional[float]
    auc_best_epoch: Optional[float]
    best_epoch: int
    stop_epoch: int
    stop_reason: str
    wall_time_s: float


@dataclass(frozen=True)
class RunSummary:
    dataset: str
    model: str
    rows: list[RunRow] = field(default_factory=list)

    def aggregates(self) -> dict:
        out: dict[str, dict[str, Optional[float]]] = {}
        for mode in sorted({r.mode for r in self.rows}):
            aucs_f = [r.auc_final for r in self.rows if r.mode == mode]
            aucs_b = [r.auc_best_epoch for r in self.rows if r.mode == mode]
            agg = {}
            for label, vals in (("auc_final", aucs_f), ("auc_best", aucs_b)):
                if any(v is None for v in vals):
                    agg[f"{label}_mean"] = None
                    agg[f"{label}_std"] = None
                else:
                    agg[f"{label}_mean"] = float(np.mean(vals))
                    agg[f"{label}_std"] = float(np.std(vals))
            out[mode] = agg
        return out


def _get(cp: configparser.ConfigParser, section: str, key: str, default=None):
    if cp.has_option(section, key):
        return cp.get(section, key)
    return default


def _get_float(cp, section, key, default=None):
    raw = _get(cp, section, key)
    if raw is None:
        return default
    raw = raw.strip().lower()
    if raw in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}")


def _get_int(cp, section, key, default=None):
    raw = _get(cp, section, key)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}")


def _get_bool(cp, section, key, default=False):
    raw = _get(cp, section, key)
    if raw is None:
        return default
    raw = raw.strip().lower()
    if raw in ("1", "true", "yes", "on"):
        return True
    if raw in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {raw!r}")


def load_config(path) -> RunConfig:
    """Parse an INI config file into a validated RunConfig."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}")

    kind = _get(cp, "model", "kind", "ae").strip().lower()
    if kind not in KINDS:
        raise ConfigError(f"[model] kind must be one of {KINDS}, got {kind!r}")

    preset_name = _get(cp, "stopper", "preset", kind if kind in PRESETS else "ae")
    if preset_name not in PRESETS:
        raise ConfigError(
            f"[stopper] preset must be one of {sorted(PRESETS)}, got {preset_name!r}"
        )
    hp = PRESETS[preset_name]
    overrides = {}
    for key, getter in (
        ("epochs", _get_int), ("lr", _get_float), ("k", _get_int),
        ("t_cs", _get_float), ("t_cb", _get_float), ("t_d", _get_float),
        ("w", _get_int), ("r_down", _get_float), ("n_eval", _get_int),
        ("resample_interval", _get_int),
    ):
        val = getter(cp, "stopper", key)
        if val is not None:
            overrides[key] = val
    hidden = _get_int(cp, "model", "hidden")
    if hidden is not None:
        overrides["hidden"] = hidden
    activation = _get(cp, "model", "activation")
    if activation is not None:
        overrides["activation"] = activation.strip().lower()
    reduction = _get(cp, "model", "loss_reduction")
    if reduction is not None:
        overrides["loss_reduction"] = reduction.strip().lower()
    try:
        hp = replace(hp, **overrides)
    except ValueError as exc:
        raise ConfigError(f"[stopper]: {exc}")

    source = _get(cp, "dataset", "source")
    if source is None:
        raise ConfigError("[dataset] source is required (csv or synthetic)")
    source = source.strip().lower()
    csv_path = label_column = synthetic = None
    if source == "csv":
        csv_path = _get(cp, "dataset", "path")
        if csv_path is None:
            raise ConfigError("[dataset] path is required for source = csv")
        label_column = _get(cp, "dataset", "label_column")
    elif source == "synthetic":
        try:
            synthetic = SyntheticConfig(
                n_inlier=_get_int(cp, "dataset", "n_inlier", 990),
                n_outlier=_get_int(cp, "dataset", "n_outlier", 10),
                d=_get_int(cp, "dataset", "dim", 10),
                scenario=_get(cp, "dataset", "scenario", "blob_uniform").strip(),
                inlier_spread=_get_float(cp, "dataset", "inlier_spread", 1.0),
                outlier_spread=_get_float(cp, "dataset", "outlier_spread", math.nan),
                outlier_offset=_get_float(cp, "dataset", "outlier_offset", math.nan),
            )
        except DataError as exc:
            raise ConfigError(f"[dataset]: {exc}")
    else:
        raise ConfigError(f"[dataset] source must be csv or synthetic, got {source!r}")

    seeds_raw = _get(cp, "run", "seeds", "0")
    try:
        seeds = tuple(int(s) for s in seeds_raw.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"[run] seeds: expected integers, got {seeds_raw!r}")
    if not seeds:
        raise ConfigError("[run] seeds must not be empty")

    modes_raw = _get(cp, "run", "modes", "both").strip().lower()
    modes = _parse_modes(modes_raw)

    ties = _get(cp, "run", "auc_ties", "strict").strip().lower()
    if ties not in ("strict", "half"):
        raise ConfigError(f"[run] auc_ties must be strict or half, got {ties!r}")

    out_dir = _get(cp, "run", "out") or os.environ.get(OUT_ENV_VAR, "runs")

    return RunConfig(
        kind=kind,
        hp=hp,
        seeds=seeds,
        modes=modes,
        out_dir=Path(out_dir),
        auc_ties=ties,
        csv_path=csv_path,
        label_column=label_column,
        synthetic=synthetic,
        apply_standardize=_get_bool(cp, "dataset", "standardize", False),
        downsample_to=_get_int(cp, "dataset", "downsample_to", 10_000),
    )


def _parse_modes(raw: str) -> tuple[str, ...]:
    if raw == "both":
        return ("vanilla", "gradstop")
    modes = tuple(m.strip() for m in raw.replace(",", " ").split())
    for m in modes:
        if m not in ("vanilla", "gradstop"):
            raise ConfigError(f"mode must be vanilla or gradstop, got {m!r}")
    return modes


def build_dataset(cfg: RunConfig, rng: np.random.Generator) -> Dataset:
    if cfg.synthetic is not None:
        ds = gen_synthetic(cfg.synthetic, rng)
    else:
        ds = load_csv(cfg.csv_path, cfg.label_column)
    if cfg.apply_standardize:
        ds = standardize(ds)
    ds = downsample(ds, cfg.downsample_to, rng)
    return ds


def _run_tag(cfg: RunConfig, ds_name: str, mode: str, seed: int) -> str:
    return f"{ds_name}_{cfg.kind}_{mode}_seed{seed}"


def _write_run_files(
    cfg: RunConfig, ds_name: str, mode: str, seed: int, result: RunResult,
    auc_best: Optional[float], auc_final: Optional[float],
) -> None:
    tag = _run_tag(cfg, ds_name, mode, seed)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)

    with open(out / f"{tag}_telemetry.csv", "w", encoding="utf-8") as fh:
        fh.write(TELEMETRY_HEADER + "\n")
        for rec in result.telemetry:
            fh.write(telemetry_row(rec) + "\n")

    with open(out / f"{tag}_scores.txt", "w", encoding="utf-8") as fh:
        for s in result.scores:
            fh.write(f"{s:.17g}\n")

    summary = {
        "dataset": ds_name,
        "model": cfg.kind,
        "seed": seed,
        "best_epoch": result.best_epoch,
        "stop_epoch": result.stop_epoch,
        "stop_reason": result.stop_reason.value,
        "auc_best": auc_best,
        "auc_final": auc_final,
        "hyperparameters": {
            k: (str(v) if isinstance(v, float) and math.isinf(v) else v)
            for k, v in vars(cfg.hp).items()
        },
    }
    with open(out / f"{tag}_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(cfg: RunConfig) -> RunSummary:
    """Execute every seed x mode combination and write artifacts."""
    ds_name = None
    rows: list[RunRow] = []
    for seed in cfg.seeds:
        for mode in cfg.modes:
            rng = make_rng(seed)
            ds = build_dataset(cfg, rng)
            ds_name = ds.name
            result = run_training(
                ds, cfg.hp, cfg.kind, rng,
                use_stopper=(mode == "gradstop"), ties=cfg.auc_ties,
            )
            auc_best = auc_final = None
            if ds.labels is not None:
                auc_best = auc(result.scores, ds.labels, ties=cfg.auc_ties)
                auc_final = auc(
                    score_dataset(result.final.params, ds.X),
                    ds.labels, ties=cfg.auc_ties,
                )
            _write_run_files(cfg, ds.name, mode, seed, result, auc_best, auc_final)
            rows.append(
                RunRow(
                    seed=seed, mode=mode,
                    auc_final=auc_final, auc_best_epoch=auc_best,
                    best_epoch=result.best_epoch, stop_epoch=result.stop_epoch,
                    stop_reason=result.stop_reason.value,
                    wall_time_s=result.wall_time_s,
                )
            )
    summary = RunSummary(dataset=ds_name, model=cfg.kind, rows=rows)
    _write_aggregate(cfg, summary)
    return summary


def _write_aggregate(cfg: RunConfig, summary: RunSummary) -> None:
    payload = {
        "dataset": summary.dataset,
        "model": summary.model,
        "rows": [
            {
                "seed": r.seed, "mode": r.mode,
                "auc_final": r.auc_final, "auc_best": r.auc_best_epoch,
                "best_epoch": r.best_epoch, "stop_epoch": r.stop_epoch,
                "stop_reason": r.stop_reason,
            }
            for r in summary.rows
        ],
        "aggregates": summary.aggregates(),
    }
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    with open(cfg.out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def verify(cfg: RunConfig) -> TheoremReport:
    """Probe class-gradient dynamics at every metric epoch, all seeds."""
    probes: list[DynamicsProbe] = []
    n_step_failures = 0
    ds_name = None
    for seed in cfg.seeds:
        rng = make_rng(seed)
        ds = build_dataset(cfg, rng)
        ds_name = ds.name
        if ds.labels is None:
            raise DataError(
                "theory probes require labels; provide a labeled CSV or a "
                "synthetic dataset"
            )
        params = init_model(
            cfg.kind, ds.d, cfg.hp.hidden, rng, activation=cfg.hp.activation,
            warmup_batch=ds.X[: min(ds.n, 512)] if cfg.kind == "dsvdd" else None,
            loss_reduction=cfg.hp.loss_reduction,
        )
        probe_lr = cfg.hp.lr / ds.n  # summed-gradient step of comparable size
        for t in range(1, cfg.hp.epochs + 1):
            _, g = batch_loss_and_gradient(params, ds.X)
            params = gd_step(params, g, cfg.hp.lr)
            if t % cfg.hp.resample_interval != 0:
                continue
            try:
                probes.append(probe_dynamics(params, ds, probe_lr, epoch=t))
            except StepSizeError:
                n_step_failures += 1

    if not probes:
        raise NumericError("all probes failed the decreasing-step search")
    report = verify_theorem(probes)

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    payload = report.to_dict()
    payload["dataset"] = ds_name
    payload["model"] = cfg.kind
    payload["n_step_failures"] = n_step_failures
    with open(cfg.out_dir / "theorem_report.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(cfg.out_dir / "theorem_scatter.csv", "w", encoding="utf-8") as fh:
        fh.write("r_t,threshold,theta_t,R,delta_mean,condition_met\n")
        for pr in report.probes:
            bound = threshold_mean_gap(math.cos(pr.theta_t), pr.R)
            fh.write(
                f"{pr.r_t:.17g},{bound:.17g},{pr.theta_t:.17g},"
                f"{pr.R:.17g},{pr.delta_mean:.17g},{int(pr.r_t > bound)}\n"
            )
    return report


def _apply_cli_overrides(cfg: RunConfig, args) -> RunConfig:
    updates = {}
    if args.seed:
        try:
            updates["seeds"] = tuple(int(s) for s in args.seed.split(","))
        except ValueError:
            raise ConfigError(f"--seed: expected integers, got {args.seed!r}")
    if args.out:
        updates["out_dir"] = Path(args.out)
    if args.auc_ties:
        updates["auc_ties"] = args.auc_ties
    if getattr(args, "mode", None):
        updates["modes"] = _parse_modes(args.mode)
    return replace(cfg, **updates) if updates else cfg


def _print_presets() -> None:
    cols = ("epochs", "lr", "k", "t_cs", "t_cb", "t_d", "w", "r_down")
    print(f"{'profile':<8}" + "".join(f"{c:>10}" for c in cols))
    for name, hp in PRESETS.items():
        vals = [getattr(hp, c) for c in cols]
        print(
            f"{name:<8}"
            + "".join(f"{('inf' if v == math.inf else v):>10}" for v in vals)
        )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gradstop",
        description="Label-free early stopping experiments for deep "
        "unsupervised outlier detection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train and score per seed and mode")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", help="comma-separated seed list override")
    p_run.add_argument("--out", help="output directory override")
    p_run.add_argument("--auc-ties", choices=("strict", "half"), dest="auc_ties")
    p_run.add_argument("--mode", choices=("vanilla", "gradstop", "both"))

    p_ver = sub.add_parser("verify", help="run inlier-priority probes")
    p_ver.add_argument("--config", required=True)
    p_ver.add_argument("--seed", help="comma-separated seed list override")
    p_ver.add_argument("--out", help="output directory override")
    p_ver.add_argument("--auc-ties", choices=("strict", "half"), dest="auc_ties")

    sub.add_parser("presets", help="print the named hyperparameter profiles")

    args = parser.parse_args(argv)
    try:
        if args.command == "presets":
            _print_presets()
            return 0
        cfg = _apply_cli_overrides(load_config(args.config), args)
        if args.command == "run":
            summary = run(cfg)
            for row in summary.rows:
                auc_txt = (
                    f"auc_best={row.auc_best_epoch:.4f} "
                    f"auc_final={row.auc_final:.4f} "
                    if row.auc_final is not None
                    else ""
                )
                print(
                    f"seed={row.seed} mode={row.mode:<8} {auc_txt}"
                    f"best_epoch={row.best_epoch} stop_epoch={row.stop_epoch} "
                    f"({row.stop_reason}) {row.wall_time_s:.2f}s"
                )
            for mode, agg in summary.aggregates().items():
                if agg["auc_best_mean"] is not None:
                    print(
                        f"{mode}: auc_best {agg['auc_best_mean']:.4f}"
                        f" +- {agg['auc_best_std']:.4f}, auc_final"
                        f" {agg['auc_final_mean']:.4f} +- {agg['auc_final_std']:.4f}"
                    )
            return 0
        report = verify(cfg)
        print(
            f"probes={len(report.probes)} condition_met={report.n_condition_met} "
            f"gap_positive={report.n_gap_positive_given_condition} "
            f"violations={len(report.violations)}"
        )
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, StepSizeError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
