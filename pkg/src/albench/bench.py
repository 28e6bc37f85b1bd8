"""Experiment orchestration: config, HP sweep, AL loop, aggregation, reports.

An experiment is a pure function of (config, seeds): the hyperparameter
sweep runs once on the starting budget, every seed then executes the
retrain-from-scratch acquisition loop with streams derived from its seed,
and the report step aggregates the per-seed run records. Reruns produce
byte-identical JSON/CSV artifacts, also under parallel seed execution.
"""

from __future__ import annotations

import concurrent.futures
import itertools
import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import (
    LongTailSpec,
    RegimeTable,
    apply_longtail,
    generate_mixture,
    initial_label_strategy,
    load_csv,
    longtail_counts,
    make_splits,
    random_mixture_spec,
    regime_for,
    stratified_subset,
    subsample_pool,
)
from .domain import (
    ConfusionMatrix,
    DataSplits,
    Dataset,
    LabelRegime,
    LabelState,
    RunRecord,
    RunRow,
)
from .metrics import METRIC_NAMES, accuracy, mean_recall, metric_fn
from .model import (
    Hyperparams,
    TrainedModel,
    TrainingStrategy,
    embed,
    fit,
    predict_mc,
)
from .posterior import JointConfig, mean_predictive
from .query import QM_NAMES, QueryContext, select_queries
from .seeding import derive_seed, spawn_rng

__all__ = [
    "ExperimentConfig",
    "AggregateCurve",
    "ComparisonReport",
    "accuracy",
    "mean_recall",
    "parse_config_text",
    "load_config",
    "build_dataset",
    "hp_grid",
    "hp_sweep",
    "run_al_loop",
    "run_experiment",
    "aggregate",
    "compare_to_random",
    "load_records",
    "write_report_csv",
    "weighting_ablation",
    "directional_study_config",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one AL experiment end to end."""

    dataset_kind: str = "mixture"
    dataset_path: str | None = None
    dataset_label_column: str = "label"
    dataset_classes: int = 5
    dataset_dim: int = 8
    dataset_per_class: int = 200
    dataset_separation: float = 2.0
    dataset_cov: float = 1.0
    dataset_seed: int = 0
    dataset_name: str = "mixture"
    dataset_oracle_noise: float = 0.25
    longtail_rho: float | None = None
    longtail_nmax: int | None = None
    splits_test: float = 0.25
    splits_val: float = 0.15
    regime_name: str = "low"
    regime_override_start: int | None = None
    regime_override_query: int | None = None
    regime_override_steps: int | None = None
    regime_override_val: int | None = None
    qm_name: str = "random"
    joint_mode: str = "exact"
    joint_max_exact: int = 100_000
    joint_m: int = 8192
    lr_grid: tuple[float, ...] = (0.1, 0.01)
    wd_grid: tuple[float, ...] = (5e-3, 5e-4)
    noise_grid: tuple[float, ...] = (0.0, 0.1)
    hidden_sizes: tuple[int, ...] = (64, 32)
    dropout_p: float = 0.5
    epochs: int = 40
    batch_size: int = 32
    momentum: float = 0.9
    loss_weighting: str = "uniform"
    upsample_target: int = 2000
    strategy_kind: str = "from_scratch"
    mc_samples: int = 50
    label_strategy: str = "balanced"
    pool_subsample: int | None = None
    seeds: tuple[int, ...] = (0,)
    metric: str = "accuracy"
    out_dir: str = "runs"
    timing: bool = False

    def __post_init__(self) -> None:
        if self.qm_name not in QM_NAMES:
            raise ValueError(f"qm.name must be one of {QM_NAMES}, got {self.qm_name!r}")
        if self.metric not in METRIC_NAMES:
            raise ValueError(f"metric must be one of {METRIC_NAMES}")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if self.dataset_kind not in ("mixture", "csv"):
            raise ValueError("dataset.kind must be 'mixture' or 'csv'")
        if self.dataset_kind == "csv" and not self.dataset_path:
            raise ValueError("dataset.path required for csv datasets")
        if self.loss_weighting == "balanced" and self.metric != "mean_recall":
            raise ValueError("loss_weighting=balanced requires metric=mean_recall")
        if self.mc_samples < 1:
            raise ValueError("mc.samples must be >= 1")
        for name in ("lr_grid", "wd_grid", "noise_grid", "hidden_sizes", "seeds"):
            object.__setattr__(self, name, tuple(getattr(self, name)))


# canonical config keys <-> ExperimentConfig fields
_KEY_MAP = {
    "dataset.kind": "dataset_kind",
    "dataset.path": "dataset_path",
    "dataset.label_column": "dataset_label_column",
    "dataset.classes": "dataset_classes",
    "dataset.dim": "dataset_dim",
    "dataset.per_class": "dataset_per_class",
    "dataset.separation": "dataset_separation",
    "dataset.cov": "dataset_cov",
    "dataset.seed": "dataset_seed",
    "dataset.name": "dataset_name",
    "dataset.oracle_noise": "dataset_oracle_noise",
    "dataset.longtail_rho": "longtail_rho",
    "dataset.longtail_nmax": "longtail_nmax",
    "splits.test": "splits_test",
    "splits.val": "splits_val",
    "regime.name": "regime_name",
    "regime.override.start": "regime_override_start",
    "regime.override.query": "regime_override_query",
    "regime.override.steps": "regime_override_steps",
    "regime.override.val": "regime_override_val",
    "qm.name": "qm_name",
    "qm.joint.mode": "joint_mode",
    "qm.joint.max_exact": "joint_max_exact",
    "qm.joint.m": "joint_m",
    "model.lr": "lr_grid",
    "model.wd": "wd_grid",
    "model.noise": "noise_grid",
    "model.hidden": "hidden_sizes",
    "model.dropout": "dropout_p",
    "model.epochs": "epochs",
    "model.batch": "batch_size",
    "model.momentum": "momentum",
    "model.loss_weighting": "loss_weighting",
    "model.upsample": "upsample_target",
    "strategy.kind": "strategy_kind",
    "mc.samples": "mc_samples",
    "labels.strategy": "label_strategy",
    "pool.subsample": "pool_subsample",
    "seeds": "seeds",
    "metric": "metric",
    "out": "out_dir",
    "timing": "timing",
}

_INT_FIELDS = {
    "dataset_classes",
    "dataset_dim",
    "dataset_per_class",
    "dataset_seed",
    "longtail_nmax",
    "regime_override_start",
    "regime_override_query",
    "regime_override_steps",
    "regime_override_val",
    "joint_max_exact",
    "joint_m",
    "epochs",
    "batch_size",
    "upsample_target",
    "mc_samples",
    "pool_subsample",
}
_FLOAT_FIELDS = {
    "dataset_separation",
    "dataset_cov",
    "dataset_oracle_noise",
    "longtail_rho",
    "splits_test",
    "splits_val",
    "dropout_p",
    "momentum",
}
_INT_TUPLE_FIELDS = {"hidden_sizes", "seeds"}
_FLOAT_TUPLE_FIELDS = {"lr_grid", "wd_grid", "noise_grid"}


def _parse_value(field_name: str, raw: str):
    raw = raw.strip()
    if raw.lower() in ("none", ""):
        return None
    if field_name == "timing":
        return raw.lower() in ("1", "true", "yes")
    if field_name in _INT_TUPLE_FIELDS:
        return tuple(int(v) for v in raw.split(","))
    if field_name in _FLOAT_TUPLE_FIELDS:
        return tuple(float(v) for v in raw.split(","))
    if field_name in _INT_FIELDS:
        return int(raw)
    if field_name in _FLOAT_FIELDS:
        return float(raw)
    return raw


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse the key = value config format (one key per line, # comments)."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _KEY_MAP:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        field_name = _KEY_MAP[key]
        values[field_name] = _parse_value(field_name, raw)
    return ExperimentConfig(**values)


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def config_echo(cfg: ExperimentConfig) -> dict:
    """Canonical dotted-key dict echoed into every run record."""
    echo = {}
    for key, field_name in _KEY_MAP.items():
        value = getattr(cfg, field_name)
        if isinstance(value, tuple):
            value = list(value)
        echo[key] = value
    return echo


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset_kind == "csv":
        dataset, _ = load_csv(cfg.dataset_path, cfg.dataset_label_column, cfg.dataset_classes)
        return dataset
    spec = random_mixture_spec(
        class_count=cfg.dataset_classes,
        dim=cfg.dataset_dim,
        per_class=cfg.dataset_per_class,
        separation=cfg.dataset_separation,
        cov_scale=cfg.dataset_cov,
        seed=cfg.dataset_seed,
        name=cfg.dataset_name,
        oracle_noise_sigma=cfg.dataset_oracle_noise,
    )
    return generate_mixture(spec)


def resolve_regime(cfg: ExperimentConfig, table: RegimeTable | None = None) -> LabelRegime:
    regime = regime_for(cfg.dataset_classes, cfg.regime_name, table)
    overrides = {
        "starting_budget": cfg.regime_override_start,
        "query_size": cfg.regime_override_query,
        "query_steps": cfg.regime_override_steps,
        "val_size": cfg.regime_override_val,
    }
    changes = {k: v for k, v in overrides.items() if v is not None}
    return replace(regime, **changes) if changes else regime


def model_inputs(cfg: ExperimentConfig, dataset: Dataset) -> np.ndarray:
    """Feature matrix the classifier consumes under the configured strategy."""
    if cfg.strategy_kind == "oracle_representation":
        if dataset.latents is None:
            raise ValueError("oracle_representation requires a dataset with latents")
        return dataset.latents
    return dataset.features


def prepare_run(
    cfg: ExperimentConfig, dataset: Dataset, seed: int
) -> tuple[DataSplits, LabelRegime, LabelState, np.ndarray]:
    """Splits, regime, initial label state and validation subset for one seed."""
    splits = make_splits_for(cfg, dataset, seed)
    regime = resolve_regime(cfg)

    val_size = min(regime.val_size, splits.val_indices.size)
    if val_size < regime.val_size:
        regime = replace(regime, val_size=val_size)
    val_subset = stratified_subset(
        splits.val_indices, dataset.labels, val_size, spawn_rng(seed, "valsubset")
    )

    labeled = initial_label_strategy(
        splits.pool_indices,
        dataset.labels,
        regime.starting_budget,
        cfg.label_strategy,
        spawn_rng(seed, "labels"),
    )
    state = LabelState.from_pool(splits.pool_indices, labeled)
    if cfg.pool_subsample is not None:
        state = subsample_pool(state, cfg.pool_subsample, spawn_rng(seed, "subsample"))
    if regime.final_budget > state.pool_size:
        raise ValueError(
            f"regime infeasible: final budget {regime.final_budget} exceeds pool "
            f"{state.pool_size}"
        )
    return splits, regime, state, val_subset


def make_splits_for(cfg: ExperimentConfig, dataset: Dataset, seed: int) -> DataSplits:
    splits = make_splits(dataset, cfg.splits_test, cfg.splits_val, spawn_rng(seed, "splits"))
    if cfg.longtail_rho is not None:
        labels = dataset.labels[splits.pool_indices]
        avail = np.bincount(labels, minlength=dataset.class_count)
        n_max = cfg.longtail_nmax if cfg.longtail_nmax is not None else int(avail.min())
        counts = longtail_counts(
            LongTailSpec(n_max=n_max, imbalance_factor=cfg.longtail_rho,
                         class_count=dataset.class_count)
        )
        pool = apply_longtail(dataset, splits.pool_indices, counts, spawn_rng(seed, "longtail"))
        splits = DataSplits(pool, splits.val_indices, splits.test_indices)
    return splits


def hp_grid(cfg: ExperimentConfig) -> list[Hyperparams]:
    """Grid cells ordered lexicographically by (lr, wd, noise)."""
    cells = sorted(itertools.product(sorted(cfg.lr_grid), sorted(cfg.wd_grid),
                                     sorted(cfg.noise_grid)))
    return [
        Hyperparams(
            learning_rate=lr,
            weight_decay=wd,
            feature_noise_sigma=noise,
            hidden_sizes=cfg.hidden_sizes,
            dropout_p=cfg.dropout_p,
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            momentum=cfg.momentum,
            loss_weighting=cfg.loss_weighting,
            upsample_target=cfg.upsample_target,
        )
        for lr, wd, noise in cells
    ]


def hp_sweep(
    cfg: ExperimentConfig,
    dataset: Dataset,
    state: LabelState,
    val_subset: np.ndarray,
    seed: int,
) -> tuple[Hyperparams, dict]:
    """Train one model per grid cell on the starting budget; pick the best.

    Ties resolve to the lexicographically smallest (lr, wd, noise) cell. The
    chosen cell stays frozen for the whole pipeline.
    """
    grid = hp_grid(cfg)
    feats = model_inputs(cfg, dataset)
    labeled = np.array(state.labeled, dtype=np.int64)
    strategy = TrainingStrategy(cfg.strategy_kind)
    report_cells = []
    best: tuple[float, int] | None = None  # (metric, cell index); grid is tie-ordered
    failures = []
    for idx, hp in enumerate(grid):
        try:
            trained = fit(
                feats[labeled],
                dataset.labels[labeled],
                feats[val_subset],
                dataset.labels[val_subset],
                hp,
                strategy,
                seed=derive_seed(seed, "sweep", idx),
                class_count=dataset.class_count,
                metric=cfg.metric,
            )
        except ValueError as exc:
            failures.append(str(exc))
            report_cells.append(
                {"lr": hp.learning_rate, "wd": hp.weight_decay,
                 "noise": hp.feature_noise_sigma, "val_metric": None, "error": str(exc)}
            )
            continue
        report_cells.append(
            {"lr": hp.learning_rate, "wd": hp.weight_decay,
             "noise": hp.feature_noise_sigma, "val_metric": trained.best_val_metric}
        )
        if best is None or trained.best_val_metric > best[0]:
            best = (trained.best_val_metric, idx)
    if best is None:
        raise ValueError(f"all sweep cells failed training: {failures[:3]}")
    chosen = grid[best[1]]
    report = {
        "cells": report_cells,
        "chosen": {
            "lr": chosen.learning_rate,
            "wd": chosen.weight_decay,
            "noise": chosen.feature_noise_sigma,
        },
        "metric": cfg.metric,
        "seed": seed,
        "n_labeled": len(state.labeled),
    }
    return chosen, report


def _mc_metric(
    cfg: ExperimentConfig,
    trained: TrainedModel,
    feats: np.ndarray,
    labels: np.ndarray,
    indices: np.ndarray,
    rng_parts: tuple,
) -> float:
    """Metric of MC-mean predictions on a split (the bayesian prediction)."""
    post = predict_mc(
        trained, feats[indices], cfg.mc_samples, rng=spawn_rng(*rng_parts),
        sample_ids=indices,
    )
    pred = mean_predictive(post).argmax(axis=1)
    cm = ConfusionMatrix.from_predictions(labels[indices], pred, trained.class_count)
    return metric_fn(cfg.metric)(cm)


def run_al_loop(
    cfg: ExperimentConfig,
    hp: Hyperparams,
    seed: int,
    dataset: Dataset | None = None,
) -> RunRecord:
    """One full acquisition trajectory for one seed.

    Initial labels are drawn by the configured strategy, the model is trained
    from scratch, and each step computes the posterior/embeddings the query
    method needs, selects a batch, reveals labels, and refits from a fresh
    step-derived seed. Row 0 is the state after initial training.
    """
    dataset = dataset if dataset is not None else build_dataset(cfg)
    splits, regime, state, val_subset = prepare_run(cfg, dataset, seed)
    feats = model_inputs(cfg, dataset)
    labels = dataset.labels
    strategy = TrainingStrategy(cfg.strategy_kind)
    joint_cfg = JointConfig(cfg.joint_mode, cfg.joint_max_exact, cfg.joint_m)
    needs_posterior = cfg.qm_name in ("entropy", "bald", "batchbald")
    needs_embeddings = cfg.qm_name == "coreset"

    def train(step: int) -> TrainedModel:
        labeled = np.array(state.labeled, dtype=np.int64)
        return fit(
            feats[labeled],
            labels[labeled],
            feats[val_subset],
            labels[val_subset],
            hp,
            strategy,
            seed=derive_seed(seed, step, "fit"),
            class_count=dataset.class_count,
            metric=cfg.metric,
        )

    def record_row(step: int, trained: TrainedModel, wall: float) -> RunRow:
        val_m = _mc_metric(cfg, trained, feats, labels, val_subset, (seed, step, "eval-val"))
        test_m = _mc_metric(
            cfg, trained, feats, labels, splits.test_indices, (seed, step, "eval-test")
        )
        return RunRow(
            step=step,
            n_labeled=len(state.labeled),
            val_metric=val_m,
            test_metric=test_m,
            wall_seconds=wall if cfg.timing else 0.0,
        )

    rows = []
    t0 = time.perf_counter()
    trained = train(0)
    rows.append(record_row(0, trained, time.perf_counter() - t0))

    for step in range(1, regime.query_steps + 1):
        t0 = time.perf_counter()
        candidates = state.candidates()
        post = None
        emb = emb_ids = None
        if needs_posterior:
            post = predict_mc(
                trained,
                feats[candidates],
                cfg.mc_samples,
                rng=spawn_rng(seed, step, "mc"),
                sample_ids=candidates,
            )
        if needs_embeddings:
            emb_ids = np.concatenate([np.array(state.labeled, dtype=np.int64), candidates])
            emb = embed(trained, feats[emb_ids])
        ctx = QueryContext(
            label_state=state,
            query_size=regime.query_size,
            posterior=post,
            embeddings=emb,
            embedding_ids=emb_ids,
            rng=spawn_rng(seed, step, "qm"),
        )
        selection = select_queries(cfg.qm_name, ctx, joint_cfg)
        state = state.with_labeled(selection.chosen)
        trained = train(step)
        rows.append(record_row(step, trained, time.perf_counter() - t0))

    return RunRecord(
        qm_name=cfg.qm_name,
        dataset_name=dataset.name,
        regime_name=regime.name,
        seed=seed,
        rows=tuple(rows),
    )


def _record_json(cfg: ExperimentConfig, record: RunRecord) -> str:
    payload = record.to_json_dict()
    payload["config"] = config_echo(cfg)
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _seed_worker(cfg: ExperimentConfig, hp: Hyperparams, seed: int) -> tuple[int, str]:
    record = run_al_loop(cfg, hp, seed)
    return seed, _record_json(cfg, record)


def run_experiment(
    cfg: ExperimentConfig, out_dir: str | Path | None = None, jobs: int = 1
) -> dict[str, Path]:
    """Sweep once, run every seed, write one JSON run record per seed."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = build_dataset(cfg)
    sweep_seed = cfg.seeds[0]
    _, regime, state0, val_subset = prepare_run(cfg, dataset, sweep_seed)
    hp, sweep_report = hp_sweep(cfg, dataset, state0, val_subset, sweep_seed)

    paths: dict[str, Path] = {}
    sweep_path = out / f"{cfg.qm_name}_sweep.json"
    sweep_path.write_text(
        json.dumps(sweep_report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    paths["sweep"] = sweep_path

    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_seed_worker, cfg, hp, seed) for seed in cfg.seeds]
            results = dict(f.result() for f in futures)
    else:
        results = dict(_seed_worker(cfg, hp, seed) for seed in cfg.seeds)

    for seed in cfg.seeds:
        path = out / f"{cfg.qm_name}_seed{seed}.json"
        path.write_text(results[seed], encoding="utf-8")
        paths[f"seed{seed}"] = path
    return paths


@dataclass(frozen=True)
class AggregateCurve:
    """Per-step mean/SD of the test metric over seeds for one QM."""

    qm_name: str
    n_labeled: tuple[int, ...]
    mean: tuple[float, ...]
    sd: tuple[float, ...]
    per_seed: tuple[tuple[float, ...], ...]
    seeds: tuple[int, ...]


def aggregate(records: list[RunRecord]) -> AggregateCurve:
    """Aggregate records that share one (dataset, regime, qm) cell."""
    if not records:
        raise ValueError("no records to aggregate")
    qm = records[0].qm_name
    key = (records[0].dataset_name, records[0].regime_name, qm)
    grid = tuple(r.n_labeled for r in records[0].rows)
    values = []
    for rec in records:
        if (rec.dataset_name, rec.regime_name, rec.qm_name) != key:
            raise ValueError("records mix (dataset, regime, qm) cells")
        if tuple(r.n_labeled for r in rec.rows) != grid:
            raise ValueError("records have mismatched step grids")
        values.append([r.test_metric for r in rec.rows])
    arr = np.array(values)
    return AggregateCurve(
        qm_name=qm,
        n_labeled=grid,
        mean=tuple(float(v) for v in arr.mean(axis=0)),
        sd=tuple(float(v) for v in arr.std(axis=0)),
        per_seed=tuple(tuple(row) for row in values),
        seeds=tuple(r.seed for r in records),
    )


@dataclass(frozen=True)
class ComparisonReport:
    """A QM curve against the random baseline, paired by seed."""

    qm_name: str
    baseline_name: str
    n_labeled: tuple[int, ...]
    per_step_delta: tuple[float, ...]
    final_deltas: tuple[float, ...]
    area_delta: float
    steps_above: int


def compare_to_random(qm_curve: AggregateCurve, random_curve: AggregateCurve) -> ComparisonReport:
    """Per-step and final-step deltas plus area between learning curves."""
    if qm_curve.n_labeled != random_curve.n_labeled:
        raise ValueError("curves have mismatched n_labeled grids")
    if qm_curve.seeds != random_curve.seeds:
        raise ValueError("curves have mismatched seed lists; deltas must be paired")
    delta = np.array(qm_curve.mean) - np.array(random_curve.mean)
    final = tuple(
        q[-1] - r[-1] for q, r in zip(qm_curve.per_seed, random_curve.per_seed)
    )
    area = float(np.trapezoid(delta, np.array(qm_curve.n_labeled, dtype=np.float64)))
    return ComparisonReport(
        qm_name=qm_curve.qm_name,
        baseline_name=random_curve.qm_name,
        n_labeled=qm_curve.n_labeled,
        per_step_delta=tuple(float(d) for d in delta),
        final_deltas=final,
        area_delta=area,
        steps_above=int((delta > 0).sum()),
    )


def load_records(run_dir: str | Path) -> dict[str, list[RunRecord]]:
    """Run records grouped by QM name, ordered by seed."""
    run_dir = Path(run_dir)
    groups: dict[str, list[RunRecord]] = {}
    for path in sorted(run_dir.glob("*_seed*.json")):
        payload = json.loads(path.read_text(encoding="utf-8"))
        record = RunRecord.from_json_dict(payload)
        groups.setdefault(record.qm_name, []).append(record)
    for records in groups.values():
        records.sort(key=lambda r: r.seed)
    if not groups:
        raise ValueError(f"no run records found in {run_dir}")
    return groups


def _fmt(value: float) -> str:
    return repr(float(value))


def write_report_csv(
    curves: dict[str, AggregateCurve],
    out_path: str | Path,
    baseline: str | None = None,
) -> Path:
    """Plot-ready CSV, one row per (qm, step); baseline rows get empty deltas."""
    out_path = Path(out_path)
    base_curve = None
    if baseline is not None:
        if baseline not in curves:
            raise ValueError(f"baseline {baseline!r} not among runs {sorted(curves)}")
        base_curve = curves[baseline]
    lines = ["qm,step,n_labeled,mean,sd,delta_vs_random"]
    for qm in sorted(curves):
        curve = curves[qm]
        for step, (n, m, s) in enumerate(zip(curve.n_labeled, curve.mean, curve.sd)):
            if base_curve is None or qm == baseline:
                delta = ""
            else:
                if base_curve.n_labeled != curve.n_labeled:
                    raise ValueError(f"curve {qm} grid does not match baseline")
                delta = _fmt(m - base_curve.mean[step])
            lines.append(f"{qm},{step},{n},{_fmt(m)},{_fmt(s)},{delta}")
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out_path


def weighting_ablation(
    cfg: ExperimentConfig, out_dir: str | Path, jobs: int = 1
) -> Path:
    """Run weighted-CE and plain-CE arms on the same config; emit paired CSV.

    Both arms share seeds, dataset, query method and the mean-recall metric,
    so rows pair directly. Returns the path of the comparison CSV.
    """
    out = Path(out_dir)
    weighted_cfg = replace(cfg, loss_weighting="balanced", metric="mean_recall")
    plain_cfg = replace(cfg, loss_weighting="uniform", metric="mean_recall")
    run_experiment(weighted_cfg, out / "weighted", jobs=jobs)
    run_experiment(plain_cfg, out / "plain", jobs=jobs)
    weighted = aggregate(load_records(out / "weighted")[cfg.qm_name])
    plain = aggregate(load_records(out / "plain")[cfg.qm_name])
    if weighted.n_labeled != plain.n_labeled:
        raise ValueError("ablation arms produced mismatched step grids")
    lines = ["qm,step,n_labeled,weighted_mean,weighted_sd,plain_mean,plain_sd,delta"]
    for step, n in enumerate(weighted.n_labeled):
        lines.append(
            ",".join(
                [
                    cfg.qm_name,
                    str(step),
                    str(n),
                    _fmt(weighted.mean[step]),
                    _fmt(weighted.sd[step]),
                    _fmt(plain.mean[step]),
                    _fmt(plain.sd[step]),
                    _fmt(weighted.mean[step] - plain.mean[step]),
                ]
            )
        )
    csv_path = out / "weighting_ablation.csv"
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return csv_path


def directional_study_config(
    qm_name: str,
    seeds: tuple[int, ...],
    out_dir: str = "runs",
) -> ExperimentConfig:
    """Long-tail low-regime preset for the desk-scale directional study.

    Five-class Gaussian mixture with an imbalance-factor-50 pool, random
    initial labels from the imbalanced pool, weighted CE loss and mean-recall
    scoring; the pool is subsampled so the greedy batch methods stay fast.
    """
    return ExperimentConfig(
        dataset_kind="mixture",
        dataset_classes=5,
        dataset_dim=8,
        dataset_per_class=480,
        dataset_separation=1.0,
        dataset_cov=1.0,
        dataset_seed=20240,
        dataset_name="longtail5",
        longtail_rho=50.0,
        regime_name="low",
        qm_name=qm_name,
        joint_max_exact=3125,
        joint_m=1024,
        lr_grid=(0.05,),
        wd_grid=(5e-4,),
        noise_grid=(0.1,),
        hidden_sizes=(32, 16),
        epochs=30,
        batch_size=32,
        loss_weighting="balanced",
        upsample_target=1500,
        strategy_kind="from_scratch",
        mc_samples=30,
        label_strategy="pool_random",
        seeds=tuple(seeds),
        metric="mean_recall",
        out_dir=out_dir,
    )
