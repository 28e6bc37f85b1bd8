"""Core data types shared by all modules.

All types validate their invariants at construction and are immutable
afterwards; the label state evolves by producing a new value per step.
Each type serializes to a single line of JSON (floats round-trip exactly).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

REGIME_NAMES = ("low", "medium", "high")


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


def _check_index_list(name: str, indices: np.ndarray) -> None:
    if indices.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if indices.size and indices.min() < 0:
        raise ValueError(f"{name} contains negative indices")
    if np.unique(indices).size != indices.size:
        raise ValueError(f"{name} contains duplicate indices")


@dataclass(frozen=True, eq=False)
class Dataset:
    """A validated in-memory classification dataset.

    ``latents`` optionally carries generator-side coordinates consumed by the
    oracle-representation training strategy; tabular datasets leave it None.
    """

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = "dataset"
    latents: np.ndarray | None = None

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValueError("features must be a non-empty N x D matrix")
        if labels.shape != (feats.shape[0],):
            raise ValueError(
                f"labels length {labels.shape} does not match feature rows {feats.shape[0]}"
            )
        if self.class_count < 2:
            raise ValueError("class_count must be at least 2")
        bad = np.argwhere(~np.isfinite(feats))
        if bad.size:
            r, c = bad[0]
            raise ValueError(f"non-finite feature at row {r}, column {c}")
        out_of_range = np.nonzero((labels < 0) | (labels >= self.class_count))[0]
        if out_of_range.size:
            raise ValueError(f"label out of range at sample {out_of_range[0]}")
        object.__setattr__(self, "features", _readonly(feats))
        object.__setattr__(self, "labels", _readonly(labels))
        if self.latents is not None:
            lat = np.asarray(self.latents, dtype=np.float64)
            if lat.ndim != 2 or lat.shape[0] != feats.shape[0]:
                raise ValueError("latents must have one row per sample")
            if not np.isfinite(lat).all():
                raise ValueError("latents contain non-finite values")
            object.__setattr__(self, "latents", _readonly(lat))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        same_latents = (self.latents is None) == (other.latents is None) and (
            self.latents is None or np.array_equal(self.latents, other.latents)
        )
        return (
            self.name == other.name
            and self.class_count == other.class_count
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and same_latents
        )

    def to_json(self) -> str:
        payload = {
            "type": "dataset",
            "name": self.name,
            "class_count": self.class_count,
            "features": self.features.tolist(),
            "labels": self.labels.tolist(),
            "latents": None if self.latents is None else self.latents.tolist(),
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        payload = json.loads(text)
        latents = payload.get("latents")
        return cls(
            features=np.array(payload["features"], dtype=np.float64),
            labels=np.array(payload["labels"], dtype=np.int64),
            class_count=int(payload["class_count"]),
            name=str(payload["name"]),
            latents=None if latents is None else np.array(latents, dtype=np.float64),
        )


def validate_dataset(
    features: object,
    labels: object,
    class_count: int,
    name: str = "dataset",
    latents: object | None = None,
) -> Dataset:
    """Validate raw arrays into a Dataset, reporting the offending index."""
    feats = np.asarray(features, dtype=np.float64)
    labs = np.asarray(labels)
    if feats.size == 0 or labs.size == 0:
        raise ValueError("empty data: features and labels must be non-empty")
    if feats.ndim != 2:
        raise ValueError("features must be a 2-d matrix")
    if labs.shape[0] != feats.shape[0]:
        raise ValueError(
            f"length mismatch: {feats.shape[0]} feature rows vs {labs.shape[0]} labels"
        )
    lat = None if latents is None else np.asarray(latents, dtype=np.float64)
    return Dataset(feats, labs.astype(np.int64), class_count, name=name, latents=lat)


@dataclass(frozen=True, eq=False)
class DataSplits:
    """Disjoint pool/validation/test index sets into one Dataset."""

    pool_indices: np.ndarray
    val_indices: np.ndarray
    test_indices: np.ndarray

    def __post_init__(self) -> None:
        pool = _readonly(np.asarray(self.pool_indices, dtype=np.int64))
        val = _readonly(np.asarray(self.val_indices, dtype=np.int64))
        test = _readonly(np.asarray(self.test_indices, dtype=np.int64))
        for name, arr in (("pool", pool), ("val", val), ("test", test)):
            _check_index_list(f"{name}_indices", arr)
        combined = np.concatenate([pool, val, test])
        if np.unique(combined).size != combined.size:
            raise ValueError("split index lists are not pairwise disjoint")
        object.__setattr__(self, "pool_indices", pool)
        object.__setattr__(self, "val_indices", val)
        object.__setattr__(self, "test_indices", test)

    def check_within(self, n_samples: int) -> None:
        for name in ("pool_indices", "val_indices", "test_indices"):
            arr = getattr(self, name)
            if arr.size and arr.max() >= n_samples:
                raise ValueError(f"{name} reference samples beyond dataset size {n_samples}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DataSplits):
            return NotImplemented
        return (
            np.array_equal(self.pool_indices, other.pool_indices)
            and np.array_equal(self.val_indices, other.val_indices)
            and np.array_equal(self.test_indices, other.test_indices)
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "type": "splits",
                "pool": self.pool_indices.tolist(),
                "val": self.val_indices.tolist(),
                "test": self.test_indices.tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "DataSplits":
        payload = json.loads(text)
        return cls(
            pool_indices=np.array(payload["pool"], dtype=np.int64),
            val_indices=np.array(payload["val"], dtype=np.int64),
            test_indices=np.array(payload["test"], dtype=np.int64),
        )


@dataclass(frozen=True)
class LabelState:
    """Partition of the train pool into labeled (ordered) and unlabeled sets.

    ``labeled`` preserves acquisition order: the initial budget first, then
    each query batch in selection order.
    """

    labeled: tuple[int, ...]
    unlabeled: frozenset[int]

    def __post_init__(self) -> None:
        labeled = tuple(int(i) for i in self.labeled)
        unlabeled = frozenset(int(i) for i in self.unlabeled)
        if len(set(labeled)) != len(labeled):
            raise ValueError("labeled list contains duplicates")
        overlap = set(labeled) & unlabeled
        if overlap:
            raise ValueError(f"labeled and unlabeled overlap on {sorted(overlap)[:5]}")
        object.__setattr__(self, "labeled", labeled)
        object.__setattr__(self, "unlabeled", unlabeled)

    @classmethod
    def from_pool(cls, pool_indices: Iterable[int], labeled: Iterable[int]) -> "LabelState":
        pool = {int(i) for i in pool_indices}
        labeled = tuple(int(i) for i in labeled)
        missing = set(labeled) - pool
        if missing:
            raise ValueError(f"labeled indices not in pool: {sorted(missing)[:5]}")
        return cls(labeled=labeled, unlabeled=frozenset(pool - set(labeled)))

    @property
    def pool_size(self) -> int:
        return len(self.labeled) + len(self.unlabeled)

    def candidates(self) -> np.ndarray:
        """Unlabeled indices in ascending order (canonical candidate axis)."""
        return np.array(sorted(self.unlabeled), dtype=np.int64)

    def with_labeled(self, new_indices: Sequence[int]) -> "LabelState":
        """Move ``new_indices`` from unlabeled to labeled, preserving order."""
        new = [int(i) for i in new_indices]
        bad = [i for i in new if i not in self.unlabeled]
        if bad:
            raise ValueError(f"indices not in unlabeled set: {bad[:5]}")
        if len(set(new)) != len(new):
            raise ValueError("new indices contain duplicates")
        return LabelState(
            labeled=self.labeled + tuple(new),
            unlabeled=self.unlabeled - set(new),
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "type": "label_state",
                "labeled": list(self.labeled),
                "unlabeled": sorted(self.unlabeled),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "LabelState":
        payload = json.loads(text)
        return cls(
            labeled=tuple(payload["labeled"]),
            unlabeled=frozenset(payload["unlabeled"]),
        )


@dataclass(frozen=True)
class LabelRegime:
    """Named budget schedule: starting budget, per-step query size, step count."""

    name: str
    starting_budget: int
    query_size: int
    query_steps: int
    val_size: int

    def __post_init__(self) -> None:
        if self.starting_budget < 1:
            raise ValueError("starting_budget must be >= 1")
        if self.query_size < 1:
            raise ValueError("query_size must be >= 1")
        if self.query_steps < 1:
            raise ValueError("query_steps must be >= 1")
        if self.val_size < 1:
            raise ValueError("val_size must be >= 1")

    @property
    def final_budget(self) -> int:
        return self.starting_budget + self.query_steps * self.query_size

    def to_json(self) -> str:
        return json.dumps(
            {
                "type": "regime",
                "name": self.name,
                "start": self.starting_budget,
                "query": self.query_size,
                "steps": self.query_steps,
                "val": self.val_size,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "LabelRegime":
        payload = json.loads(text)
        return cls(
            name=payload["name"],
            starting_budget=payload["start"],
            query_size=payload["query"],
            query_steps=payload["steps"],
            val_size=payload["val"],
        )


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """C x C count matrix; rows are true classes, columns predicted classes."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError("counts must be a square matrix")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", _readonly(counts))

    @classmethod
    def from_predictions(
        cls, y_true: np.ndarray, y_pred: np.ndarray, class_count: int
    ) -> "ConfusionMatrix":
        y_true = np.asarray(y_true, dtype=np.int64)
        y_pred = np.asarray(y_pred, dtype=np.int64)
        if y_true.shape != y_pred.shape:
            raise ValueError("prediction/label shape mismatch")
        counts = np.zeros((class_count, class_count), dtype=np.int64)
        np.add.at(counts, (y_true, y_pred), 1)
        return cls(counts)

    @property
    def class_count(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    def to_json(self) -> str:
        return json.dumps({"type": "confusion", "counts": self.counts.tolist()}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ConfusionMatrix":
        return cls(np.array(json.loads(text)["counts"], dtype=np.int64))


@dataclass(frozen=True)
class RunRow:
    """One evaluation point of an AL run; step 0 is after initial training."""

    step: int
    n_labeled: int
    val_metric: float
    test_metric: float
    wall_seconds: float = 0.0


@dataclass(frozen=True)
class RunRecord:
    """Per-step metric trajectory for one (dataset, regime, QM, seed) cell."""

    qm_name: str
    dataset_name: str
    regime_name: str
    seed: int
    rows: tuple[RunRow, ...]

    def __post_init__(self) -> None:
        rows = tuple(self.rows)
        if not rows:
            raise ValueError("rows must be non-empty")
        steps = [r.step for r in rows]
        if steps != list(range(len(rows))):
            raise ValueError("row steps must be 0..n in order")
        if len(rows) > 1:
            increments = {rows[i + 1].n_labeled - rows[i].n_labeled for i in range(len(rows) - 1)}
            if len(increments) != 1 or min(increments) <= 0:
                raise ValueError("n_labeled must increase by a constant query size per row")
        object.__setattr__(self, "rows", rows)

    @property
    def query_size(self) -> int:
        if len(self.rows) < 2:
            return 0
        return self.rows[1].n_labeled - self.rows[0].n_labeled

    def final_metric(self) -> float:
        return self.rows[-1].test_metric

    def to_json_dict(self) -> dict:
        return {
            "qm": self.qm_name,
            "dataset": self.dataset_name,
            "regime": self.regime_name,
            "seed": self.seed,
            "rows": [
                {
                    "step": r.step,
                    "n_labeled": r.n_labeled,
                    "val": r.val_metric,
                    "test": r.test_metric,
                    "wall_seconds": r.wall_seconds,
                }
                for r in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, payload: dict) -> "RunRecord":
        return cls(
            qm_name=payload["qm"],
            dataset_name=payload["dataset"],
            regime_name=payload["regime"],
            seed=int(payload["seed"]),
            rows=tuple(
                RunRow(
                    step=int(r["step"]),
                    n_labeled=int(r["n_labeled"]),
                    val_metric=float(r["val"]),
                    test_metric=float(r["test"]),
                    wall_seconds=float(r["wall_seconds"]),
                )
                for r in payload["rows"]
            ),
        )

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls.from_json_dict(json.loads(text))
