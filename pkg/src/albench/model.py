"""Feed-forward MC-dropout classifier trained with the evaluation protocol.

The network is a small MLP (ReLU hidden layers) with dropout applied to the
final representation before the classification head. Training always starts
from a fresh seed-derived initialization and uses mini-batch SGD with
Nesterov momentum, optional class-weighted cross-entropy, upsampling of
small labeled sets, Gaussian feature noise as the augmentation analog, and
checkpointing on the best validation metric.

Gradients are computed analytically in closed form (verified against finite
differences in the test suite), so the trainer has no autodiff dependency.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import ConfusionMatrix
from .metrics import metric_fn
from .posterior import PosteriorSamples
from .seeding import spawn_rng

logger = logging.getLogger(__name__)

LOSS_WEIGHTINGS = ("uniform", "balanced")
STRATEGY_KINDS = ("from_scratch", "oracle_representation")


@dataclass(frozen=True)
class Hyperparams:
    """Training hyperparameters; the sweep varies lr, wd and noise."""

    learning_rate: float = 0.05
    weight_decay: float = 5e-4
    feature_noise_sigma: float = 0.0
    hidden_sizes: tuple[int, ...] = (64, 32)
    dropout_p: float = 0.5
    epochs: int = 40
    batch_size: int = 32
    momentum: float = 0.9
    loss_weighting: str = "uniform"
    upsample_target: int = 2000

    def __post_init__(self) -> None:
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0 or self.feature_noise_sigma < 0:
            raise ValueError("weight_decay and feature_noise_sigma must be non-negative")
        if self.loss_weighting not in LOSS_WEIGHTINGS:
            raise ValueError(f"loss_weighting must be one of {LOSS_WEIGHTINGS}")
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden_sizes must be positive")
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "feature_noise_sigma": self.feature_noise_sigma,
            "hidden_sizes": list(self.hidden_sizes),
            "dropout_p": self.dropout_p,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "momentum": self.momentum,
            "loss_weighting": self.loss_weighting,
            "upsample_target": self.upsample_target,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Hyperparams":
        payload = dict(payload)
        payload["hidden_sizes"] = tuple(payload["hidden_sizes"])
        return cls(**payload)


@dataclass(frozen=True)
class TrainingStrategy:
    """How the classifier consumes inputs for a whole AL pipeline.

    ``from_scratch`` trains on raw features; ``oracle_representation`` trains
    the same head on the data generator's latent coordinates (plus frozen
    noise), standing in for a strong pretrained representation.
    """

    kind: str = "from_scratch"

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"strategy kind must be one of {STRATEGY_KINDS}")


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """MLP parameters restored to the best validation checkpoint."""

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    hp: Hyperparams
    seed: int
    class_count: int
    input_dim: int
    strategy_kind: str
    metric_name: str
    best_val_metric: float
    best_epoch: int
    val_history: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.val_history:
            raise ValueError("val_history must be non-empty")
        if abs(max(self.val_history) - self.best_val_metric) > 1e-12:
            raise ValueError("best_val_metric must equal the maximum recorded metric")
        frozen = []
        for w, b in self.layers:
            w = np.ascontiguousarray(w, dtype=np.float64)
            b = np.ascontiguousarray(b, dtype=np.float64)
            w.setflags(write=False)
            b.setflags(write=False)
            frozen.append((w, b))
        object.__setattr__(self, "layers", tuple(frozen))

    @property
    def best_checkpoint(self) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
        return self.layers

    @property
    def hidden_width(self) -> int:
        return self.layers[-2][0].shape[1] if len(self.layers) > 1 else self.input_dim

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrainedModel):
            return NotImplemented
        if (
            self.hp != other.hp
            or self.seed != other.seed
            or self.class_count != other.class_count
            or self.strategy_kind != other.strategy_kind
            or self.metric_name != other.metric_name
            or self.val_history != other.val_history
        ):
            return False
        return len(self.layers) == len(other.layers) and all(
            np.array_equal(w1, w2) and np.array_equal(b1, b2)
            for (w1, b1), (w2, b2) in zip(self.layers, other.layers)
        )

    def to_text(self) -> str:
        """Binary-free checkpoint: layer shapes plus row-major parameters."""
        lines = ["albench-model v1"]
        lines.append(f"seed {self.seed}")
        lines.append(f"class_count {self.class_count}")
        lines.append(f"input_dim {self.input_dim}")
        lines.append(f"strategy {self.strategy_kind}")
        lines.append(f"metric {self.metric_name}")
        lines.append(f"best_val_metric {self.best_val_metric!r}")
        lines.append(f"best_epoch {self.best_epoch}")
        lines.append("val_history " + ",".join(repr(v) for v in self.val_history))
        lines.append("hp " + json.dumps(self.hp.to_dict(), sort_keys=True))
        lines.append(f"layers {len(self.layers)}")
        for w, b in self.layers:
            lines.append(f"shape {w.shape[0]} {w.shape[1]}")
            lines.append("W " + " ".join(repr(float(v)) for v in w.ravel()))
            lines.append("b " + " ".join(repr(float(v)) for v in b.ravel()))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TrainedModel":
        lines = text.strip().split("\n")
        if lines[0] != "albench-model v1":
            raise ValueError("unrecognized checkpoint header")
        fields: dict[str, str] = {}
        i = 1
        while not lines[i].startswith("layers "):
            key, _, value = lines[i].partition(" ")
            fields[key] = value
            i += 1
        n_layers = int(lines[i].split()[1])
        i += 1
        layers = []
        for _ in range(n_layers):
            _, n_in, n_out = lines[i].split()
            w = np.array([float(v) for v in lines[i + 1].split()[1:]]).reshape(
                int(n_in), int(n_out)
            )
            b = np.array([float(v) for v in lines[i + 2].split()[1:]])
            layers.append((w, b))
            i += 3
        return cls(
            layers=tuple(layers),
            hp=Hyperparams.from_dict(json.loads(fields["hp"])),
            seed=int(fields["seed"]),
            class_count=int(fields["class_count"]),
            input_dim=int(fields["input_dim"]),
            strategy_kind=fields["strategy"],
            metric_name=fields["metric"],
            best_val_metric=float(fields["best_val_metric"]),
            best_epoch=int(fields["best_epoch"]),
            val_history=tuple(float(v) for v in fields["val_history"].split(",")),
        )


def class_weights(labels: np.ndarray, class_count: int) -> np.ndarray:
    """Balanced class weights w_c = N / (C * n_c); absent classes get 0."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("cannot compute class weights for an empty label set")
    counts = np.bincount(labels, minlength=class_count).astype(np.float64)
    weights = np.zeros(class_count)
    present = counts > 0
    weights[present] = labels.size / (class_count * counts[present])
    absent = np.nonzero(~present)[0]
    if absent.size:
        logger.warning("classes absent from labeled set get weight 0: %s", absent.tolist())
    return weights


def upsample_indices(
    indices: Sequence[int], target: int, rng: np.random.Generator
) -> np.ndarray:
    """Repeat a small labeled set up to ``target`` presentations.

    The full set is repeated floor(target / n) times and the remainder is a
    uniform draw without replacement, so each index appears floor or floor+1
    times. Sets already at or above the target pass through unchanged.
    """
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ValueError("cannot upsample an empty index list")
    n = indices.size
    if n >= target:
        return indices.copy()
    repeats, remainder = divmod(target, n)
    parts = [np.tile(indices, repeats)]
    if remainder:
        parts.append(rng.choice(indices, size=remainder, replace=False))
    return np.concatenate(parts)


def init_layers(
    sizes: Sequence[int], rng: np.random.Generator
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Uniform He-style fan-in initialization; biases start at zero."""
    layers = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / n_in)
        w = rng.uniform(-bound, bound, size=(n_in, n_out))
        b = np.zeros(n_out)
        layers.append((w, b))
    return layers


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _forward(
    layers: Sequence[tuple[np.ndarray, np.ndarray]],
    x: np.ndarray,
    dropout_mask: np.ndarray | None = None,
) -> tuple[np.ndarray, list[np.ndarray], np.ndarray]:
    """Returns (probs, hidden activations per layer input, dropped representation)."""
    activations = [x]
    a = x
    for w, b in layers[:-1]:
        a = np.maximum(a @ w + b, 0.0)
        activations.append(a)
    rep = activations[-1]
    dropped = rep if dropout_mask is None else rep * dropout_mask
    w_out, b_out = layers[-1]
    probs = _softmax(dropped @ w_out + b_out)
    return probs, activations, dropped


def loss_and_grads(
    layers: Sequence[tuple[np.ndarray, np.ndarray]],
    x: np.ndarray,
    y: np.ndarray,
    class_weight_vec: np.ndarray,
    weight_decay: float,
    dropout_mask: np.ndarray | None = None,
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Weighted cross-entropy plus L2 penalty on weights, with exact gradients.

    The data term is sum_i w_i * (-ln p_{i,y_i}) / sum_i w_i; the penalty is
    (wd / 2) * sum ||W||^2 over weight matrices (biases are not decayed).
    """
    probs, activations, dropped = _forward(layers, x, dropout_mask)
    n = x.shape[0]
    sample_w = class_weight_vec[y]
    w_sum = sample_w.sum()
    if w_sum <= 0:
        raise ValueError("all samples have zero class weight")
    nll = -np.log(np.maximum(probs[np.arange(n), y], 1e-300))
    loss = float((sample_w * nll).sum() / w_sum)
    penalty = 0.5 * weight_decay * sum(float((w * w).sum()) for w, _ in layers)
    loss += penalty

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)  # type: ignore
    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits *= (sample_w / w_sum)[:, None]

    w_out, _ = layers[-1]
    grads[-1] = (dropped.T @ dlogits + weight_decay * w_out, dlogits.sum(axis=0))
    da = dlogits @ w_out.T
    if dropout_mask is not None:
        da = da * dropout_mask
    for layer_idx in range(len(layers) - 2, -1, -1):
        w, _ = layers[layer_idx]
        a_out = activations[layer_idx + 1]
        dz = da * (a_out > 0.0)
        grads[layer_idx] = (
            activations[layer_idx].T @ dz + weight_decay * w,
            dz.sum(axis=0),
        )
        da = dz @ w.T
    return loss, grads


def _evaluate(
    layers: Sequence[tuple[np.ndarray, np.ndarray]],
    x: np.ndarray,
    y: np.ndarray,
    class_count: int,
    metric_name: str,
) -> float:
    probs, _, _ = _forward(layers, x)
    cm = ConfusionMatrix.from_predictions(y, probs.argmax(axis=1), class_count)
    return metric_fn(metric_name)(cm)


def fit(
    train_features: np.ndarray,
    train_labels: np.ndarray,
    val_features: np.ndarray,
    val_labels: np.ndarray,
    hp: Hyperparams,
    strategy: TrainingStrategy | None = None,
    seed: int = 0,
    class_count: int | None = None,
    metric: str = "accuracy",
) -> TrainedModel:
    """Train from a fresh initialization and restore the best-val checkpoint.

    Per-presentation Gaussian feature noise plays the augmentation role, the
    labeled set is upsampled to ``hp.upsample_target`` presentations, and the
    learning rate drops by 10x at 75% of the epochs.
    """
    strategy = strategy or TrainingStrategy()
    x = np.asarray(train_features, dtype=np.float64)
    y = np.asarray(train_labels, dtype=np.int64)
    xv = np.asarray(val_features, dtype=np.float64)
    yv = np.asarray(val_labels, dtype=np.int64)
    if class_count is None:
        class_count = int(max(y.max(), yv.max())) + 1
    if np.unique(y).size < 2:
        raise ValueError("degenerate single-class training set")

    cw = (
        class_weights(y, class_count)
        if hp.loss_weighting == "balanced"
        else np.ones(class_count)
    )

    init_rng = spawn_rng(seed, "init")
    batch_rng = spawn_rng(seed, "batch")
    noise_rng = spawn_rng(seed, "noise")
    dropout_rng = spawn_rng(seed, "dropout")
    upsample_rng = spawn_rng(seed, "upsample")

    sizes = [x.shape[1], *hp.hidden_sizes, class_count]
    layers = init_layers(sizes, init_rng)
    velocity = [(np.zeros_like(w), np.zeros_like(b)) for w, b in layers]
    rep_width = hp.hidden_sizes[-1]

    presentation = upsample_indices(np.arange(x.shape[0]), hp.upsample_target, upsample_rng)
    decay_epoch = int(round(0.75 * hp.epochs))

    best_metric = -np.inf
    best_epoch = -1
    best_layers: list[tuple[np.ndarray, np.ndarray]] | None = None
    history: list[float] = []

    for epoch in range(hp.epochs):
        lr = hp.learning_rate * (0.1 if epoch >= decay_epoch else 1.0)
        order = batch_rng.permutation(presentation)
        for start in range(0, order.size, hp.batch_size):
            bidx = order[start : start + hp.batch_size]
            xb = x[bidx]
            if hp.feature_noise_sigma > 0:
                xb = xb + hp.feature_noise_sigma * noise_rng.standard_normal(xb.shape)
            yb = y[bidx]
            mask = None
            if hp.dropout_p > 0:
                keep = dropout_rng.random((xb.shape[0], rep_width)) >= hp.dropout_p
                mask = keep / (1.0 - hp.dropout_p)
            _, grads = loss_and_grads(layers, xb, yb, cw, hp.weight_decay, mask)
            for li, ((w, b), (gw, gb), (vw, vb)) in enumerate(
                zip(layers, grads, velocity)
            ):
                vw = hp.momentum * vw + gw
                vb = hp.momentum * vb + gb
                # Nesterov: step along the look-ahead gradient.
                layers[li] = (
                    w - lr * (gw + hp.momentum * vw),
                    b - lr * (gb + hp.momentum * vb),
                )
                velocity[li] = (vw, vb)
        val_metric = _evaluate(layers, xv, yv, class_count, metric)
        history.append(val_metric)
        if val_metric > best_metric:
            best_metric = val_metric
            best_epoch = epoch
            best_layers = [(w.copy(), b.copy()) for w, b in layers]

    assert best_layers is not None
    return TrainedModel(
        layers=tuple(best_layers),
        hp=hp,
        seed=seed,
        class_count=class_count,
        input_dim=x.shape[1],
        strategy_kind=strategy.kind,
        metric_name=metric,
        best_val_metric=float(best_metric),
        best_epoch=best_epoch,
        val_history=tuple(history),
    )


def predict_proba(model: TrainedModel, features: np.ndarray) -> np.ndarray:
    """Deterministic class probabilities (dropout off)."""
    probs, _, _ = _forward(model.layers, np.asarray(features, dtype=np.float64))
    return probs


def predict(model: TrainedModel, features: np.ndarray) -> np.ndarray:
    """Deterministic class predictions (dropout off)."""
    return predict_proba(model, features).argmax(axis=1)


def evaluate(
    model: TrainedModel, features: np.ndarray, labels: np.ndarray, metric: str | None = None
) -> float:
    """Deterministic metric of the model on a labeled split."""
    return _evaluate(
        model.layers,
        np.asarray(features, dtype=np.float64),
        np.asarray(labels, dtype=np.int64),
        model.class_count,
        metric or model.metric_name,
    )


def predict_mc(
    model: TrainedModel,
    features: np.ndarray,
    k: int = 50,
    rng: np.random.Generator | None = None,
    sample_ids: np.ndarray | None = None,
) -> PosteriorSamples:
    """K stochastic forward passes with dropout on the final representation."""
    if k < 1:
        raise ValueError("need at least one MC sample")
    x = np.asarray(features, dtype=np.float64)
    if rng is None:
        rng = spawn_rng(model.seed, "predict-mc")
    if sample_ids is None:
        sample_ids = np.arange(x.shape[0], dtype=np.int64)
    p = model.hp.dropout_p
    rep_width = model.hidden_width
    slices = []
    for _ in range(k):
        mask = None
        if p > 0:
            mask = (rng.random((x.shape[0], rep_width)) >= p) / (1.0 - p)
        probs, _, _ = _forward(model.layers, x, mask)
        slices.append(probs)
    return PosteriorSamples(np.stack(slices, axis=0), sample_ids)


def embed(model: TrainedModel, features: np.ndarray) -> np.ndarray:
    """Deterministic penultimate-layer activations (dropout off)."""
    _, activations, _ = _forward(model.layers, np.asarray(features, dtype=np.float64))
    return activations[-1]


from sklearn.base import BaseEstimator, ClassifierMixin


class MLPDropoutClassifier(BaseEstimator, ClassifierMixin):
    """Sklearn-style estimator wrapping the MC-dropout trainer.

    Follows the fit/predict/predict_proba/get_params conventions so the
    classifier composes with sklearn pipelines and model selection. Labels
    may be arbitrary integers; they are encoded to dense class ids at fit
    time and decoded on predict.
    """

    def __init__(
        self,
        hidden_sizes=(64, 32),
        learning_rate=0.05,
        weight_decay=5e-4,
        feature_noise_sigma=0.0,
        dropout_p=0.5,
        epochs=40,
        batch_size=32,
        momentum=0.9,
        loss_weighting="uniform",
        upsample_target=2000,
        mc_samples=50,
        metric="accuracy",
        seed=0,
    ):
        self.hidden_sizes = hidden_sizes
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.feature_noise_sigma = feature_noise_sigma
        self.dropout_p = dropout_p
        self.epochs = epochs
        self.batch_size = batch_size
        self.momentum = momentum
        self.loss_weighting = loss_weighting
        self.upsample_target = upsample_target
        self.mc_samples = mc_samples
        self.metric = metric
        self.seed = seed

    def _hyperparams(self) -> Hyperparams:
        return Hyperparams(
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            feature_noise_sigma=self.feature_noise_sigma,
            hidden_sizes=tuple(self.hidden_sizes),
            dropout_p=self.dropout_p,
            epochs=self.epochs,
            batch_size=self.batch_size,
            momentum=self.momentum,
            loss_weighting=self.loss_weighting,
            upsample_target=self.upsample_target,
        )

    @staticmethod
    def _validate_xy(X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be a 2-d array")
        if not np.isfinite(X).all():
            raise ValueError("X contains non-finite values")
        if y is None:
            return X
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y length mismatch")
        return X, y

    def fit(self, X, y, X_val=None, y_val=None):
        X, y = self._validate_xy(X, y)
        self.classes_, y_enc = np.unique(y, return_inverse=True)
        if X_val is None:
            xv, yv = X, y_enc
        else:
            xv, yv = self._validate_xy(X_val, y_val)
            yv = np.searchsorted(self.classes_, yv)
        self.model_ = fit(
            X,
            y_enc,
            xv,
            yv,
            self._hyperparams(),
            seed=self.seed,
            class_count=len(self.classes_),
            metric=self.metric,
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ValueError("estimator is not fitted; call fit first")

    def predict_proba(self, X):
        self._check_fitted()
        X = self._validate_xy(X)
        post = predict_mc(
            self.model_, X, self.mc_samples, rng=spawn_rng(self.seed, "estimator-mc")
        )
        return post.probs.mean(axis=0)

    def predict(self, X):
        self._check_fitted()
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

    def sample_posterior(self, X, k=None, rng=None) -> PosteriorSamples:
        self._check_fitted()
        X = self._validate_xy(X)
        return predict_mc(self.model_, X, k or self.mc_samples, rng=rng)

    def transform(self, X):
        """Penultimate-layer representation (what Core-Set consumes)."""
        self._check_fitted()
        return embed(self.model_, self._validate_xy(X))
