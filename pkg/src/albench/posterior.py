"""Information-theoretic quantities over Monte-Carlo posterior samples.

Given a ``K x N x C`` tensor of class probabilities (K stochastic forward
passes over N candidates with C classes), this module computes predictive
entropies, mutual-information (BALD) scores, and joint entropies over
candidate batches, where the joint label distribution is the mixture

    P(y_1, ..., y_B) = (1/K) * sum_k prod_i p(y_i | theta_k).

Joint entropies are evaluated exactly while ``C ** B`` stays below a
configurable budget and otherwise estimated from sampled configurations.
All operations are pure functions of immutable inputs; the sampled joint
estimator takes an explicit RNG stream so schedules reproduce exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

PROB_FLOOR = 1e-12
_SUM_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class PosteriorSamples:
    """K x N x C tensor of MC-sampled class probabilities.

    ``sample_ids`` are the pool indices aligned with axis 1.
    """

    probs: np.ndarray
    sample_ids: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        ids = np.asarray(self.sample_ids, dtype=np.int64)
        if probs.ndim != 3:
            raise ValueError("probs must be a K x N x C tensor")
        k, n, c = probs.shape
        if k < 1 or n < 1 or c < 1:
            raise ValueError("probs must have positive dimensions")
        if ids.shape != (n,):
            raise ValueError(f"sample_ids length {ids.shape} does not match N={n}")
        if np.unique(ids).size != ids.size:
            raise ValueError("sample_ids contain duplicates")
        if probs.min() < -1e-9 or probs.max() > 1.0 + 1e-9:
            raise ValueError("probabilities must lie in [0, 1]")
        sums = probs.sum(axis=2)
        if np.abs(sums - 1.0).max() > _SUM_TOL:
            k_bad, n_bad = np.unravel_index(np.abs(sums - 1.0).argmax(), sums.shape)
            raise ValueError(
                f"probability slice (k={k_bad}, n={n_bad}) sums to {sums[k_bad, n_bad]:.8f}"
            )
        probs = np.ascontiguousarray(np.clip(probs, 0.0, 1.0))
        probs.setflags(write=False)
        ids = np.ascontiguousarray(ids)
        ids.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "sample_ids", ids)

    @property
    def n_draws(self) -> int:
        return self.probs.shape[0]

    @property
    def n_candidates(self) -> int:
        return self.probs.shape[1]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[2]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PosteriorSamples):
            return NotImplemented
        return np.array_equal(self.probs, other.probs) and np.array_equal(
            self.sample_ids, other.sample_ids
        )


@dataclass(frozen=True)
class JointConfig:
    """Estimator policy for joint entropies.

    ``exact`` enumerates all C**B configurations while that count stays at or
    below ``max_exact_configs`` and falls back to the sampled estimator
    beyond; ``sampled`` always uses the sampled estimator.
    """

    mode: str = "exact"
    max_exact_configs: int = 100_000
    sampled_config_count: int = 8192

    def __post_init__(self) -> None:
        if self.mode not in ("exact", "sampled"):
            raise ValueError(f"unknown joint mode {self.mode!r}")
        if self.max_exact_configs < 2:
            raise ValueError("max_exact_configs must cover at least the class axis")
        if self.sampled_config_count < 1:
            raise ValueError("sampled_config_count must be >= 1")


def mean_predictive(post: PosteriorSamples) -> np.ndarray:
    """Posterior-mean class probabilities, N x C (mean over the K axis)."""
    return post.probs.mean(axis=0)


def entropy(p: np.ndarray) -> float:
    """Shannon entropy -sum(p * ln p) in nats, with 0 * ln 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("entropy expects a probability vector")
    if p.min() < -1e-9:
        raise ValueError(f"negative probability {p.min()}")
    if abs(p.sum() - 1.0) > _SUM_TOL:
        raise ValueError(f"probabilities sum to {p.sum():.8f}, expected 1")
    p = np.clip(p, 0.0, None)
    return float(-(p * np.log(np.maximum(p, PROB_FLOOR))).sum())


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    """Row-wise entropy of an ... x C array of probability vectors."""
    p = np.clip(p, 0.0, None)
    return -(p * np.log(np.maximum(p, PROB_FLOOR))).sum(axis=-1)


def predictive_entropy(post: PosteriorSamples) -> np.ndarray:
    """Entropy of the posterior-mean prediction, one value per candidate."""
    return _entropy_rows(mean_predictive(post))


def expected_entropy(post: PosteriorSamples) -> np.ndarray:
    """Mean over MC draws of per-draw predictive entropies, per candidate."""
    return _entropy_rows(post.probs).mean(axis=0)


def bald_scores(post: PosteriorSamples) -> np.ndarray:
    """Mutual information between predicted label and weights, per candidate.

    Computed as predictive entropy minus expected conditional entropy and
    clamped at zero from below (negative values can only arise from float
    rounding).
    """
    scores = predictive_entropy(post) - expected_entropy(post)
    return np.maximum(scores, 0.0)


def _validate_batch(post: PosteriorSamples, batch: Sequence[int]) -> list[int]:
    batch = [int(i) for i in batch]
    if not batch:
        raise ValueError("batch must be non-empty")
    if len(set(batch)) != len(batch):
        raise ValueError("batch contains duplicate indices")
    n = post.n_candidates
    bad = [i for i in batch if i < 0 or i >= n]
    if bad:
        raise ValueError(f"batch indices out of range: {bad[:5]}")
    return batch


def exact_joint_distribution(post: PosteriorSamples, batch: Sequence[int]) -> np.ndarray:
    """Full joint label distribution over C**B configurations (exact)."""
    batch = _validate_batch(post, batch)
    k = post.n_draws
    per_draw = np.ones((k, 1))
    for idx in batch:
        per_draw = (per_draw[:, :, None] * post.probs[:, idx, None, :]).reshape(k, -1)
    return per_draw.mean(axis=0)


def _sample_configs(
    post: PosteriorSamples, batch: Sequence[int], m: int, rng: np.random.Generator
) -> np.ndarray:
    """Ancestral draws from the mixture: pick a draw k, then y_i ~ p(.|theta_k)."""
    k = post.n_draws
    c = post.n_classes
    ks = rng.integers(0, k, size=m)
    cdf = np.cumsum(post.probs[:, batch, :], axis=2)[ks]  # m x B x C
    u = rng.random((m, len(batch)))
    return np.minimum((u[:, :, None] > cdf).sum(axis=2), c - 1).astype(np.int16)


def _unique_configs(configs: np.ndarray, n_classes: int) -> np.ndarray:
    """Deduplicate configuration rows (mixed-radix codes when they fit int64)."""
    b = configs.shape[1]
    if b * np.log2(n_classes) < 62:
        powers = n_classes ** np.arange(b, dtype=np.int64)
        codes = np.unique(configs.astype(np.int64) @ powers)
        digits = np.empty((codes.size, b), dtype=np.int16)
        rem = codes.copy()
        for j in range(b):
            digits[:, j] = rem % n_classes
            rem //= n_classes
        return digits
    return np.unique(configs, axis=0)


def _score_configs(post: PosteriorSamples, batch: Sequence[int], configs: np.ndarray) -> np.ndarray:
    """Exact joint probability of each configuration row under the mixture."""
    batch_arr = np.asarray(batch, dtype=np.int64)
    gathered = post.probs[:, batch_arr[None, :], configs]  # K x s x B
    return gathered.prod(axis=2).mean(axis=0)


def sampled_joint_entropy(
    post: PosteriorSamples,
    batch: Sequence[int],
    m: int,
    rng: np.random.Generator,
) -> float:
    """Self-normalized joint-entropy estimate from m sampled configurations.

    Configurations are drawn from the joint itself, deduplicated, scored
    exactly, and renormalized over the sampled support; as coverage becomes
    complete the estimate equals the exact joint entropy.
    """
    batch = _validate_batch(post, batch)
    configs = _sample_configs(post, batch, m, rng)
    unique = _unique_configs(configs, post.n_classes)
    p = _score_configs(post, batch, unique)
    z = p.sum()
    if z <= 0.0:
        raise ValueError("sampled configurations carry no probability mass")
    w = p / z
    return float(-(w * np.log(np.maximum(w, PROB_FLOOR))).sum())


def joint_entropy(
    post: PosteriorSamples,
    batch: Sequence[int],
    cfg: JointConfig | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Entropy of the joint label distribution over a candidate batch."""
    cfg = cfg or JointConfig()
    batch = _validate_batch(post, batch)
    n_configs = post.n_classes ** len(batch)
    if cfg.mode == "exact" and n_configs <= cfg.max_exact_configs:
        joint = exact_joint_distribution(post, batch)
        joint = np.clip(joint, 0.0, None)
        return float(-(joint * np.log(np.maximum(joint, PROB_FLOOR))).sum())
    if rng is None:
        raise ValueError("sampled joint entropy requires an explicit rng stream")
    return sampled_joint_entropy(post, batch, cfg.sampled_config_count, rng)
