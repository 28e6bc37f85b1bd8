"""The five query methods behind one interface.

Each selector takes a QueryContext (current label state plus whatever model
outputs the method needs) and returns exactly ``query_size`` distinct
unlabeled pool indices. Ties are always broken by ascending pool index so
runs reproduce bit-exactly across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import LabelState
from .posterior import (
    JointConfig,
    PosteriorSamples,
    _sample_configs,
    _unique_configs,
    bald_scores,
    expected_entropy,
    predictive_entropy,
)
from .seeding import spawn_rng

QM_NAMES = ("random", "entropy", "bald", "batchbald", "coreset")


@dataclass
class QueryContext:
    """Inputs for one acquisition step.

    ``posterior`` must cover exactly the unlabeled candidates in ascending
    pool-index order; ``embeddings`` must cover labeled and unlabeled samples,
    with ``embedding_ids`` mapping rows to pool indices.
    """

    label_state: LabelState
    query_size: int
    posterior: PosteriorSamples | None = None
    embeddings: np.ndarray | None = None
    embedding_ids: np.ndarray | None = None
    rng: np.random.Generator | None = None

    def __post_init__(self) -> None:
        if self.query_size < 1:
            raise ValueError("query_size must be >= 1")
        if self.query_size > len(self.label_state.unlabeled):
            raise ValueError(
                f"query_size {self.query_size} exceeds unlabeled pool "
                f"{len(self.label_state.unlabeled)}"
            )
        candidates = self.label_state.candidates()
        if self.posterior is not None:
            if not np.array_equal(self.posterior.sample_ids, candidates):
                raise ValueError(
                    "posterior sample_ids must equal the unlabeled set in ascending order"
                )
        if self.embeddings is not None:
            if self.embedding_ids is None:
                raise ValueError("embeddings require an embedding_ids index map")
            emb = np.asarray(self.embeddings, dtype=np.float64)
            ids = np.asarray(self.embedding_ids, dtype=np.int64)
            if emb.ndim != 2 or emb.shape[0] != ids.shape[0]:
                raise ValueError("embeddings must have one row per embedding id")
            covered = set(ids.tolist())
            needed = set(self.label_state.labeled) | self.label_state.unlabeled
            if not needed <= covered:
                raise ValueError("embeddings must cover labeled and unlabeled samples")
            self.embeddings = emb
            self.embedding_ids = ids

    def candidates(self) -> np.ndarray:
        return self.label_state.candidates()


@dataclass(frozen=True)
class QuerySelection:
    """An ordered query batch plus optional per-candidate scores."""

    chosen: tuple[int, ...]
    qm_name: str
    scores: np.ndarray | None = None

    def __post_init__(self) -> None:
        if len(set(self.chosen)) != len(self.chosen):
            raise ValueError("chosen indices must be distinct")


def _check_selection(ctx: QueryContext, chosen: list[int]) -> tuple[int, ...]:
    if len(chosen) != ctx.query_size:
        raise ValueError("selection size mismatch")
    bad = [i for i in chosen if i not in ctx.label_state.unlabeled]
    if bad:
        raise ValueError(f"selected indices not unlabeled: {bad[:5]}")
    return tuple(int(i) for i in chosen)


def random_select(ctx: QueryContext) -> QuerySelection:
    """Uniform draw without replacement from the unlabeled pool."""
    if ctx.rng is None:
        raise ValueError("random_select requires ctx.rng")
    candidates = ctx.candidates()
    chosen = ctx.rng.choice(candidates, size=ctx.query_size, replace=False)
    return QuerySelection(_check_selection(ctx, chosen.tolist()), qm_name="random")


def topk_select(scores: np.ndarray, ctx: QueryContext, qm_name: str = "topk") -> QuerySelection:
    """The query_size highest-scoring candidates; ties by ascending pool index."""
    candidates = ctx.candidates()
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != candidates.shape:
        raise ValueError(
            f"scores length {scores.shape} does not match candidate count {candidates.shape}"
        )
    # lexsort's last key is primary: sort by descending score, then pool index.
    order = np.lexsort((candidates, -scores))
    chosen = candidates[order[: ctx.query_size]]
    return QuerySelection(_check_selection(ctx, chosen.tolist()), qm_name=qm_name, scores=scores)


def entropy_select(ctx: QueryContext) -> QuerySelection:
    """Highest predictive entropy of the MC-mean prediction."""
    if ctx.posterior is None:
        raise ValueError("entropy_select requires a posterior over the unlabeled set")
    return topk_select(predictive_entropy(ctx.posterior), ctx, qm_name="entropy")


def bald_select(ctx: QueryContext) -> QuerySelection:
    """Highest mutual information between predicted label and weights."""
    if ctx.posterior is None:
        raise ValueError("bald_select requires a posterior over the unlabeled set")
    return topk_select(bald_scores(ctx.posterior), ctx, qm_name="bald")


def batchbald_select(ctx: QueryContext, cfg: JointConfig | None = None) -> QuerySelection:
    """Greedy batch construction maximizing joint mutual information.

    At each round the candidate maximizing

        H(Y_batch, Y_c) - sum over batch+c of E_k[H(Y_i | theta_k)]

    joins the batch. The running joint distribution is maintained exactly
    while the configuration count stays within ``cfg.max_exact_configs``;
    beyond that each round scores candidates with the sampled joint-entropy
    estimator on a fresh substream.
    """
    if ctx.posterior is None:
        raise ValueError("batchbald_select requires a posterior over the unlabeled set")
    cfg = cfg or JointConfig()
    post = ctx.posterior
    candidates = ctx.candidates()
    probs = post.probs
    k, n, c = probs.shape

    cond = expected_entropy(post)
    active = np.ones(n, dtype=bool)
    batch_positions: list[int] = []
    chosen: list[int] = []
    cond_sum = 0.0
    first_round_scores: np.ndarray | None = None

    # Exact running joint over configurations of the chosen batch, k x m.
    joint = np.ones((k, 1)) if cfg.mode == "exact" else None

    for _ in range(ctx.query_size):
        scores = np.full(n, -np.inf)
        if joint is not None and joint.shape[1] * c <= cfg.max_exact_configs:
            weights = joint  # exact support: every configuration of the batch
            normalizer = 1.0
        else:
            # Sampled round: ancestral draws of the current batch's label
            # configurations on a fresh substream, deduplicated and scored
            # exactly; the support is shared by all candidates and the
            # candidate's own class axis is enumerated exactly. The common
            # normalizer keeps the self-normalized entropies comparable.
            joint = None  # exact joint no longer maintained past the threshold
            if ctx.rng is None:
                raise ValueError("sampled-mode batchbald_select requires ctx.rng")
            round_rng = spawn_rng(int(ctx.rng.integers(0, 2**63 - 1)))
            if batch_positions:
                configs = _sample_configs(
                    post, batch_positions, cfg.sampled_config_count, round_rng
                )
                unique = _unique_configs(configs, c)
                batch_arr = np.asarray(batch_positions, dtype=np.int64)
                weights = probs[:, batch_arr[None, :], unique].prod(axis=2)  # K x s
            else:
                weights = np.ones((k, 1))
            normalizer = float(weights.mean(axis=0).sum())
        # Extending the (possibly sampled) joint by candidate i gives mixture
        # weights (weights.T @ probs[:, i, :]) / K; one GEMM covers every i.
        m = weights.shape[1]
        ext = weights.T @ probs.reshape(k, n * c) / k
        ext = np.clip(ext.reshape(m, n, c) / normalizer, 0.0, None)
        joint_h = -(ext * np.log(np.maximum(ext, 1e-12))).sum(axis=(0, 2))
        scores[active] = joint_h[active] - (cond_sum + cond[active])

        best = int(np.argmax(scores))  # first max = smallest pool index on ties
        if first_round_scores is None:
            first_round_scores = np.where(active, scores, np.nan)
        batch_positions.append(best)
        chosen.append(int(candidates[best]))
        cond_sum += cond[best]
        active[best] = False
        if joint is not None:
            joint = (joint[:, :, None] * probs[:, best, None, :]).reshape(k, -1)

    return QuerySelection(
        _check_selection(ctx, chosen), qm_name="batchbald", scores=first_round_scores
    )


def coreset_select(ctx: QueryContext) -> QuerySelection:
    """K-Center greedy in representation space.

    Repeatedly picks the unlabeled candidate farthest (Euclidean) from its
    nearest labeled-or-already-chosen point, updating nearest distances
    incrementally.
    """
    if ctx.embeddings is None or ctx.embedding_ids is None:
        raise ValueError("coreset_select requires embeddings with an index map")
    if not ctx.label_state.labeled:
        raise ValueError("coreset_select requires a non-empty labeled set")
    row_of = {int(idx): r for r, idx in enumerate(ctx.embedding_ids)}
    candidates = ctx.candidates()
    cand_rows = np.array([row_of[int(i)] for i in candidates])
    labeled_rows = np.array([row_of[int(i)] for i in ctx.label_state.labeled])
    cand_emb = ctx.embeddings[cand_rows]
    labeled_emb = ctx.embeddings[labeled_rows]

    min_dist = np.full(cand_emb.shape[0], np.inf)
    for start in range(0, labeled_emb.shape[0], 256):  # bound the distance block
        diff = cand_emb[:, None, :] - labeled_emb[None, start : start + 256, :]
        min_dist = np.minimum(min_dist, np.sqrt((diff * diff).sum(axis=2)).min(axis=1))

    chosen: list[int] = []
    for _ in range(ctx.query_size):
        best = int(np.argmax(min_dist))  # ties resolve to the smallest pool index
        chosen.append(int(candidates[best]))
        delta = cand_emb - cand_emb[best]
        dist_new = np.sqrt((delta * delta).sum(axis=1))
        min_dist = np.minimum(min_dist, dist_new)
        min_dist[best] = -np.inf
    return QuerySelection(_check_selection(ctx, chosen), qm_name="coreset")


def select_queries(
    qm_name: str, ctx: QueryContext, joint_cfg: JointConfig | None = None
) -> QuerySelection:
    """Dispatch a query-method name to its selector."""
    if qm_name == "random":
        return random_select(ctx)
    if qm_name == "entropy":
        return entropy_select(ctx)
    if qm_name == "bald":
        return bald_select(ctx)
    if qm_name == "batchbald":
        return batchbald_select(ctx, joint_cfg)
    if qm_name == "coreset":
        return coreset_select(ctx)
    raise ValueError(f"unknown query method {qm_name!r}")
