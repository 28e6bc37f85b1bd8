import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from albench.posterior import (
    JointConfig,
    PosteriorSamples,
    bald_scores,
    entropy,
    exact_joint_distribution,
    expected_entropy,
    joint_entropy,
    mean_predictive,
    predictive_entropy,
    sampled_joint_entropy,
)


def random_posterior(rng, k, n, c):
    raw = rng.gamma(1.0, 1.0, size=(k, n, c))
    probs = raw / raw.sum(axis=2, keepdims=True)
    return PosteriorSamples(probs, np.arange(n))


def brute_entropy(p):
    """Independent scalar re-summation, no vectorized shortcuts."""
    total = 0.0
    for v in p:
        if v > 0:
            total -= v * math.log(v)
    return total


def test_posterior_samples_validation():
    with pytest.raises(ValueError, match="sums to"):
        PosteriorSamples(np.array([[[0.5, 0.4]]]), np.array([0]))
    with pytest.raises(ValueError, match="duplicates"):
        PosteriorSamples(np.full((1, 2, 2), 0.5), np.array([0, 0]))
    with pytest.raises(ValueError, match="K x N x C"):
        PosteriorSamples(np.full((2, 2), 0.5), np.array([0, 1]))


def test_mean_predictive_k1_identity():
    probs = np.array([[[0.2, 0.8], [0.7, 0.3]]])
    post = PosteriorSamples(probs, np.array([5, 9]))
    assert np.allclose(mean_predictive(post), probs[0])


def test_mean_predictive_symmetry():
    probs = np.array([[[1.0, 0.0]], [[0.0, 1.0]]])
    post = PosteriorSamples(probs, np.array([0]))
    assert np.allclose(mean_predictive(post), [[0.5, 0.5]])


def test_mean_predictive_matches_brute_force_summation():
    rng = np.random.default_rng(0)
    post = random_posterior(rng, 3, 2, 4)
    mean = mean_predictive(post)
    for n in range(2):
        for c in range(4):
            acc = 0.0
            for k in range(3):
                acc += post.probs[k, n, c]
            assert mean[n, c] == pytest.approx(acc / 3, abs=1e-12)
    assert np.allclose(mean.sum(axis=1), 1.0, atol=1e-6)


def test_entropy_uniform_and_onehot():
    assert entropy(np.array([0.25, 0.25, 0.25, 0.25])) == pytest.approx(math.log(4), abs=1e-12)
    assert entropy(np.array([1.0, 0.0, 0.0])) == pytest.approx(0.0, abs=1e-9)


def test_entropy_derived_value():
    # frozen from an independent high-precision evaluation of -sum p ln p
    assert entropy(np.array([0.8, 0.2])) == pytest.approx(0.5004024235381879, abs=1e-12)


def test_entropy_rejects_negative():
    with pytest.raises(ValueError, match="negative"):
        entropy(np.array([1.1, -0.1]))


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6), st.randoms())
def test_entropy_permutation_invariant(raw, pyrandom):
    p = np.array(raw)
    p = p / p.sum()
    shuffled = p.copy()
    pyrandom.shuffle(shuffled)
    assert entropy(p) == pytest.approx(entropy(np.array(shuffled)), abs=1e-12)


def test_predictive_entropy_trivial_cases():
    onehot = np.zeros((4, 3, 3))
    onehot[:, :, 0] = 1.0
    post = PosteriorSamples(onehot, np.arange(3))
    assert np.allclose(predictive_entropy(post), 0.0, atol=1e-9)

    flip = np.array([[[1.0, 0.0]], [[0.0, 1.0]]])
    post = PosteriorSamples(flip, np.array([0]))
    assert predictive_entropy(post)[0] == pytest.approx(math.log(2), abs=1e-12)


def test_predictive_entropy_matches_composition_oracle():
    rng = np.random.default_rng(1)
    post = random_posterior(rng, 5, 7, 4)
    expected = [brute_entropy(row) for row in mean_predictive(post)]
    assert np.allclose(predictive_entropy(post), expected, atol=1e-10)


def test_expected_entropy_trivial_and_oracle():
    onehot = np.zeros((3, 2, 4))
    onehot[0, :, 1] = 1.0
    onehot[1, :, 0] = 1.0
    onehot[2, :, 3] = 1.0
    post = PosteriorSamples(onehot, np.arange(2))
    assert np.allclose(expected_entropy(post), 0.0, atol=1e-9)

    rng = np.random.default_rng(2)
    post = random_posterior(rng, 1, 4, 3)
    assert np.allclose(expected_entropy(post), predictive_entropy(post), atol=1e-12)

    post = random_posterior(rng, 6, 5, 3)
    oracle = [
        np.mean([brute_entropy(post.probs[k, n]) for k in range(6)]) for n in range(5)
    ]
    assert np.allclose(expected_entropy(post), oracle, atol=1e-10)


def test_bald_scores_identical_slices_zero():
    rng = np.random.default_rng(3)
    single = random_posterior(rng, 1, 6, 4).probs
    post = PosteriorSamples(np.repeat(single, 5, axis=0), np.arange(6))
    assert np.allclose(bald_scores(post), 0.0, atol=1e-9)


def test_bald_scores_two_draw_example():
    probs = np.array([[[0.8, 0.2]], [[0.2, 0.8]]])
    post = PosteriorSamples(probs, np.array([0]))
    # ln 2 - H([0.8, 0.2]) evaluated by independent script
    assert bald_scores(post)[0] == pytest.approx(0.19274475702175742, abs=1e-12)


def test_bald_scores_bounds_random_tensors():
    rng = np.random.default_rng(4)
    for _ in range(50):
        post = random_posterior(rng, rng.integers(1, 8), rng.integers(1, 10), rng.integers(2, 6))
        scores = bald_scores(post)
        assert (scores >= 0.0).all()
        assert (scores <= predictive_entropy(post) + 1e-9).all()


def test_joint_entropy_singleton_reduces_to_predictive_entropy():
    rng = np.random.default_rng(5)
    post = random_posterior(rng, 4, 6, 3)
    pe = predictive_entropy(post)
    for i in range(6):
        assert joint_entropy(post, [i]) == pytest.approx(pe[i], abs=1e-10)


def test_joint_entropy_k1_sums_marginals():
    rng = np.random.default_rng(6)
    post = random_posterior(rng, 1, 5, 3)
    pe = predictive_entropy(post)
    batch = [0, 2, 4]
    assert joint_entropy(post, batch) == pytest.approx(pe[batch].sum(), abs=1e-9)


def test_joint_entropy_two_candidate_enumeration_oracle():
    probs = np.array(
        [[[0.8, 0.2], [0.6, 0.4]], [[0.2, 0.8], [0.3, 0.7]]]
    )
    post = PosteriorSamples(probs, np.array([0, 1]))
    # enumerate the 4 configurations by hand: P(y0,y1) = mean_k p_k(y0) p_k(y1)
    oracle = 0.0
    for y0 in range(2):
        for y1 in range(2):
            p = 0.5 * (probs[0, 0, y0] * probs[0, 1, y1] + probs[1, 0, y0] * probs[1, 1, y1])
            oracle -= p * math.log(p)
    assert joint_entropy(post, [0, 1]) == pytest.approx(oracle, abs=1e-12)


def test_joint_entropy_validation():
    rng = np.random.default_rng(7)
    post = random_posterior(rng, 2, 3, 2)
    with pytest.raises(ValueError, match="non-empty"):
        joint_entropy(post, [])
    with pytest.raises(ValueError, match="duplicate"):
        joint_entropy(post, [1, 1])


def test_joint_entropy_exact_monotone_in_batch():
    rng = np.random.default_rng(8)
    for _ in range(25):
        post = random_posterior(rng, rng.integers(1, 6), 5, rng.integers(2, 4))
        order = rng.permutation(5)
        prev = 0.0
        for size in range(1, 5):
            h = joint_entropy(post, order[:size].tolist())
            assert h >= prev - 1e-9
            prev = h


def test_joint_entropy_exceeds_max_member_entropy():
    rng = np.random.default_rng(9)
    post = random_posterior(rng, 4, 4, 3)
    pe = predictive_entropy(post)
    batch = [0, 1, 3]
    assert joint_entropy(post, batch) >= pe[batch].max() - 1e-9


def test_sampled_joint_entropy_converges_to_exact():
    rng = np.random.default_rng(10)
    worst = 0.0
    for trial in range(20):
        k = int(rng.integers(2, 8))
        c = int(rng.integers(2, 5))
        b = int(rng.integers(2, 5))
        while c**b > 1024:
            b -= 1
        post = random_posterior(rng, k, b, c)
        batch = list(range(b))
        exact = joint_entropy(post, batch, JointConfig(mode="exact"))
        est = sampled_joint_entropy(post, batch, 65536, np.random.default_rng(1000 + trial))
        worst = max(worst, abs(est - exact))
    assert worst <= 0.02


def test_joint_entropy_sampled_mode_requires_rng():
    rng = np.random.default_rng(11)
    post = random_posterior(rng, 2, 3, 2)
    with pytest.raises(ValueError, match="rng"):
        joint_entropy(post, [0, 1], JointConfig(mode="sampled"))


def test_joint_entropy_exact_fallback_beyond_threshold_uses_sampling():
    rng = np.random.default_rng(12)
    post = random_posterior(rng, 3, 4, 3)
    cfg = JointConfig(mode="exact", max_exact_configs=8, sampled_config_count=50000)
    est = joint_entropy(post, [0, 1, 2], cfg, rng=np.random.default_rng(0))
    exact = joint_entropy(post, [0, 1, 2])
    assert est == pytest.approx(exact, abs=0.05)


def test_exact_joint_distribution_normalizes():
    rng = np.random.default_rng(13)
    post = random_posterior(rng, 3, 4, 3)
    joint = exact_joint_distribution(post, [0, 2, 3])
    assert joint.shape == (27,)
    assert joint.sum() == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_bald_bounds_property(seed):
    rng = np.random.default_rng(seed)
    post = random_posterior(
        rng, int(rng.integers(1, 9)), int(rng.integers(1, 17)), int(rng.integers(2, 7))
    )
    scores = bald_scores(post)
    pe = predictive_entropy(post)
    assert (scores >= 0.0).all()
    assert (scores <= pe + 1e-9).all()
    assert (pe <= math.log(post.n_classes) + 1e-9).all()
