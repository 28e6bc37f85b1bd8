"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v`` (the directional study in
criterion 9 trains 1200 models and takes a few minutes).
"""

import itertools
import json
import logging
import math
from decimal import Decimal, getcontext

import numpy as np
import pytest

from albench.bench import (
    ExperimentConfig,
    aggregate,
    directional_study_config,
    load_records,
    run_experiment,
    weighting_ablation,
)
from albench.cli import cli_main
from albench.data import LongTailSpec, longtail_counts, min_val_size
from albench.domain import ConfusionMatrix, LabelState
from albench.metrics import accuracy, mean_recall
from albench.model import init_layers, loss_and_grads
from albench.posterior import (
    PosteriorSamples,
    bald_scores,
    joint_entropy,
    predictive_entropy,
    sampled_joint_entropy,
)
from albench.query import QueryContext, bald_select, batchbald_select, coreset_select

logging.getLogger("albench.model").setLevel(logging.ERROR)


def report(criterion: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {criterion}" + (f" — {detail}" if detail else ""))
    assert ok, f"{criterion}: {detail}"


def random_posterior(rng, k, n, c):
    raw = rng.gamma(1.0, 1.0, size=(k, n, c))
    return PosteriorSamples(raw / raw.sum(axis=2, keepdims=True), np.arange(n))


# label-regime reference cells: classes -> regime -> (start, query, final, val)
REGIME_REFERENCE = {
    8: {
        "low": (40, 40, 400, 200),
        "medium": (200, 200, 2000, 800),
        "high": (800, 800, 8000, 3799),
    },
    10: {
        "low": (50, 50, 500, 250),
        "medium": (250, 250, 2500, 1250),
        "high": (1000, 1000, 10000, 5000),
    },
    11: {
        "low": (55, 55, 550, 275),
        "medium": (275, 275, 2750, 1375),
        "high": (1100, 1100, 11000, 5500),
    },
    100: {
        "low": (500, 500, 5000, 2500),
        "medium": (1000, 1000, 10000, 5000),
        "high": (5000, 5000, 25000, 5000),
    },
}

LT10_REFERENCE = [4500, 2913, 1886, 1221, 790, 512, 331, 214, 139, 90]


def test_criterion_01_regime_tables(capsys):
    for classes, expected in REGIME_REFERENCE.items():
        assert cli_main(["regimes", "--classes", str(classes)]) == 0
        lines = capsys.readouterr().out.strip().split("\n")[1:]
        for line in lines:
            name, start, query, steps, final, val = line.split()
            ref = expected[name]
            cells = (int(start), int(query), int(final), int(val))
            assert cells == ref, f"classes={classes} {name}: {cells} != {ref}"
    report("criterion 1: regime tables for C in {8, 10, 11, 100} match exactly", True)


def test_criterion_02_longtail_reproduction():
    counts = longtail_counts(LongTailSpec(4500, 50.0, 10))
    diff = np.abs(counts - np.array(LT10_REFERENCE)).max()
    report("criterion 2: 10-class rho=50 long-tail counts within +-1", diff <= 1,
           f"max deviation {diff}")


def test_criterion_03_information_theory_suite():
    rng = np.random.default_rng(314)
    n_tensors = 1000
    worst_gap = 0.0
    for i in range(n_tensors):
        k = int(rng.integers(1, 9))
        n = int(rng.integers(1, 17))
        c = int(rng.integers(2, 7))
        post = random_posterior(rng, k, n, c)

        scores = bald_scores(post)
        pe = predictive_entropy(post)
        assert (scores >= 0.0).all()
        assert (scores <= pe + 1e-9).all()
        assert (pe <= math.log(c) + 1e-9).all()

        # exact joint entropy is monotone under batch growth
        max_b = min(n, int(math.floor(math.log(1024) / math.log(c))), 4)
        if max_b >= 2:
            members = rng.permutation(n)[:max_b].tolist()
            prev = 0.0
            for size in range(1, max_b + 1):
                h = joint_entropy(post, members[:size])
                assert h >= prev - 1e-9
                prev = h
            # sampled estimate within 0.02 nats of exact at m=65536
            exact = prev
            est = sampled_joint_entropy(
                post, members, 65536, np.random.default_rng(10_000 + i)
            )
            worst_gap = max(worst_gap, abs(est - exact))
            assert abs(est - exact) <= 0.02
    report(
        "criterion 3: BALD/entropy bounds, joint monotonicity, sampled accuracy "
        f"over {n_tensors} tensors",
        True,
        f"worst sampled-vs-exact gap {worst_gap:.4f} nats",
    )


def test_criterion_04_reduction_identities():
    rng = np.random.default_rng(271)
    for trial in range(200):
        k = int(rng.integers(2, 7))
        n = int(rng.integers(2, 12))
        c = int(rng.integers(2, 5))
        post = random_posterior(rng, k, n, c)
        state = LabelState.from_pool(range(n), labeled=[])
        ctx_a = QueryContext(state, 1, posterior=post, rng=np.random.default_rng(trial))
        ctx_b = QueryContext(state, 1, posterior=post, rng=np.random.default_rng(trial))
        assert batchbald_select(ctx_a).chosen == bald_select(ctx_b).chosen

        post1 = random_posterior(rng, 1, n, c)
        batch = list(range(min(n, 4)))
        marginal_sum = predictive_entropy(post1)[batch].sum()
        assert abs(joint_entropy(post1, batch) - marginal_sum) <= 1e-9
    report("criterion 4: batchbald(B=1) == bald argmax; K=1 joint == sum of marginals", True)


def test_criterion_05_k_center_quality():
    rng = np.random.default_rng(505)

    def cover_radius(points, centers):
        d = np.sqrt(((points[:, None, :] - points[None, centers, :]) ** 2).sum(-1))
        return d.min(axis=1).max()

    worst_ratio = 0.0
    for _ in range(50):
        n = int(rng.integers(6, 11))
        b = int(rng.integers(2, 4))
        points = rng.standard_normal((n, 2))
        state = LabelState.from_pool(range(n), labeled=[0])
        sel = coreset_select(
            QueryContext(state, b, embeddings=points, embedding_ids=np.arange(n))
        )
        greedy = cover_radius(points, [0, *sel.chosen])
        optimal = min(
            cover_radius(points, [0, *subset])
            for subset in itertools.combinations(range(1, n), b)
        )
        ratio = greedy / max(optimal, 1e-12)
        worst_ratio = max(worst_ratio, ratio)
        assert greedy <= 2.0 * optimal + 1e-9
    report("criterion 5: greedy k-center within 2x brute-force optimum on 50 instances",
           True, f"worst ratio {worst_ratio:.3f}")


def test_criterion_06_gradient_check():
    rng = np.random.default_rng(606)
    worst = 0.0
    for trial in range(20):
        layers = init_layers([2, 2, 2], np.random.default_rng(trial))
        x = rng.standard_normal((4, 2))
        y = rng.integers(0, 2, size=4)
        cw = np.array([1.0, 1.2])
        wd = 0.01
        _, grads = loss_and_grads(layers, x, y, cw, wd)
        eps = 1e-6
        for li in range(2):
            for pi in range(2):
                it = np.nditer(layers[li][pi], flags=["multi_index"])
                for _ in it:
                    idx = it.multi_index
                    bumped = [(w.copy(), b.copy()) for w, b in layers]
                    bumped[li][pi][idx] += eps
                    up, _ = loss_and_grads(bumped, x, y, cw, wd)
                    bumped[li][pi][idx] -= 2 * eps
                    down, _ = loss_and_grads(bumped, x, y, cw, wd)
                    numeric = (up - down) / (2 * eps)
                    analytic = grads[li][pi][idx]
                    rel = abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-8)
                    worst = max(worst, rel)
                    assert rel <= 1e-4
    report("criterion 6: analytic gradients match central differences on 2-2-2 net",
           True, f"worst relative error {worst:.2e}")


def test_criterion_07_metric_identity_and_hoeffding():
    rng = np.random.default_rng(707)
    for _ in range(100):
        c = int(rng.integers(2, 7))
        support = int(rng.integers(3, 40))
        counts = np.stack([rng.multinomial(support, np.ones(c) / c) for _ in range(c)])
        cm = ConfusionMatrix(counts)
        assert abs(mean_recall(cm) - accuracy(cm)) <= 1e-12

    # independent high-precision verification of the Hoeffding bound
    getcontext().prec = 50
    exact = Decimal(2 / Decimal("0.05")).ln() / (2 * Decimal("0.01") ** 2)
    assert int(exact.to_integral_value(rounding="ROUND_CEILING")) == 18445
    assert min_val_size(0.01, 0.05) == 18445
    report("criterion 7: mean_recall == accuracy on balanced matrices; "
           "Hoeffding(0.01, 0.05) == 18445", True)


def _determinism_config():
    return ExperimentConfig(
        dataset_classes=3,
        dataset_dim=4,
        dataset_per_class=60,
        dataset_separation=2.5,
        dataset_seed=11,
        dataset_name="tiny",
        regime_override_steps=2,
        qm_name="bald",
        lr_grid=(0.1, 0.01),
        wd_grid=(5e-4,),
        noise_grid=(0.0,),
        hidden_sizes=(16, 8),
        epochs=5,
        batch_size=16,
        upsample_target=120,
        mc_samples=8,
        seeds=(1, 2, 3),
        metric="accuracy",
    )


def test_criterion_08_pipeline_determinism(tmp_path):
    runs = []
    for name, jobs in (("a", 1), ("b", 1), ("par", 2)):
        out = tmp_path / name
        cfg = _determinism_config()
        run_experiment(cfg, out, jobs=jobs)
        curves = {qm: aggregate(recs) for qm, recs in load_records(out).items()}
        from albench.bench import write_report_csv

        write_report_csv(curves, out / "report.csv")
        runs.append(out)
    names = [p.name for p in sorted(runs[0].iterdir())]
    assert names == sorted(
        ["bald_seed1.json", "bald_seed2.json", "bald_seed3.json",
         "bald_sweep.json", "report.csv"]
    )
    for name in names:
        ref = (runs[0] / name).read_bytes()
        assert (runs[1] / name).read_bytes() == ref, f"rerun differs: {name}"
        assert (runs[2] / name).read_bytes() == ref, f"parallel differs: {name}"
    report("criterion 8: sweep + 3 seeds + report byte-identical on rerun and with jobs=2",
           True)


STUDY_SEEDS = tuple(range(30))


@pytest.fixture(scope="module")
def directional_study(tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    finals = {}
    for qm in ("random", "coreset", "bald", "batchbald"):
        cfg = directional_study_config(qm, seeds=STUDY_SEEDS)
        run_experiment(cfg, out)
        finals[qm] = aggregate(load_records(out)[qm]).mean[-1]
    return finals


def test_criterion_09_directional_study(directional_study):
    finals = directional_study
    detail = ", ".join(f"{qm}={v:.4f}" for qm, v in sorted(finals.items()))
    tol = 0.005
    ok_a = (
        finals["coreset"] >= finals["random"] - tol
        and finals["batchbald"] >= finals["random"] - tol
        and (finals["coreset"] > finals["random"] or finals["batchbald"] > finals["random"])
    )
    ok_b = finals["batchbald"] >= finals["bald"] - tol
    report("criterion 9a: core-set/batchbald vs random on the long-tail study", ok_a, detail)
    report("criterion 9b: batchbald vs bald on the long-tail study", ok_b, detail)


def test_criterion_10_weighting_ablation_harness(tmp_path):
    cfg = directional_study_config("random", seeds=(0, 1, 2))
    csv_path = weighting_ablation(cfg, tmp_path)
    lines = csv_path.read_text().strip().split("\n")
    header = "qm,step,n_labeled,weighted_mean,weighted_sd,plain_mean,plain_sd,delta"
    assert lines[0] == header
    assert len(lines) == 1 + 10  # header + steps 0..9
    for line in lines[1:]:
        cells = line.split(",")
        assert cells[0] == "random"
        assert float(cells[7]) == pytest.approx(
            float(cells[3]) - float(cells[5]), abs=1e-12
        )
    weighted_runs = load_records(tmp_path / "weighted")["random"]
    plain_runs = load_records(tmp_path / "plain")["random"]
    assert len(weighted_runs) == len(plain_runs) == 3
    weighted_cfg = json.loads(
        (tmp_path / "weighted" / "random_seed0.json").read_text()
    )["config"]
    plain_cfg = json.loads((tmp_path / "plain" / "random_seed0.json").read_text())["config"]
    assert weighted_cfg["model.loss_weighting"] == "balanced"
    assert plain_cfg["model.loss_weighting"] == "uniform"
    report("criterion 10: weighted-vs-plain CE ablation runs both arms and emits paired CSV",
           True)
