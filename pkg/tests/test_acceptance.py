"""Top-level acceptance gate: one test per shipped guarantee.

Each test prints a single PASS line (visible with -s); a failure of any
test here means the package does not meet its headline contract.
"""

import json
import time

import numpy as np
import pytest

from typelink.categories import CategoryVocab, expand_category
from typelink.cli import main, read_predictions
from typelink.evaluation import typing_metrics
from typelink.ingest import read_examples
from typelink.linker import EntityCategoryIndex, link, most_frequent_entity, score_candidates
from typelink.model import FeatureVector, TrainConfig, TypingModel, loss_and_grad
from typelink.prior import CandidateSet, PriorTable, accumulate
from typelink.synthetic import BenchmarkSpec, write_benchmark

from conftest import pipeline_argv


def test_criterion_01_summed_type_scores_pick_the_richer_candidate():
    """Two candidates, fixed posterior: scores 1.75 vs 0.6, higher one wins."""
    posterior = np.array([0.9, 0.85, 0.3, 0.3])
    index = EntityCategoryIndex()
    index.put("Big_Bang", [0, 1])
    index.put("Big_Bang_Theory", [2, 3])
    cands = CandidateSet("big bang", [("Big_Bang", 0.5), ("Big_Bang_Theory", 0.5)])
    prior = PriorTable()
    prior.add("big bang", "Big_Bang", 1)
    prior.add("big bang", "Big_Bang_Theory", 1)

    pred = link(posterior, cands, index, prior)
    assert dict(pred.scores)["Big_Bang"] == 1.75
    assert dict(pred.scores)["Big_Bang_Theory"] == 0.6
    assert pred.chosen == "Big_Bang"
    assert pred.used_backoff is False

    best = min(_timed(lambda: link(posterior, cands, index, prior))
               for _ in range(20))
    assert best < 1e-3
    print(f"PASS criterion 1: summed scores 1.75 vs 0.6, fastest call {best * 1e6:.1f} us")


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def test_criterion_02_category_expansion_goldens():
    got = expand_category("Cities in New York (state)")
    assert set(got) == {"Cities in New York (state)", "Cities",
                        "in New York (state)"}
    got = expand_category("Populated places established in 1624")
    assert set(got) == {"Populated places established in 1624", "Populated",
                        "places", "established", "in 1624"}
    print("PASS criterion 2: both expansion goldens match exactly")


def test_criterion_03_candidate_scores_match_brute_force_oracle():
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    for _ in range(1000):
        n_cats = int(rng.integers(1, 51))
        n_cands = int(rng.integers(1, 11))
        posterior = rng.uniform(0.0, 1.0, size=n_cats)
        index = EntityCategoryIndex()
        entities = []
        for c in range(n_cands):
            name = f"E{c}"
            entities.append((name, 1.0 / n_cands))
            k = int(rng.integers(0, n_cats + 1))
            index.put(name, rng.choice(n_cats, size=k, replace=False))
        scored = score_candidates(posterior, CandidateSet("m", entities), index)
        for entity, got in scored:
            expected = 0.0
            for cat_id in index.get(entity):
                expected += float(posterior[cat_id])
            assert abs(got - expected) <= 1e-12
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    print(f"PASS criterion 3: 1000 oracle instances within 1e-12 in {elapsed:.2f}s")


def test_criterion_04_analytic_gradients_match_finite_differences():
    rng = np.random.default_rng(404)
    step = 1e-5
    t0 = time.perf_counter()
    for trial in range(100):
        n_cats = int(rng.integers(2, 5))
        dim = int(rng.integers(6, 14))
        vocab = CategoryVocab([f"c{i}" for i in range(n_cats)])
        model = TypingModel.zeros(vocab, feature_dim=dim)
        model.weights[:] = rng.normal(scale=0.7, size=model.weights.shape)
        model.bias[:] = rng.normal(scale=0.3, size=n_cats)
        batch = []
        for _ in range(int(rng.integers(1, 4))):
            k = int(rng.integers(1, dim))
            ids = np.sort(rng.choice(dim, size=k, replace=False))
            vals = rng.uniform(0.5, 2.0, size=k)
            y = (rng.random(n_cats) < 0.5).astype(float)
            batch.append((FeatureVector(ids, vals), y))
        l2 = 0.0 if trial % 2 == 0 else float(rng.uniform(0.0, 0.1))

        _, grads = loss_and_grad(model, batch, l2)
        num_w = np.zeros_like(model.weights)
        for i in range(n_cats):
            for j in range(dim):
                orig = model.weights[i, j]
                model.weights[i, j] = orig + step
                up, _ = loss_and_grad(model, batch, l2)
                model.weights[i, j] = orig - step
                down, _ = loss_and_grad(model, batch, l2)
                model.weights[i, j] = orig
                num_w[i, j] = (up - down) / (2 * step)
        num_b = np.zeros_like(model.bias)
        for i in range(n_cats):
            orig = model.bias[i]
            model.bias[i] = orig + step
            up, _ = loss_and_grad(model, batch, l2)
            model.bias[i] = orig - step
            down, _ = loss_and_grad(model, batch, l2)
            model.bias[i] = orig
            num_b[i] = (up - down) / (2 * step)

        def rel(a, b):
            return np.linalg.norm(a - b) / max(np.linalg.norm(a),
                                               np.linalg.norm(b), 1e-12)

        assert rel(grads.weights, num_w) <= 1e-4
        assert rel(grads.bias, num_b) <= 1e-4
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    print(f"PASS criterion 4: 100 gradient checks within 1e-4 in {elapsed:.2f}s")


def test_criterion_05_anchor_count_prior_and_threshold_clip():
    pairs = ([("ant", "Ant")] * 960 + [("ant", "Ant_(comedy)")] * 8
             + [("ant", "Apache_Ant")] * 32)
    table = accumulate(pairs)
    assert table.prob("ant", "Ant") == 0.96
    assert table.prob("ant", "Ant_(comedy)") == 0.008
    assert table.prob("ant", "Apache_Ant") == 0.032
    cands = table.candidates("ant", 0.05)
    assert "Apache_Ant" not in cands.entities()
    assert cands.candidates == [("Ant", 0.96)]
    print("PASS criterion 5: prior probabilities 0.96/0.008 exact, 0.05 clip applied")


def test_criterion_06_synthetic_benchmark_beats_skewed_prior(tmp_path):
    """Unseen mention-entity pairs: typing wins where the prior is misleading."""
    spec = BenchmarkSpec()
    paths = write_benchmark(str(tmp_path / "corpus"), spec)
    workdir = tmp_path / "run"
    t0 = time.perf_counter()
    code = main(pipeline_argv(paths, workdir,
                              **{"--feature-dim": str(1 << 15), "--epochs": "3"}))
    elapsed = time.perf_counter() - t0
    assert code == 0
    assert elapsed < 120.0

    report = json.loads((workdir / "report.json").read_text(encoding="utf-8"))
    accuracy = report["linking_accuracy"]

    table = PriorTable.load(str(workdir / "prior.tsv"))
    eval_examples = read_examples(str(workdir / "eval_mentions.jsonl"))
    hits = 0
    for ex in eval_examples:
        cands = table.candidates(ex.mention, 0.05)
        if len(cands) and most_frequent_entity(cands) == ex.entity:
            hits += 1
    mfe_accuracy = hits / len(eval_examples)

    train_pairs = {(ex.mention, ex.entity)
                   for ex in read_examples(str(workdir / "train_mentions.jsonl"))}
    eval_pairs = {(ex.mention, ex.entity) for ex in eval_examples}
    assert not (train_pairs & eval_pairs), "test pairs leaked into training data"

    assert mfe_accuracy <= 0.60
    assert accuracy >= 0.90
    assert accuracy > mfe_accuracy
    print(f"PASS criterion 6: accuracy {accuracy:.3f} > prior baseline "
          f"{mfe_accuracy:.3f} on unseen pairs in {elapsed:.1f}s")


def test_criterion_07_pipeline_is_byte_deterministic(small_corpus, tmp_path):
    _, paths = small_corpus
    outputs = []
    for name in ("first", "second"):
        workdir = tmp_path / name
        assert main(pipeline_argv(paths, workdir)) == 0
        outputs.append(workdir)
    for artifact in ("model.json", "predictions.jsonl", "report.json",
                     "vocab.txt", "prior.tsv", "train_mentions.jsonl",
                     "eval_mentions.jsonl"):
        a = (outputs[0] / artifact).read_bytes()
        b = (outputs[1] / artifact).read_bytes()
        assert a == b, f"{artifact} differs between identical runs"
    print("PASS criterion 7: two seed-13 single-worker runs byte-identical")


def test_criterion_08_bucketed_metrics_match_hand_computation():
    n = 10002
    vocab = [f"c{i:05d}" for i in range(n)]
    a, b, c, d, e = 0, 99, 100, 600, 10001

    def posterior(pred_ids):
        probs = np.zeros(n)
        probs[list(pred_ids)] = 0.9
        return probs

    posteriors = [posterior({a}), posterior({a, b}), posterior({b}),
                  posterior({c, d})]
    golds = [[a, c], [a], [b, e], [c]]
    rows, _ = typing_metrics(posteriors, golds, vocab)
    by_label = {row.label: row for row in rows}

    f1_b = 2 * 0.5 * 1.0 / (0.5 + 1.0)
    f1_c = 2 * 1.0 * 0.5 / (1.0 + 0.5)

    head = by_label["1-100"]
    assert (head.precision, head.recall, head.n_categories) == ((1.0 + 0.5) / 2,
                                                                (1.0 + 1.0) / 2, 2)
    assert head.f1 == (1.0 + f1_b) / 2
    mid = by_label["101-500"]
    assert (mid.precision, mid.recall, mid.f1, mid.n_categories) == (1.0, 0.5, f1_c, 1)
    low = by_label["501-10000"]
    assert (low.precision, low.recall, low.f1, low.n_categories) == (0.0, 0.0, 0.0, 1)
    tail = by_label["10001+"]
    assert (tail.precision, tail.recall, tail.f1, tail.n_categories) == (0.0, 0.0, 0.0, 1)
    total = by_label["total"]
    assert total.precision == (1.0 + 0.5 + 1.0 + 0.0 + 0.0) / 5
    assert total.recall == (1.0 + 1.0 + 0.5 + 0.0 + 0.0) / 5
    assert total.f1 == (1.0 + f1_b + f1_c + 0.0 + 0.0) / 5
    assert total.n_categories == 5
    print("PASS criterion 8: hand confusion fixture reproduced exactly per bucket")


def test_criterion_09_randomized_invariant_suite():
    rng = np.random.default_rng(909)

    # score monotonicity under category addition
    for _ in range(200):
        n = int(rng.integers(2, 40))
        probs = rng.uniform(0.0, 1.0, size=n)
        size = int(rng.integers(1, n))
        ids = sorted(rng.choice(n, size=size, replace=False).tolist())
        extra = int(rng.integers(0, n))
        index = EntityCategoryIndex()
        index.put("E", ids)
        index.put("E+", sorted(set(ids) | {extra}))
        cands = CandidateSet("m", [("E", 0.5), ("E+", 0.5)])
        scored = dict(score_candidates(probs, cands, index))
        assert scored["E+"] >= scored["E"]

    # argmax invariance under uniform positive scaling of the posterior
    for _ in range(200):
        n = int(rng.integers(4, 40))
        probs = rng.uniform(0.01, 1.0, size=n)
        index = EntityCategoryIndex()
        names = []
        for cidx in range(int(rng.integers(2, 6))):
            name = f"E{cidx}"
            names.append(name)
            size = int(rng.integers(1, n))
            index.put(name, rng.choice(n, size=size, replace=False))
        cands = CandidateSet("m", [(nm, 1.0 / len(names)) for nm in names])
        scale = float(rng.uniform(0.1, 10.0))
        base = score_candidates(probs, cands, index)
        scaled = score_candidates(probs * scale, cands, index)
        pick = lambda scored: min((-s, e) for e, s in scored)[1]
        assert pick(base) == pick(scaled)

    # threshold-subset property of candidate generation
    for _ in range(200):
        table = PriorTable()
        n_entities = int(rng.integers(1, 9))
        for i in range(n_entities):
            table.add("m", f"E{i}", int(rng.integers(1, 50)))
        t1, t2 = sorted(rng.uniform(0.0, 1.0, size=2).tolist())
        loose = set(table.candidates("m", t1).entities())
        tight = set(table.candidates("m", t2).entities())
        assert tight <= loose

    # merge associativity of count accumulation
    for _ in range(200):
        def random_part():
            part = PriorTable()
            for _ in range(int(rng.integers(0, 12))):
                part.add(f"m{rng.integers(0, 3)}", f"E{rng.integers(0, 4)}",
                         int(rng.integers(1, 9)))
            return part

        x, y, z = random_part(), random_part(), random_part()

        def snapshot(parts):
            merged = PriorTable()
            for p in parts:
                merged.merge(p)
            return ({m: dict(c) for m, c in merged.counts.items()},
                    dict(merged.totals))

        left = snapshot([x, y, z])
        xy = PriorTable()
        xy.merge(x)
        xy.merge(y)
        yz = PriorTable()
        yz.merge(y)
        yz.merge(z)
        right_assoc = PriorTable()
        right_assoc.merge(x)
        right_assoc.merge(yz)
        left_assoc = PriorTable()
        left_assoc.merge(xy)
        left_assoc.merge(z)
        as_pair = lambda t: ({m: dict(c) for m, c in t.counts.items()},
                             dict(t.totals))
        assert as_pair(left_assoc) == as_pair(right_assoc) == left
    print("PASS criterion 9: 4 invariant families x 200 random instances")
