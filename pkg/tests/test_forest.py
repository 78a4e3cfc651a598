"""Random forest: split quality, vote fractions, determinism, persistence."""

import numpy as np
import pytest

from stylofrag.features import SparseFeatureVector
from stylofrag.forest import (
    ForestConfig,
    ForestError,
    _best_split,
    cross_validate,
    load_model,
    predict_distribution,
    save_model,
    train_forest,
    two_class_task,
    vectors_to_csr,
    verification_task,
)
from stylofrag.corpus import Corpus, stratified_folds

from conftest import make_fragment


def sparse(dense):
    return SparseFeatureVector(
        entries={i: v for i, v in enumerate(dense) if v != 0.0},
        dimension=len(dense),
    )


def random_vectors(rng, n, dim):
    dense = rng.random((n, dim)) * (rng.random((n, dim)) < 0.6)
    return [sparse(row) for row in dense]


def gini(labels):
    labels = np.asarray(labels)
    if len(labels) == 0:
        return 0.0
    _, counts = np.unique(labels, return_counts=True)
    p = counts / len(labels)
    return 1.0 - float((p ** 2).sum())


def exhaustive_best_decrease(X, y):
    """Oracle: best Gini decrease over every feature and every midpoint."""
    m = len(y)
    parent = gini(y)
    best = 0.0
    for j in range(X.shape[1]):
        values = np.unique(X[:, j])
        for lo, hi in zip(values, values[1:]):
            thr = (lo + hi) / 2
            mask = X[:, j] <= thr
            weighted = (
                mask.sum() * gini(y[mask]) + (~mask).sum() * gini(y[~mask])
            ) / m
            best = max(best, parent - weighted)
    return best


def test_vectors_to_csr():
    mat = vectors_to_csr([sparse([0.0, 2.0]), sparse([1.5, 0.0])])
    assert mat.shape == (2, 2)
    assert mat.toarray().tolist() == [[0.0, 2.0], [1.5, 0.0]]
    with pytest.raises(ForestError):
        vectors_to_csr([])
    with pytest.raises(ForestError):
        vectors_to_csr([sparse([1.0]), sparse([1.0, 2.0])])


def test_best_split_separates_perfectly():
    sub = np.array([[0.0], [0.1], [0.9], [1.0]])
    y = np.array([0, 0, 1, 1])
    col, thr, decrease = _best_split(sub, y, 2, 1)
    assert col == 0
    assert thr == pytest.approx(0.5)
    assert decrease == pytest.approx(0.5)


def test_best_split_none_when_pure_or_constant():
    assert _best_split(np.ones((4, 2)), np.array([0, 1, 0, 1]), 2, 1) is None
    assert _best_split(
        np.arange(8.0).reshape(4, 2), np.zeros(4, dtype=np.int64), 1, 1
    ) is None


def test_split_oracle_matches_exhaustive_search():
    rng = np.random.default_rng(42)
    cfg = ForestConfig(
        n_trees=1, max_depth=1, features_per_split=3, bootstrap=False, seed=0
    )
    for trial in range(50):
        m = int(rng.integers(2, 9))
        dim = int(rng.integers(1, 4))
        X = np.round(rng.random((m, dim)), 2)
        y = rng.integers(0, 2, size=m)
        if len(set(y.tolist())) < 2:
            y[0] = 1 - y[0]
        model = train_forest(
            [sparse(row) for row in X], [int(v) for v in y], cfg
        )
        tree = model.trees[0]
        oracle = exhaustive_best_decrease(X, y)
        if tree.feature[0] < 0:
            assert oracle == pytest.approx(0.0, abs=1e-9), trial
            continue
        mask = X[:, int(tree.feature[0])] <= tree.threshold[0]
        achieved = gini(y) - (
            mask.sum() * gini(y[mask]) + (~mask).sum() * gini(y[~mask])
        ) / m
        assert achieved == pytest.approx(oracle, abs=1e-9), trial


def test_vote_fraction_contract():
    rng = np.random.default_rng(0)
    vectors = random_vectors(rng, 40, 12)
    labels = [f"author{i % 4}" for i in range(40)]
    cfg = ForestConfig(n_trees=7, features_per_split=4, seed=1)
    model = train_forest(vectors, labels, cfg)
    for x in random_vectors(rng, 200, 12):
        dist = predict_distribution(model, x)
        assert dist.probs.sum() == pytest.approx(1.0, abs=1e-9)
        for p in dist.probs:
            votes = p * cfg.n_trees
            assert votes == pytest.approx(round(votes), abs=1e-9)


def test_classes_sorted_and_tie_breaks_low():
    rng = np.random.default_rng(3)
    vectors = random_vectors(rng, 20, 6)
    labels = ["zeta" if i % 2 else "alpha" for i in range(20)]
    model = train_forest(vectors, labels, ForestConfig(n_trees=4, seed=0))
    assert model.classes == ("alpha", "zeta")
    from stylofrag.forest import PredictionDistribution

    tied = PredictionDistribution(
        probs=np.array([0.5, 0.5]), classes=("alpha", "zeta")
    )
    assert tied.predicted_class == "alpha"


def test_training_is_deterministic():
    rng = np.random.default_rng(5)
    vectors = random_vectors(rng, 30, 8)
    labels = [f"a{i % 3}" for i in range(30)]
    cfg = ForestConfig(n_trees=5, features_per_split=4, seed=11)
    m1 = train_forest(vectors, labels, cfg)
    m2 = train_forest(vectors, labels, cfg)
    for t1, t2 in zip(m1.trees, m2.trees):
        assert np.array_equal(t1.feature, t2.feature)
        assert np.array_equal(t1.threshold, t2.threshold)
        assert np.array_equal(t1.left, t2.left)
        assert np.array_equal(t1.right, t2.right)


def test_model_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    vectors = random_vectors(rng, 24, 10)
    labels = [f"a{i % 3}" for i in range(24)]
    model = train_forest(vectors, labels, ForestConfig(n_trees=6, seed=2))
    path = tmp_path / "model.npz"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.classes == model.classes
    assert loaded.dictionary_dimension == model.dictionary_dimension
    for x in random_vectors(rng, 50, 10):
        a = predict_distribution(model, x)
        b = predict_distribution(loaded, x)
        assert np.array_equal(a.probs, b.probs)


def test_predict_rejects_wrong_dimension():
    rng = np.random.default_rng(9)
    model = train_forest(
        random_vectors(rng, 10, 4), ["a", "b"] * 5, ForestConfig(n_trees=2)
    )
    with pytest.raises(ForestError):
        predict_distribution(model, sparse([1.0, 2.0]))


def small_author_corpus():
    frags = []
    for author, stem in (("a@x", "alpha"), ("b@x", "beta")):
        for i in range(8):
            frags.append(make_fragment(
                f"{author}/{i}", author, [f"{stem} = {i};", f"{stem}++;"]
            ))
    return Corpus(tuple(frags))


def test_cross_validate_covers_every_fragment_once():
    c = small_author_corpus()
    plan = stratified_folds(c, 4, seed=0)
    cv = cross_validate(c, plan, ForestConfig(n_trees=5, seed=0))
    assert sorted(fid for fid, _, _ in cv.predictions) == sorted(
        f.fragment_id for f in c.fragments
    )
    assert 0.0 <= cv.accuracy <= 1.0


def test_two_class_and_verification_tasks():
    c = small_author_corpus()
    plan = stratified_folds(c, 4, seed=0)
    cfg = ForestConfig(n_trees=5, seed=0)
    assert 0.0 <= two_class_task(c, "a@x", "b@x", cfg, plan) <= 1.0
    assert 0.0 <= verification_task(c, "a@x", cfg, plan) <= 1.0
    with pytest.raises(ForestError):
        two_class_task(c, "a@x", "a@x", cfg, plan)
    with pytest.raises(ForestError):
        verification_task(c, "missing@x", cfg, plan)
