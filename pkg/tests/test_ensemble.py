"""Group aggregation, vector merging and dispersion diagnostics."""

import numpy as np
import pytest

from stylofrag.ensemble import (
    EnsembleError,
    GroupingSpec,
    aggregate_predictions,
    average_distributions,
    coefficient_of_variation,
    group_samples,
    merge_vectors,
    merged_experiment,
)
from stylofrag.features import SparseFeatureVector
from stylofrag.forest import ForestConfig, PredictionDistribution
from stylofrag.corpus import Corpus, stratified_folds

from conftest import make_fragment


def dist(probs, classes=("a", "b"), fid=""):
    return PredictionDistribution(
        probs=np.asarray(probs, dtype=float),
        classes=classes,
        fragment_ids=(fid,) if fid else (),
    )


def test_grouping_spec_validation():
    with pytest.raises(EnsembleError):
        GroupingSpec(group_size=0)
    with pytest.raises(EnsembleError):
        GroupingSpec(group_size=2, mode="chaotic")


def test_group_samples_ordered_and_ragged_drop():
    frags = [make_fragment(f"x/{i}", "a", [f"l{i};"]) for i in range(7)]
    groups = group_samples(frags, GroupingSpec(group_size=3, mode="ordered"))
    assert len(groups) == 2  # 7 = 3 + 3 + dropped remainder of 1
    assert groups[0].fragment_ids == ("x/0", "x/1", "x/2")
    assert all(g.truth == "a" for g in groups)


def test_group_samples_random_is_seeded():
    frags = [make_fragment(f"x/{i}", "a", [f"l{i};"]) for i in range(9)]
    spec = GroupingSpec(group_size=3, mode="random", seed=4)
    assert group_samples(frags, spec) == group_samples(frags, spec)


def test_group_samples_rejects_mixed_authors():
    frags = [
        make_fragment("x/0", "a", ["l;"]),
        make_fragment("x/1", "b", ["m;"]),
    ]
    with pytest.raises(EnsembleError):
        group_samples(frags, GroupingSpec(group_size=1))


def test_average_distributions_arithmetic():
    avg = average_distributions([
        dist([1.0, 0.0], fid="f1"),
        dist([0.0, 1.0], fid="f2"),
        dist([0.5, 0.5], fid="f3"),
    ])
    assert avg.probs == pytest.approx([0.5, 0.5])
    assert avg.fragment_ids == ("f1", "f2", "f3")
    with pytest.raises(EnsembleError):
        average_distributions([])
    with pytest.raises(EnsembleError):
        average_distributions([dist([1.0, 0.0]), dist([1.0, 0.0], ("a", "c"))])


def test_aggregate_predictions_flips_majority():
    # per-sample argmax is wrong twice out of three; the average is right
    preds = [
        ("f1", "a", dist([0.6, 0.4])),
        ("f2", "a", dist([0.1, 0.9])),
        ("f3", "a", dist([0.45, 0.55])),
    ]
    groups, averaged, accuracy = aggregate_predictions(preds, 3, "ordered")
    assert len(groups) == 1
    assert averaged[0].probs == pytest.approx(
        [(0.6 + 0.1 + 0.45) / 3, (0.4 + 0.9 + 0.55) / 3]
    )
    # averaged distribution favors "b": group-level accuracy drops to 0
    assert accuracy == 0.0

    singles_correct = sum(
        d.predicted_class == truth for _, truth, d in preds
    )
    assert singles_correct == 1


def test_merge_vectors_sum_and_average():
    v1 = SparseFeatureVector(entries={0: 1.0, 2: 2.0}, dimension=3)
    v2 = SparseFeatureVector(entries={0: 3.0}, dimension=3)
    merged = merge_vectors([v1, v2], "sum")
    assert merged.entries == {0: 4.0, 2: 2.0}
    averaged = merge_vectors([v1, v2], "average")
    assert averaged.entries == {0: 2.0, 2: 1.0}
    with pytest.raises(EnsembleError):
        merge_vectors([], "sum")
    with pytest.raises(EnsembleError):
        merge_vectors([v1], "median")
    with pytest.raises(EnsembleError):
        merge_vectors([v1, SparseFeatureVector(entries={}, dimension=2)])


def test_merged_experiment_runs_all_combinations():
    frags = []
    for author, stem in (("a@x", "alpha"), ("b@x", "beta")):
        for i in range(8):
            frags.append(make_fragment(
                f"{author}/{i}", author, [f"{stem} = {i};", f"{stem}++;"]
            ))
    c = Corpus(tuple(frags))
    plan = stratified_folds(c, 4, seed=0)
    cfg = ForestConfig(n_trees=5, seed=0)
    spec = GroupingSpec(group_size=2, mode="ordered")
    cache = {}
    for train_merged in (False, True):
        for test_merged in (False, True):
            acc = merged_experiment(
                c, spec, cfg, plan, train_merged, test_merged,
                feature_cache=cache,
            )
            assert 0.0 <= acc <= 1.0


def test_coefficient_of_variation():
    cov = coefficient_of_variation([
        dist([0.2, 0.8]), dist([0.4, 0.6]),
    ])
    # population std of {0.2, 0.4} is 0.1, mean 0.3
    assert cov["a"] == pytest.approx(0.1 / 0.3)
    assert cov["b"] == pytest.approx(0.1 / 0.7)
    with pytest.raises(EnsembleError):
        coefficient_of_variation([dist([1.0, 0.0])])
    # zero-mean classes are absent
    cov = coefficient_of_variation([dist([1.0, 0.0]), dist([1.0, 0.0])])
    assert "b" not in cov
