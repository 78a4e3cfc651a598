"""Experiment orchestration and the pseudo-F separation statistic."""

import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stylofrag.experiments import (
    ExperimentError,
    open_world_distributions,
    pseudo_f_statistic,
    pseudo_f_table,
    records_from_distributions,
    run_attribution_sweep,
    run_corruption_sweep,
    run_open_world_rounds,
    run_size_sweep,
    write_pseudo_f_csv,
)
from stylofrag.corpus import partition_open_world
from stylofrag.features import SparseFeatureVector
from stylofrag.forest import ForestConfig


FAST_CFG = ForestConfig(n_trees=5, max_depth=10, features_per_split=20, seed=0)


def test_pseudo_f_hand_case():
    assert pseudo_f_statistic({"A": [0, 2], "B": [4, 6]}) == 4.0


def test_pseudo_f_degenerate_cases():
    assert pseudo_f_statistic({"A": [1, 2], "B": [1, 2]}) == 0.0
    assert pseudo_f_statistic({"A": [1, 1], "B": [5, 5]}) is None
    with pytest.raises(ExperimentError):
        pseudo_f_statistic({"A": [1, 2]})


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_pseudo_f_variance_decomposition(data):
    n_classes = data.draw(st.integers(2, 4))
    values = {
        f"c{k}": data.draw(st.lists(
            st.floats(-50, 50, allow_nan=False), min_size=1, max_size=8,
        ))
        for k in range(n_classes)
    }
    flat = np.concatenate([np.asarray(v, float) for v in values.values()])
    n = len(flat)
    grand = flat.mean()
    total_ss = float(((flat - grand) ** 2).sum())
    classes = [np.asarray(v, float) for v in values.values()]
    between = sum(len(v) * (v.mean() - grand) ** 2 for v in classes) / n
    residual = sum(len(v) * v.var() for v in classes) / n
    assert n * (between + residual) == pytest.approx(total_ss, abs=1e-9)
    stat = pseudo_f_statistic(values)
    if residual > 0:
        assert stat == pytest.approx(between / residual)
    else:
        assert stat is None


def vec(dense):
    return SparseFeatureVector(
        entries={i: v for i, v in enumerate(dense) if v}, dimension=len(dense)
    )


def test_pseudo_f_table_single_feature():
    by_class = {
        "A": [vec([0.0]), vec([2.0])],
        "B": [vec([4.0]), vec([6.0])],
    }
    table = pseudo_f_table(by_class, [1])
    (row,) = table["rows"]
    assert row["merge_size"] == 1
    assert all(q == 4.0 for q in row["quantiles"].values())
    assert table["top_quartile_overlap"] == 1


def test_pseudo_f_csv(tmp_path):
    table = pseudo_f_table(
        {"A": [vec([0.0, 1.0]), vec([2.0, 3.0])],
         "B": [vec([4.0, 0.0]), vec([6.0, 2.0])]},
        [1],
    )
    path = tmp_path / "pf.csv"
    write_pseudo_f_csv(table, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "merge_size,q0,q25,q50,q75,q100,n_features"


def test_attribution_sweep_outputs(small_corpus, tmp_path):
    report = run_attribution_sweep(
        small_corpus, FAST_CFG, [1, 4], folds=3, seed=0, out=str(tmp_path)
    )
    base = tmp_path / "attribution_sweep"
    assert (base / "predictions.csv").exists()
    assert (base / "summary.csv").exists()
    manifest = json.loads((base / "manifest.json").read_text())
    assert set(manifest["files"]) == {"predictions.csv", "summary.csv"}
    rows = {r["group_size"]: r for r in report.rows}
    # group size 1 equals plain cross-validation accuracy
    with open(base / "predictions.csv") as fh:
        preds = list(csv.DictReader(fh))
    singles = sum(p["truth"] == p["predicted"] for p in preds) / len(preds)
    assert rows[1]["accuracy"] == pytest.approx(singles)


def test_open_world_round_outputs(small_corpus, tmp_path):
    _, report = run_open_world_rounds(
        small_corpus, 1, FAST_CFG, folds=3, seed=0, out=str(tmp_path),
        rounds=1, group_sizes=[1, 4],
    )
    base = tmp_path / "open_world"
    for size in (1, 4):
        for name in ("records.csv", "calibration.csv", "thresholds.csv",
                     "roc.csv"):
            assert (base / "round_0" / f"size_{size}" / name).exists()
    with open(base / "round_0" / "size_1" / "records.csv") as fh:
        records = list(csv.DictReader(fh))
    # every suspect fragment once, plus every unknown fragment once
    assert len(records) == len(small_corpus.fragments)
    part = partition_open_world(small_corpus, 1, 0, seed=0)
    n_unknown = sum(
        f.author_key in part.unknowns for f in small_corpus.fragments
    )
    assert sum(r["outcome"] == "out_of_world" for r in records) == n_unknown


def test_grouped_records_granularity(small_corpus):
    part = partition_open_world(small_corpus, 1, 0, seed=0)
    pairs = open_world_distributions(
        small_corpus, part.suspects, part.unknowns, FAST_CFG, 3, seed=0
    )
    grouped = records_from_distributions(pairs, part.unknowns, 4, seed=0)
    assert len(grouped) == len(small_corpus.authors) * (24 // 4)
    for r in grouped:
        expected = "out_of_world" if any(
            r.id.startswith(u) for u in part.unknowns
        ) else r.outcome
        assert r.outcome == expected


def test_size_sweep_skips_impossible_settings(small_corpus, tmp_path):
    report = run_size_sweep(
        small_corpus, [(1, 12), (1, 999)], FAST_CFG, folds=3, seed=0,
        out=str(tmp_path),
    )
    by_setting = {r["setting"]: r for r in report.rows}
    assert by_setting["loc1_n12"]["status"] == "ok"
    assert by_setting["loc1_n999"]["status"].startswith("skipped")


def test_corruption_sweep_m0_is_baseline(small_corpus, tmp_path):
    report = run_corruption_sweep(
        small_corpus, [0, 2], FAST_CFG, folds=3, seed=0, out=str(tmp_path)
    )
    rows = {r["m"]: r for r in report.rows}
    assert rows[0]["corrupted_fraction"] == 0.0
    n = len(small_corpus.fragments)
    assert rows[2]["corrupted_fraction"] == 4 / n
    summary = (tmp_path / "corruption_sweep" / "summary.csv").read_text()
    assert summary.splitlines()[0] == "m,corrupted_fraction,accuracy"


def test_manifest_hashes_match_files(small_corpus, tmp_path):
    import hashlib

    run_attribution_sweep(
        small_corpus, FAST_CFG, [1], folds=3, seed=0, out=str(tmp_path)
    )
    base = tmp_path / "attribution_sweep"
    manifest = json.loads((base / "manifest.json").read_text())
    for rel, digest in manifest["files"].items():
        assert hashlib.sha256((base / rel).read_bytes()).hexdigest() == digest
