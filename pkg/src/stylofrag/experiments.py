"""Experiment orchestration: sweeps, open-world rounds, corruption studies,
and the feature-separation diagnostics (sparsity, pseudo-F).

Every experiment writes flat CSVs plus a manifest (config echo, seeds, file
hashes, timings) under ``<out>/<experiment>/``. Reports are derived from the
emitted per-sample CSVs, never the other way round, and runs are bit-for-bit
reproducible from (corpus, config, seed).
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import random
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .blame import Fragment
from .calibration import (
    AttributionRecord,
    build_calibration_curve,
    metrics_sweep,
    roc_points,
    write_calibration_csv,
    write_roc_csv,
    write_thresholds_csv,
)
from .corpus import (
    Corpus,
    CorpusError,
    balance_per_author,
    corrupt_labels,
    filter_min_loc,
    partition_open_world,
    stratified_folds,
)
from .ensemble import aggregate_predictions, average_distributions, merge_vectors
from . import features as feat_mod
from .forest import ForestConfig, cross_validate


class ExperimentError(Exception):
    pass


@dataclass
class ExperimentReport:
    name: str
    out_dir: str
    config: dict
    rows: list = field(default_factory=list)  # per-setting summary rows
    files: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _write_manifest(report: ExperimentReport) -> None:
    out = Path(report.out_dir)
    manifest = {
        "experiment": report.name,
        "config": report.config,
        "files": {rel: _sha256(out / rel) for rel in sorted(report.files)},
        "timings_seconds": report.timings,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _predictions_rows(predictions):
    for fid, truth, dist in predictions:
        yield [fid, truth, dist.predicted_class, f"{dist.confidence:.9f}"]


def run_attribution_sweep(
    c: Corpus,
    cfg: ForestConfig,
    group_sizes,
    folds: int,
    seed: int,
    out: str,
    feature_cache: dict | None = None,
) -> ExperimentReport:
    """Single-sample cross-validation, then grouped aggregation accuracy for
    each group size. Group size 1 equals plain cross-validation accuracy."""
    out_dir = Path(out) / "attribution_sweep"
    out_dir.mkdir(parents=True, exist_ok=True)
    report = ExperimentReport(
        name="attribution_sweep",
        out_dir=str(out_dir),
        config={
            "forest": dataclasses.asdict(cfg),
            "group_sizes": sorted(group_sizes),
            "folds": folds,
            "seed": seed,
        },
    )
    t0 = time.perf_counter()
    plan = stratified_folds(c, folds, seed)
    cv = cross_validate(c, plan, cfg, feature_cache)
    report.timings["cross_validate"] = round(time.perf_counter() - t0, 3)

    _write_csv(
        out_dir / "predictions.csv",
        ["fragment_id", "truth", "predicted", "confidence"],
        _predictions_rows(cv.predictions),
    )
    report.files.append("predictions.csv")

    for size in sorted(group_sizes):
        if size == 1:
            accuracy = cv.accuracy
            n_groups = len(cv.predictions)
        else:
            groups, _, accuracy = aggregate_predictions(
                cv.predictions, size, mode="random", seed=seed
            )
            n_groups = len(groups)
        report.rows.append({
            "group_size": size, "n_groups": n_groups, "accuracy": accuracy,
        })
    _write_csv(
        out_dir / "summary.csv",
        ["group_size", "n_groups", "accuracy"],
        ([r["group_size"], r["n_groups"], f"{r['accuracy']:.6f}"] for r in report.rows),
    )
    report.files.append("summary.csv")
    report.timings["total"] = round(time.perf_counter() - t0, 3)
    _write_manifest(report)
    return report


def open_world_distributions(
    c: Corpus,
    suspects: frozenset,
    unknowns: frozenset,
    cfg: ForestConfig,
    folds: int,
    seed: int,
    feature_cache: dict | None = None,
) -> list[tuple[Fragment, object]]:
    """Cross-validate within the suspect set; unknown-author fragments are
    split round-robin across folds and each is evaluated exactly once by the
    model of its assigned fold. Returns (fragment, distribution) pairs."""
    suspect_corpus = Corpus(
        tuple(f for f in c.fragments if f.author_key in suspects)
    )
    unknown_frags = sorted(
        (f for f in c.fragments if f.author_key in unknowns),
        key=lambda f: f.fragment_id,
    )
    plan = stratified_folds(suspect_corpus, folds, seed)
    cache = feature_cache if feature_cache is not None else {}

    pairs: list[tuple[Fragment, object]] = []
    fragments = sorted(suspect_corpus.fragments, key=lambda f: f.fragment_id)
    for frag in fragments + unknown_frags:
        if frag.fragment_id not in cache:
            cache[frag.fragment_id] = feat_mod.extract_features(frag)

    from .forest import _fold_seed, predict_distribution, train_forest

    for fold in range(folds):
        train = [f for f in fragments if plan.assignment[f.fragment_id] != fold]
        test = [f for f in fragments if plan.assignment[f.fragment_id] == fold]
        fold_unknowns = [
            f for i, f in enumerate(unknown_frags) if i % folds == fold
        ]
        dictionary = feat_mod.build_dictionary(
            [cache[f.fragment_id] for f in train],
            [f.author_key for f in train],
        )
        train_vecs = [feat_mod.vectorize(cache[f.fragment_id], dictionary) for f in train]
        model = train_forest(
            train_vecs, [f.author_key for f in train],
            dataclasses.replace(cfg, seed=_fold_seed(cfg.seed, fold)),
        )
        for frag in test + fold_unknowns:
            vec = feat_mod.vectorize(cache[frag.fragment_id], dictionary)
            dist = predict_distribution(model, vec, frag.fragment_id)
            pairs.append((frag, dist))
    return pairs


def _record_outcome(author: str, predicted: str, unknowns: frozenset) -> str:
    if author in unknowns:
        return "out_of_world"
    if predicted == author:
        return "correct"
    return "incorrect_in_world"


def records_from_distributions(
    pairs,
    unknowns: frozenset,
    group_size: int = 1,
    seed: int = 0,
) -> list[AttributionRecord]:
    """Turn (fragment, distribution) pairs into attribution records.

    With group_size > 1, each author's out-of-fold distributions are shuffled
    by seed, chunked (ragged remainder dropped) and averaged, mirroring
    account-level attribution; the record then carries the group confidence.
    """
    if group_size == 1:
        return [
            AttributionRecord(
                id=frag.fragment_id,
                confidence=dist.confidence,
                outcome=_record_outcome(
                    frag.author_key, dist.predicted_class, unknowns
                ),
            )
            for frag, dist in pairs
        ]
    by_author: dict[str, list] = {}
    for frag, dist in pairs:
        by_author.setdefault(frag.author_key, []).append(
            (frag.fragment_id, dist)
        )
    rng = random.Random(seed)
    records: list[AttributionRecord] = []
    for author in sorted(by_author):
        rows = sorted(by_author[author], key=lambda r: r[0])
        rng.shuffle(rows)
        for start in range(0, len(rows) - group_size + 1, group_size):
            chunk = rows[start:start + group_size]
            avg = average_distributions([d for _, d in chunk])
            records.append(AttributionRecord(
                id=f"{author}/g{start // group_size:04d}",
                confidence=avg.confidence,
                outcome=_record_outcome(author, avg.predicted_class, unknowns),
            ))
    return records


def open_world_records(
    c: Corpus,
    suspects: frozenset,
    unknowns: frozenset,
    cfg: ForestConfig,
    folds: int,
    seed: int,
    feature_cache: dict | None = None,
    group_size: int = 1,
) -> list[AttributionRecord]:
    """Open-world evaluation records at single-sample or group granularity."""
    pairs = open_world_distributions(
        c, suspects, unknowns, cfg, folds, seed, feature_cache
    )
    return records_from_distributions(pairs, unknowns, group_size, seed)


def run_open_world_rounds(
    c: Corpus,
    n_unknown: int,
    cfg: ForestConfig,
    folds: int,
    seed: int,
    out: str,
    rounds: int | None = None,
    group_sizes=(1,),
    feature_cache: dict | None = None,
) -> tuple[list, ExperimentReport]:
    """For each round: train on suspects only, evaluate suspect test folds
    plus all unknown-author fragments; emit records, curves, threshold
    sweeps and ROC per round and group size."""
    out_dir = Path(out) / "open_world"
    out_dir.mkdir(parents=True, exist_ok=True)
    n_rounds = rounds if rounds is not None else len(c.authors) // n_unknown
    report = ExperimentReport(
        name="open_world",
        out_dir=str(out_dir),
        config={
            "forest": dataclasses.asdict(cfg),
            "n_unknown": n_unknown,
            "folds": folds,
            "rounds": n_rounds,
            "group_sizes": sorted(group_sizes),
            "seed": seed,
        },
    )
    t0 = time.perf_counter()
    all_records = []
    for rnd in range(n_rounds):
        partition = partition_open_world(c, n_unknown, rnd, seed)
        pairs = open_world_distributions(
            c, partition.suspects, partition.unknowns, cfg, folds, seed,
            feature_cache,
        )
        round_records = {}
        for size in sorted(group_sizes):
            records = records_from_distributions(
                pairs, partition.unknowns, size, seed
            )
            round_records[size] = records
            setting = out_dir / f"round_{rnd}" / f"size_{size}"
            setting.mkdir(parents=True, exist_ok=True)
            _write_csv(
                setting / "records.csv",
                ["id", "confidence", "outcome"],
                ([r.id, f"{r.confidence:.9f}", r.outcome] for r in records),
            )
            write_calibration_csv(
                build_calibration_curve(records), setting / "calibration.csv"
            )
            metrics, best = metrics_sweep(records)
            write_thresholds_csv(metrics, setting / "thresholds.csv")
            write_roc_csv(roc_points(records), setting / "roc.csv")
            for name in ("records.csv", "calibration.csv", "thresholds.csv",
                         "roc.csv"):
                report.files.append(f"round_{rnd}/size_{size}/{name}")
            in_world = [r for r in records if r.outcome != "out_of_world"]
            accuracy = (
                sum(r.outcome == "correct" for r in in_world) / len(in_world)
                if in_world else 0.0
            )
            report.rows.append({
                "round": rnd,
                "group_size": size,
                "n_records": len(records),
                "in_world_accuracy": accuracy,
                "best_thresholds": best,
            })
        all_records.append(round_records)
    _write_csv(
        out_dir / "summary.csv",
        ["round", "group_size", "n_records", "in_world_accuracy",
         "best_t_correct_above", "best_t_oow_below", "best_t_false_below"],
        (
            [r["round"], r["group_size"], r["n_records"],
             f"{r['in_world_accuracy']:.6f}",
             *("" if t is None else f"{t:.1f}" for t in r["best_thresholds"])]
            for r in report.rows
        ),
    )
    report.files.append("summary.csv")
    report.timings["total"] = round(time.perf_counter() - t0, 3)
    _write_manifest(report)
    return all_records, report


def run_size_sweep(
    c: Corpus,
    settings,
    cfg: ForestConfig,
    folds: int,
    seed: int,
    out: str,
    feature_cache: dict | None = None,
) -> ExperimentReport:
    """For each (min_loc, samples_per_author): filter, balance, cross-validate.

    Settings that leave too few authors or samples are reported as skipped.
    """
    out_dir = Path(out) / "size_sweep"
    out_dir.mkdir(parents=True, exist_ok=True)
    report = ExperimentReport(
        name="size_sweep",
        out_dir=str(out_dir),
        config={
            "forest": dataclasses.asdict(cfg),
            "settings": [list(s) for s in settings],
            "folds": folds,
            "seed": seed,
        },
    )
    t0 = time.perf_counter()
    for min_loc, n_per_author in settings:
        label = f"loc{min_loc}_n{n_per_author}"
        try:
            sub = filter_min_loc(c, min_loc)
            sub = balance_per_author(sub, n_per_author, seed)
            if len(sub.authors) < 2 or n_per_author < folds:
                raise CorpusError("insufficient authors or samples for folds")
            plan = stratified_folds(sub, folds, seed)
            cv = cross_validate(sub, plan, cfg, feature_cache)
        except CorpusError as exc:
            report.rows.append({
                "setting": label, "min_loc": min_loc,
                "samples_per_author": n_per_author, "n_authors": "",
                "accuracy": "", "status": f"skipped: {exc}",
            })
            continue
        _write_csv(
            out_dir / label / "predictions.csv",
            ["fragment_id", "truth", "predicted", "confidence"],
            _predictions_rows(cv.predictions),
        )
        report.files.append(f"{label}/predictions.csv")
        report.rows.append({
            "setting": label, "min_loc": min_loc,
            "samples_per_author": n_per_author,
            "n_authors": len(sub.authors),
            "accuracy": f"{cv.accuracy:.6f}", "status": "ok",
        })
    _write_csv(
        out_dir / "summary.csv",
        ["setting", "min_loc", "samples_per_author", "n_authors", "accuracy", "status"],
        (
            [r["setting"], r["min_loc"], r["samples_per_author"],
             r["n_authors"], r["accuracy"], r["status"]]
            for r in report.rows
        ),
    )
    report.files.append("summary.csv")
    report.timings["total"] = round(time.perf_counter() - t0, 3)
    _write_manifest(report)
    return report


def run_corruption_sweep(
    c: Corpus,
    m_values,
    cfg: ForestConfig,
    folds: int,
    seed: int,
    out: str,
    feature_cache: dict | None = None,
) -> ExperimentReport:
    """Corrupt m label pairs, cross-validate, score against the original
    (uncorrupted) truth. The corrupted-label fraction is 2m/N exactly."""
    out_dir = Path(out) / "corruption_sweep"
    out_dir.mkdir(parents=True, exist_ok=True)
    report = ExperimentReport(
        name="corruption_sweep",
        out_dir=str(out_dir),
        config={
            "forest": dataclasses.asdict(cfg),
            "m_values": sorted(m_values),
            "folds": folds,
            "seed": seed,
        },
    )
    t0 = time.perf_counter()
    truth = {f.fragment_id: f.author_key for f in c.fragments}
    n = len(c.fragments)
    for m in sorted(m_values):
        corrupted = corrupt_labels(c, m, seed + m)
        plan = stratified_folds(corrupted, folds, seed)
        cv = cross_validate(corrupted, plan, cfg, feature_cache)
        correct = sum(
            dist.predicted_class == truth[fid] for fid, _, dist in cv.predictions
        )
        accuracy = correct / len(cv.predictions)
        _write_csv(
            out_dir / f"m{m}" / "predictions.csv",
            ["fragment_id", "original_truth", "corrupted_truth", "predicted",
             "confidence"],
            (
                [fid, truth[fid], label, dist.predicted_class,
                 f"{dist.confidence:.9f}"]
                for fid, label, dist in cv.predictions
            ),
        )
        report.files.append(f"m{m}/predictions.csv")
        report.rows.append({
            "m": m, "corrupted_fraction": 2 * m / n, "accuracy": accuracy,
        })
    _write_csv(
        out_dir / "summary.csv",
        ["m", "corrupted_fraction", "accuracy"],
        (
            [r["m"], f"{r['corrupted_fraction']:.6f}", f"{r['accuracy']:.6f}"]
            for r in report.rows
        ),
    )
    report.files.append("summary.csv")
    report.timings["total"] = round(time.perf_counter() - t0, 3)
    _write_manifest(report)
    return report


def pseudo_f_statistic(values_by_class: dict) -> float | None:
    """Between-class over within-class variation for one feature.

    between = sum_c n_c (mean_c - grand_mean)^2 / N; residual = weighted mean
    of population class variances. None (infinite separation) when residual
    is zero.
    """
    classes = [np.asarray(v, dtype=np.float64) for v in values_by_class.values()]
    if len(classes) < 2:
        raise ExperimentError("pseudo-F needs at least 2 classes")
    n_total = sum(len(v) for v in classes)
    grand_mean = sum(v.sum() for v in classes) / n_total
    between = sum(len(v) * (v.mean() - grand_mean) ** 2 for v in classes) / n_total
    residual = sum(len(v) * v.var() for v in classes) / n_total
    if residual == 0.0:
        return None
    return float(between / residual)


def pseudo_f_table(vectors_by_class: dict, merge_sizes) -> dict:
    """Per-merge-size pseudo-F quantiles plus top-quartile feature overlap.

    For each merge size the class vectors are merge-averaged in chunks, then
    a pseudo-F is computed per feature column. Returns {"rows": [...],
    "top_quartile_overlap": count of features in the top quartile at every
    merge size}.
    """
    if not vectors_by_class:
        raise ExperimentError("empty input")
    dim = next(iter(vectors_by_class.values()))[0].dimension
    rows = []
    top_sets = []
    for size in sorted(merge_sizes):
        per_class_values: dict[str, np.ndarray] = {}
        for cls, vecs in sorted(vectors_by_class.items()):
            if size == 1:
                merged = vecs
            else:
                merged = [
                    merge_vectors(vecs[i:i + size], "average")
                    for i in range(0, len(vecs) - size + 1, size)
                ]
            if not merged:
                continue
            dense = np.zeros((len(merged), dim))
            for r, vec in enumerate(merged):
                for col, value in vec.entries.items():
                    dense[r, col] = value
            per_class_values[cls] = dense
        if len(per_class_values) < 2:
            raise ExperimentError(f"merge size {size} leaves fewer than 2 classes")
        stats = np.full(dim, np.nan)
        for col in range(dim):
            stat = pseudo_f_statistic(
                {cls: mat[:, col] for cls, mat in per_class_values.items()}
            )
            if stat is not None:
                stats[col] = stat
        finite = stats[np.isfinite(stats)]
        if finite.size == 0:
            raise ExperimentError("no feature produced a finite pseudo-F")
        quantiles = {
            q: float(np.percentile(finite, q)) for q in (0, 25, 50, 75, 100)
        }
        cutoff = quantiles[75]
        top_sets.append({
            int(col) for col in np.flatnonzero(
                np.isfinite(stats) & (stats >= cutoff)
            )
        })
        rows.append({"merge_size": size, "quantiles": quantiles,
                     "n_features": int(finite.size)})
    overlap = set.intersection(*top_sets) if top_sets else set()
    return {"rows": rows, "top_quartile_overlap": len(overlap)}


def write_pseudo_f_csv(table: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["merge_size", "q0", "q25", "q50", "q75", "q100", "n_features"])
        for row in table["rows"]:
            q = row["quantiles"]
            w.writerow([
                row["merge_size"],
                *(f"{q[p]:.4f}" for p in (0, 25, 50, 75, 100)),
                row["n_features"],
            ])
        w.writerow(["top_quartile_overlap", table["top_quartile_overlap"],
                    "", "", "", "", ""])
