"""Multiple-sample (account) attribution.

Groups fragments known to share an author, averages their per-sample
probability distributions, and predicts the class with the highest averaged
probability. Also provides the feature-vector merging alternative (ordered or
random grouping, sum or average normalization) and coefficient-of-variation
diagnostics over group members.
"""

from __future__ import annotations

import csv
import dataclasses
import random
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, FoldPlan
from .features import SparseFeatureVector
from . import features as feat_mod
from .forest import (
    ForestConfig,
    PredictionDistribution,
    RandomForestModel,
    _fold_seed,
    predict_distribution,
    train_forest,
)


class EnsembleError(Exception):
    pass


@dataclass(frozen=True)
class SampleGroup:
    group_id: str
    fragment_ids: tuple
    truth: str  # hidden during attribution; used only for scoring


@dataclass(frozen=True)
class GroupingSpec:
    group_size: int
    mode: str = "ordered"  # or "random"
    seed: int = 0

    def __post_init__(self):
        if self.group_size < 1:
            raise EnsembleError("group_size must be >= 1")
        if self.mode not in ("ordered", "random"):
            raise EnsembleError(f"unknown grouping mode {self.mode!r}")


def group_samples(fragments, spec: GroupingSpec) -> list[SampleGroup]:
    """Chunk one author's fragments into fixed-size groups.

    Ordered mode chunks the fragment_id-sorted sequence (locality
    preserving); random mode chunks a seeded shuffle. A ragged final group is
    dropped so group sizes stay uniform.
    """
    authors = {f.author_key for f in fragments}
    if len(authors) != 1:
        raise EnsembleError("group_samples expects fragments of a single author")
    author = authors.pop()
    ids = sorted(f.fragment_id for f in fragments)
    if spec.mode == "random":
        random.Random(spec.seed).shuffle(ids)
    groups = []
    for start in range(0, len(ids) - spec.group_size + 1, spec.group_size):
        chunk = tuple(ids[start:start + spec.group_size])
        groups.append(SampleGroup(
            group_id=f"{author}/g{start // spec.group_size:04d}",
            fragment_ids=chunk,
            truth=author,
        ))
    return groups


def average_distributions(ds: list[PredictionDistribution]) -> PredictionDistribution:
    """Elementwise arithmetic mean of equal-class-set distributions."""
    if not ds:
        raise EnsembleError("cannot average zero distributions")
    classes = ds[0].classes
    for d in ds:
        if d.classes != classes:
            raise EnsembleError("class-set mismatch between distributions")
    probs = np.mean([d.probs for d in ds], axis=0)
    fragment_ids = tuple(fid for d in ds for fid in d.fragment_ids)
    return PredictionDistribution(probs=probs, classes=classes, fragment_ids=fragment_ids)


def attribute_group(
    model: RandomForestModel, group: SampleGroup, vectors: dict
) -> tuple[str, float]:
    """Predict the group's author from averaged member distributions."""
    members = []
    for fid in group.fragment_ids:
        if fid not in vectors:
            raise EnsembleError(f"missing vector for group member {fid}")
        members.append(predict_distribution(model, vectors[fid], fid))
    avg = average_distributions(members)
    return avg.predicted_class, avg.confidence


def aggregate_predictions(
    predictions, group_size: int, mode: str = "random", seed: int = 0
):
    """Group per-fragment predictions by true author and average each group.

    ``predictions`` is an iterable of (fragment_id, truth, distribution) as
    produced by cross-validation. Returns (groups, averaged distributions,
    accuracy). Ragged remainders per author are dropped.
    """
    by_author: dict[str, list] = {}
    for fid, truth, dist in predictions:
        by_author.setdefault(truth, []).append((fid, dist))
    rng = random.Random(seed)
    groups: list[SampleGroup] = []
    averaged: list[PredictionDistribution] = []
    correct = 0
    for author in sorted(by_author):
        rows = sorted(by_author[author], key=lambda r: r[0])
        if mode == "random":
            rng.shuffle(rows)
        for start in range(0, len(rows) - group_size + 1, group_size):
            chunk = rows[start:start + group_size]
            group = SampleGroup(
                group_id=f"{author}/g{start // group_size:04d}",
                fragment_ids=tuple(fid for fid, _ in chunk),
                truth=author,
            )
            avg = average_distributions([d for _, d in chunk])
            groups.append(group)
            averaged.append(avg)
            if avg.predicted_class == author:
                correct += 1
    accuracy = correct / len(groups) if groups else 0.0
    return groups, averaged, accuracy


def merge_vectors(
    vs: list[SparseFeatureVector], normalize: str = "sum"
) -> SparseFeatureVector:
    """Elementwise sum of equal-dimension vectors, averaged when requested."""
    if not vs:
        raise EnsembleError("cannot merge zero vectors")
    if normalize not in ("sum", "average"):
        raise EnsembleError(f"unknown normalization {normalize!r}")
    dim = vs[0].dimension
    entries: dict[int, float] = {}
    for v in vs:
        if v.dimension != dim:
            raise EnsembleError("dimension mismatch in merge_vectors")
        for col, value in v.entries.items():
            entries[col] = entries.get(col, 0.0) + value
    if normalize == "average":
        entries = {c: v / len(vs) for c, v in entries.items()}
    entries = {c: v for c, v in entries.items() if v != 0.0}
    return SparseFeatureVector(entries=entries, dimension=dim)


def merged_experiment(
    c: Corpus,
    spec: GroupingSpec,
    cfg: ForestConfig,
    plan: FoldPlan,
    train_merged: bool,
    test_merged: bool,
    normalize: str = "average",
    feature_cache: dict | None = None,
) -> float:
    """Run one train/test merge combination and report accuracy.

    With both sides unmerged this is plain cross-validation on the same
    folds. Merging combines each author's fragments (within the train or test
    side of a fold) into fixed-size merged vectors labeled by the author.
    """
    fragments = sorted(c.fragments, key=lambda f: f.fragment_id)
    cache = feature_cache if feature_cache is not None else {}
    for frag in fragments:
        if frag.fragment_id not in cache:
            cache[frag.fragment_id] = feat_mod.extract_features(frag)

    def side_vectors(frags, dictionary, merged: bool):
        vecs = [feat_mod.vectorize(cache[f.fragment_id], dictionary) for f in frags]
        labels = [f.author_key for f in frags]
        if not merged:
            return vecs, labels
        by_author: dict[str, list] = {}
        for frag, vec in zip(frags, vecs):
            by_author.setdefault(frag.author_key, []).append((frag.fragment_id, vec))
        rng = random.Random(spec.seed)
        out_vecs, out_labels = [], []
        for author in sorted(by_author):
            rows = sorted(by_author[author], key=lambda r: r[0])
            if spec.mode == "random":
                rng.shuffle(rows)
            for start in range(0, len(rows) - spec.group_size + 1, spec.group_size):
                chunk = [v for _, v in rows[start:start + spec.group_size]]
                out_vecs.append(merge_vectors(chunk, normalize))
                out_labels.append(author)
        return out_vecs, out_labels

    total = 0
    correct = 0
    for fold in range(plan.k):
        train = [f for f in fragments if plan.assignment[f.fragment_id] != fold]
        test = [f for f in fragments if plan.assignment[f.fragment_id] == fold]
        if not test:
            continue
        dictionary = feat_mod.build_dictionary(
            [cache[f.fragment_id] for f in train],
            [f.author_key for f in train],
        )
        train_vecs, train_labels = side_vectors(train, dictionary, train_merged)
        test_vecs, test_labels = side_vectors(test, dictionary, test_merged)
        model = train_forest(
            train_vecs, train_labels,
            dataclasses.replace(cfg, seed=_fold_seed(cfg.seed, fold)),
        )
        for vec, truth in zip(test_vecs, test_labels):
            dist = predict_distribution(model, vec)
            total += 1
            if dist.predicted_class == truth:
                correct += 1
    if total == 0:
        raise EnsembleError("merged experiment produced no evaluations")
    return correct / total


def coefficient_of_variation(ds: list[PredictionDistribution]) -> dict:
    """Per-class population std / mean across member distributions.

    Classes with zero mean are absent from the result.
    """
    if len(ds) < 2:
        raise EnsembleError("coefficient of variation needs >= 2 members")
    classes = ds[0].classes
    for d in ds:
        if d.classes != classes:
            raise EnsembleError("class-set mismatch between distributions")
    stacked = np.vstack([d.probs for d in ds])
    means = stacked.mean(axis=0)
    stds = stacked.std(axis=0)  # population std
    return {
        cls: float(stds[i] / means[i])
        for i, cls in enumerate(classes)
        if means[i] > 0
    }


def write_group_attributions_csv(rows, path) -> None:
    """rows: iterable of (group_id, truth, predicted, confidence, group_size)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["group_id", "truth", "predicted", "confidence", "group_size"])
        for row in rows:
            w.writerow(row)
