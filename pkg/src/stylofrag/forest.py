"""From-scratch random forest over sparse feature vectors.

Trees are grown on bootstrap resamples with Gini-impurity-minimizing splits
at midpoints of observed values, over a per-node random feature subset.
Probabilities are exact tree-vote fractions. Each tree derives its own
random stream from (seed, tree index), so parallel or serial training gives
identical models.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import sparse as sp

from .corpus import Corpus, FoldPlan
from . import features as feat_mod
from .features import SparseFeatureVector


class ForestError(Exception):
    pass


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    max_depth: int | None = None  # None = unlimited
    features_per_split: int = 50
    min_samples_leaf: int = 1
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ForestError("n_trees must be >= 1")
        if self.features_per_split < 1:
            raise ForestError("features_per_split must be >= 1")


@dataclass(frozen=True)
class DecisionTree:
    # parallel node arrays; feature < 0 marks a leaf
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    class_counts: np.ndarray  # (n_nodes, n_classes)
    leaf_class: np.ndarray

    def vote(self, entries: dict) -> int:
        i = 0
        while self.feature[i] >= 0:
            value = entries.get(int(self.feature[i]), 0.0)
            i = int(self.left[i] if value <= self.threshold[i] else self.right[i])
        return int(self.leaf_class[i])


@dataclass(frozen=True)
class RandomForestModel:
    trees: tuple
    classes: tuple  # sorted author keys
    dictionary_dimension: int
    config: ForestConfig = field(compare=False, default=ForestConfig())


@dataclass(frozen=True)
class PredictionDistribution:
    probs: np.ndarray
    classes: tuple
    fragment_ids: tuple = ()

    @property
    def predicted_index(self) -> int:
        return int(np.argmax(self.probs))  # ties break to lower index

    @property
    def predicted_class(self):
        return self.classes[self.predicted_index]

    @property
    def confidence(self) -> float:
        return float(self.probs[self.predicted_index])


def vectors_to_csr(vectors: list[SparseFeatureVector]) -> sp.csr_matrix:
    if not vectors:
        raise ForestError("empty vector list")
    dim = vectors[0].dimension
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for vec in vectors:
        if vec.dimension != dim:
            raise ForestError("inconsistent vector dimensions")
        cols = sorted(vec.entries)
        indices.extend(cols)
        data.extend(vec.entries[c] for c in cols)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=np.float64),
         np.asarray(indices, dtype=np.int64),
         np.asarray(indptr, dtype=np.int64)),
        shape=(len(vectors), dim),
    )


# Matrices up to this many cells are densified per tree; larger ones stay
# sparse and only per-node candidate blocks are materialized.
_DENSE_CELL_LIMIT = 40_000_000


@njit(cache=True)
def _best_split_kernel(sub, y, n_classes, min_leaf):  # pragma: no cover - jit
    m, c = sub.shape
    counts = np.zeros(n_classes, np.int64)
    for i in range(m):
        counts[y[i]] += 1
    ss_parent = 0.0
    for z in range(n_classes):
        ss_parent += counts[z] * counts[z]
    parent_gini = 1.0 - ss_parent / (m * m)
    best_obj = -1.0
    best_col = -1
    best_thr = 0.0
    left = np.zeros(n_classes, np.int64)
    for j in range(c):
        col = sub[:, j]
        order = np.argsort(col, kind="mergesort")
        for z in range(n_classes):
            left[z] = 0
        ss_left = 0.0  # sum_c left_c^2, updated incrementally
        cross = 0.0  # sum_c total_c * left_c
        for s in range(1, m):
            z = y[order[s - 1]]
            ss_left += 2.0 * left[z] + 1.0
            cross += counts[z]
            left[z] += 1
            if s < min_leaf or m - s < min_leaf:
                continue
            v0 = col[order[s - 1]]
            v1 = col[order[s]]
            if v1 <= v0:
                continue
            ss_right = ss_parent - 2.0 * cross + ss_left
            # weighted gini = 1 - (ss_left/s + ss_right/(m-s)) / m
            obj = ss_left / s + ss_right / (m - s)
            if obj > best_obj + 1e-12:
                best_obj = obj
                best_col = j
                best_thr = 0.5 * (v0 + v1)
    decrease = parent_gini - (1.0 - best_obj / m)
    return best_col, best_thr, decrease


def _best_split(sub: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int):
    """Best (column, threshold, gini decrease) over a dense candidate block.

    Thresholds are midpoints of adjacent distinct sorted values; ties keep
    the first (lowest column, lowest position). Returns None when no split
    decreases impurity.
    """
    m, _ = sub.shape
    if m < 2 * min_leaf:
        return None
    col, thr, decrease = _best_split_kernel(
        np.ascontiguousarray(sub), y, n_classes, min_leaf
    )
    if col < 0 or decrease <= 1e-12:
        return None
    return int(col), float(thr), float(decrease)


class _TreeBuilder:
    def __init__(self, X, Xd, y, n_classes, cfg, rng):
        self.X = X
        self.Xd = Xd  # dense copy or None
        self.y = y
        self.k = n_classes
        self.cfg = cfg
        self.rng = rng
        self.dim = X.shape[1]
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.counts: list[np.ndarray] = []

    def _block(self, idx: np.ndarray, cand: np.ndarray) -> np.ndarray:
        if self.Xd is not None:
            return self.Xd[np.ix_(idx, cand)]
        return np.asarray(self.X[idx][:, cand].todense())

    def build(self, idx: np.ndarray) -> int:
        stack = [(idx, 0, -1, False)]  # (indices, depth, parent, is_right)
        root = -1
        while stack:
            idx, depth, parent, is_right = stack.pop()
            node_id = len(self.feature)
            if parent >= 0:
                if is_right:
                    self.right[parent] = node_id
                else:
                    self.left[parent] = node_id
            else:
                root = node_id
            counts = np.bincount(self.y[idx], minlength=self.k).astype(np.float64)
            self.feature.append(-1)
            self.threshold.append(0.0)
            self.left.append(-1)
            self.right.append(-1)
            self.counts.append(counts)
            pure = int((counts > 0).sum()) <= 1
            depth_capped = (
                self.cfg.max_depth is not None and depth >= self.cfg.max_depth
            )
            if pure or depth_capped or len(idx) < 2 * self.cfg.min_samples_leaf:
                continue
            n_cand = min(self.cfg.features_per_split, self.dim)
            cand = np.sort(self.rng.choice(self.dim, size=n_cand, replace=False))
            sub = self._block(idx, cand)
            best = _best_split(sub, self.y[idx], self.k, self.cfg.min_samples_leaf)
            if best is None:
                continue
            col, threshold, _ = best
            mask = sub[:, col] <= threshold
            self.feature[node_id] = int(cand[col])
            self.threshold[node_id] = threshold
            stack.append((idx[~mask], depth + 1, node_id, True))
            stack.append((idx[mask], depth + 1, node_id, False))
        return root

    def finish(self) -> DecisionTree:
        counts = np.vstack(self.counts)
        return DecisionTree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            class_counts=counts,
            leaf_class=np.argmax(counts, axis=1).astype(np.int64),
        )


def train_forest(
    vectors: list[SparseFeatureVector], labels: list, cfg: ForestConfig
) -> RandomForestModel:
    """Grow cfg.n_trees trees on bootstrap resamples; deterministic per seed."""
    if len(vectors) != len(labels):
        raise ForestError("vectors and labels length mismatch")
    if len(vectors) < 2:
        raise ForestError("need at least 2 training samples")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise ForestError("need at least 2 distinct classes")
    class_index = {c: i for i, c in enumerate(classes)}
    y = np.asarray([class_index[l] for l in labels], dtype=np.int64)
    X = vectors_to_csr(vectors)
    n, dim = X.shape
    Xd = np.asarray(X.todense()) if n * dim <= _DENSE_CELL_LIMIT else None
    trees = []
    for t in range(cfg.n_trees):
        rng = np.random.default_rng([cfg.seed & 0xFFFFFFFFFFFFFFFF, t])
        idx = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
        builder = _TreeBuilder(X, Xd, y, len(classes), cfg, rng)
        builder.build(np.asarray(idx, dtype=np.int64))
        trees.append(builder.finish())
    return RandomForestModel(
        trees=tuple(trees), classes=classes, dictionary_dimension=dim, config=cfg
    )


def predict_distribution(
    model: RandomForestModel, x: SparseFeatureVector, fragment_id: str = ""
) -> PredictionDistribution:
    """Vote-fraction probabilities: probs[c] = votes_c / n_trees exactly."""
    if x.dimension != model.dictionary_dimension:
        raise ForestError(
            f"vector dimension {x.dimension} != model dimension "
            f"{model.dictionary_dimension}"
        )
    votes = np.zeros(len(model.classes), dtype=np.int64)
    for tree in model.trees:
        votes[tree.vote(x.entries)] += 1
    probs = votes / len(model.trees)
    return PredictionDistribution(
        probs=probs, classes=model.classes,
        fragment_ids=(fragment_id,) if fragment_id else (),
    )


@dataclass(frozen=True)
class CrossValResult:
    predictions: tuple  # of (fragment_id, truth, PredictionDistribution)
    accuracy: float


def _fold_seed(base: int, fold: int) -> int:
    return (base * 1_000_003 + fold) & 0x7FFFFFFFFFFFFFFF


def cross_validate(
    c: Corpus, plan: FoldPlan, cfg: ForestConfig, feature_cache: dict | None = None
) -> CrossValResult:
    """K-fold cross-validation: dictionary and forest fit per training fold.

    Fragments are canonically pre-sorted by fragment_id so input order never
    affects results. Every fragment is predicted exactly once.
    """
    fragments = sorted(c.fragments, key=lambda f: f.fragment_id)
    missing = [f.fragment_id for f in fragments if f.fragment_id not in plan.assignment]
    if missing:
        raise ForestError(f"fold plan does not cover {len(missing)} fragments")
    cache = feature_cache if feature_cache is not None else {}
    for frag in fragments:
        if frag.fragment_id not in cache:
            cache[frag.fragment_id] = feat_mod.extract_features(frag)
    predictions = []
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
        train_vecs = [feat_mod.vectorize(cache[f.fragment_id], dictionary) for f in train]
        model = train_forest(
            train_vecs,
            [f.author_key for f in train],
            dataclasses.replace(cfg, seed=_fold_seed(cfg.seed, fold)),
        )
        for frag in test:
            vec = feat_mod.vectorize(cache[frag.fragment_id], dictionary)
            dist = predict_distribution(model, vec, frag.fragment_id)
            predictions.append((frag.fragment_id, frag.author_key, dist))
            if dist.predicted_class == frag.author_key:
                correct += 1
    return CrossValResult(
        predictions=tuple(predictions),
        accuracy=correct / len(predictions) if predictions else 0.0,
    )


def two_class_task(
    c: Corpus, a: str, b: str, cfg: ForestConfig, plan: FoldPlan,
    feature_cache: dict | None = None,
) -> float:
    """Cross-validated accuracy restricted to authors a and b."""
    if a == b:
        raise ForestError("two_class_task needs distinct authors")
    sub = Corpus(tuple(f for f in c.fragments if f.author_key in (a, b)))
    if not sub.authors == {a, b}:
        raise ForestError("both authors must be present in the corpus")
    return cross_validate(sub, plan, cfg, feature_cache).accuracy


def verification_task(
    c: Corpus, a: str, cfg: ForestConfig, plan: FoldPlan,
    feature_cache: dict | None = None,
) -> float:
    """Binary cross-validation of author a vs the merged complement."""
    if a not in c.authors:
        raise ForestError(f"author {a} not in corpus")
    if len(c.authors) < 2:
        raise ForestError("verification needs at least 2 authors")
    from .blame import relabel

    other = f"\x00not-{a}"  # sorts below real author keys; never collides
    frags = tuple(
        f if f.author_key == a else relabel(f, other) for f in c.fragments
    )
    return cross_validate(Corpus(frags), plan, cfg).accuracy


MODEL_FORMAT_VERSION = 1


def save_model(model: RandomForestModel, path) -> None:
    """Serialize to .npz: flattened node arrays plus a JSON header."""
    offsets = np.cumsum([0] + [len(t.feature) for t in model.trees])
    header = {
        "version": MODEL_FORMAT_VERSION,
        "classes": list(model.classes),
        "dimension": model.dictionary_dimension,
        "config": dataclasses.asdict(model.config),
    }
    np.savez_compressed(
        path,
        header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
        offsets=offsets,
        feature=np.concatenate([t.feature for t in model.trees]),
        threshold=np.concatenate([t.threshold for t in model.trees]),
        left=np.concatenate([t.left for t in model.trees]),
        right=np.concatenate([t.right for t in model.trees]),
        class_counts=np.concatenate([t.class_counts for t in model.trees]),
    )


def load_model(path) -> RandomForestModel:
    data = np.load(path)
    header = json.loads(bytes(data["header"]).decode())
    if header["version"] != MODEL_FORMAT_VERSION:
        raise ForestError(f"unsupported model version {header['version']}")
    offsets = data["offsets"]
    trees = []
    for i in range(len(offsets) - 1):
        lo, hi = int(offsets[i]), int(offsets[i + 1])
        counts = data["class_counts"][lo:hi]
        trees.append(DecisionTree(
            feature=data["feature"][lo:hi],
            threshold=data["threshold"][lo:hi],
            left=data["left"][lo:hi],
            right=data["right"][lo:hi],
            class_counts=counts,
            leaf_class=np.argmax(counts, axis=1).astype(np.int64),
        ))
    return RandomForestModel(
        trees=tuple(trees),
        classes=tuple(header["classes"]),
        dictionary_dimension=int(header["dimension"]),
        config=ForestConfig(**header["config"]),
    )
