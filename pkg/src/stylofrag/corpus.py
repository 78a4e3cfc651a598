"""Corpus hygiene and experiment framing.

Dedupe, balancing, LOC filtering, stratified fold plans, open-world author
partitions, label corruption and corpus statistics. All operations are pure
corpus-in/corpus-out transformations; every random choice flows from one
explicit seed.
"""

from __future__ import annotations

import csv
import random
from collections import Counter, defaultdict
from dataclasses import dataclass

from .blame import Fragment, relabel


class CorpusError(Exception):
    pass


@dataclass(frozen=True)
class Corpus:
    fragments: tuple[Fragment, ...]

    def __post_init__(self):
        ids = [f.fragment_id for f in self.fragments]
        if len(ids) != len(set(ids)):
            raise CorpusError("duplicate fragment_ids in corpus")

    @property
    def authors(self) -> set[str]:
        return {f.author_key for f in self.fragments}

    def by_author(self) -> dict[str, list[Fragment]]:
        grouped: dict[str, list[Fragment]] = defaultdict(list)
        for f in self.fragments:
            grouped[f.author_key].append(f)
        return dict(grouped)

    def __len__(self) -> int:
        return len(self.fragments)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: dict  # fragment_id -> fold index in [0, k)


@dataclass(frozen=True)
class OpenWorldPartition:
    suspects: frozenset[str]
    unknowns: frozenset[str]


def dedupe(c: Corpus) -> Corpus:
    """Drop every fragment whose exact line content occurs more than once.

    All occurrences go, not all-but-one: repeated content has untrustworthy
    authorship either way.
    """
    counts = Counter(f.content() for f in c.fragments)
    return Corpus(tuple(f for f in c.fragments if counts[f.content()] == 1))


def filter_min_loc(c: Corpus, min_loc: int) -> Corpus:
    if min_loc < 1:
        raise CorpusError("min_loc must be >= 1")
    return Corpus(tuple(f for f in c.fragments if f.loc >= min_loc))


def balance_per_author(c: Corpus, n_per_author: int, seed: int) -> Corpus:
    """Down-sample every author to exactly n_per_author fragments.

    Authors below the threshold are dropped entirely. Sampling is uniform
    without replacement, seeded.
    """
    if n_per_author < 1:
        raise CorpusError("n_per_author must be >= 1")
    rng = random.Random(seed)
    kept: list[Fragment] = []
    for author in sorted(c.authors):
        frags = sorted(
            (f for f in c.fragments if f.author_key == author),
            key=lambda f: f.fragment_id,
        )
        if len(frags) < n_per_author:
            continue
        kept.extend(rng.sample(frags, n_per_author))
    if not kept:
        raise CorpusError("balancing left an empty corpus")
    kept.sort(key=lambda f: f.fragment_id)
    return Corpus(tuple(kept))


def stratified_folds(c: Corpus, k: int, seed: int) -> FoldPlan:
    """Assign fragments to k folds, round-robin per author after a shuffle.

    Per author, fold sizes differ by at most one.
    """
    if k < 1:
        raise CorpusError("fold count must be >= 1")
    rng = random.Random(seed)
    assignment: dict[str, int] = {}
    for author, frags in sorted(c.by_author().items()):
        if len(frags) < k:
            raise CorpusError(
                f"author {author} has {len(frags)} fragments, fewer than {k} folds"
            )
        ids = sorted(f.fragment_id for f in frags)
        rng.shuffle(ids)
        for i, fid in enumerate(ids):
            assignment[fid] = i % k
    return FoldPlan(k=k, assignment=assignment)


def corrupt_labels(c: Corpus, m: int, seed: int) -> Corpus:
    """Swap author labels between m seeded pairs of differently-labeled fragments.

    Each swap corrupts exactly two labels, so the corrupted fraction is
    2m/N exactly. The label multiset and the fragment set are unchanged.
    """
    if m < 0:
        raise CorpusError("m must be >= 0")
    frags = list(c.fragments)
    if m > 0 and len({f.author_key for f in frags}) < 2:
        raise CorpusError("corruption needs at least two distinct authors")
    rng = random.Random(seed)
    for _ in range(m):
        for _attempt in range(10_000):
            i, j = rng.randrange(len(frags)), rng.randrange(len(frags))
            if frags[i].author_key != frags[j].author_key:
                break
        else:
            raise CorpusError("could not find a differently-labeled pair to swap")
        frags[i], frags[j] = (
            relabel(frags[i], frags[j].author_key),
            relabel(frags[j], frags[i].author_key),
        )
    return Corpus(tuple(frags))


def partition_open_world(
    c: Corpus, n_unknown: int, round_index: int, seed: int
) -> OpenWorldPartition:
    """Shuffle the author set once and take chunk `round_index` as unknowns."""
    authors = sorted(c.authors)
    if n_unknown < 1 or n_unknown > len(authors):
        raise CorpusError("n_unknown out of range")
    n_rounds = len(authors) // n_unknown
    if round_index < 0 or round_index >= n_rounds:
        raise CorpusError(f"round must be in [0, {n_rounds})")
    rng = random.Random(seed)
    rng.shuffle(authors)
    unknowns = frozenset(authors[round_index * n_unknown:(round_index + 1) * n_unknown])
    return OpenWorldPartition(
        suspects=frozenset(a for a in authors if a not in unknowns),
        unknowns=unknowns,
    )


_LOC_BUCKETS = [str(i) for i in range(1, 10)] + ["10-99", ">=100"]


def _loc_bucket(loc: int) -> str:
    if loc < 1:
        return "0"
    if loc < 10:
        return str(loc)
    if loc < 100:
        return "10-99"
    return ">=100"


def loc_histogram(c: Corpus) -> list[tuple[str, int, float]]:
    """Bucketed LOC counts with percentages: 1..9 individually, 10-99, >=100."""
    counts = Counter(_loc_bucket(f.loc) for f in c.fragments)
    total = len(c.fragments)
    buckets = (["0"] if counts.get("0") else []) + _LOC_BUCKETS
    rows = []
    for b in buckets:
        n = counts.get(b, 0)
        rows.append((b, n, 100.0 * n / total if total else 0.0))
    return rows


def write_loc_histogram_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["loc_bucket", "count", "percent"])
        for bucket, count, percent in rows:
            w.writerow([bucket, count, f"{percent:.2f}"])
