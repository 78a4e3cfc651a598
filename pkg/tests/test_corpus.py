"""Corpus hygiene: dedupe, balancing, folds, corruption, partitions."""

import pytest
from hypothesis import given, settings, strategies as st

from stylofrag.corpus import (
    Corpus,
    CorpusError,
    balance_per_author,
    corrupt_labels,
    dedupe,
    filter_min_loc,
    loc_histogram,
    partition_open_world,
    stratified_folds,
)

from conftest import make_fragment


def corpus_of(rows):
    return Corpus(tuple(
        make_fragment(f"r/{i}", author, lines, start=i)
        for i, (author, lines) in enumerate(rows)
    ))


def test_duplicate_ids_rejected():
    f = make_fragment("same", "a", ["x;"])
    with pytest.raises(CorpusError):
        Corpus((f, f))


def test_dedupe_drops_all_copies():
    c = corpus_of([
        ("a", ["x;"]),
        ("b", ["x;"]),  # same content, different author: both go
        ("a", ["y;"]),
    ])
    d = dedupe(c)
    assert [f.lines for f in d.fragments] == [("y;",)]


def test_filter_min_loc():
    c = corpus_of([("a", ["x;", "y;"]), ("a", ["// only a comment"])])
    assert len(filter_min_loc(c, 1)) == 1
    assert len(filter_min_loc(c, 2)) == 1
    assert len(filter_min_loc(c, 3)) == 0
    with pytest.raises(CorpusError):
        filter_min_loc(c, 0)


def test_balance_per_author_drops_small_authors():
    c = corpus_of([("a", ["x;"])] * 1)  # helper gives unique ids per row
    c = corpus_of(
        [("a", [f"x{i};"]) for i in range(5)]
        + [("b", [f"y{i};"]) for i in range(2)]
    )
    balanced = balance_per_author(c, 3, seed=0)
    assert balanced.authors == {"a"}
    assert len(balanced) == 3


def test_balance_is_seeded():
    c = corpus_of([("a", [f"x{i};"]) for i in range(10)])
    one = balance_per_author(c, 4, seed=9)
    two = balance_per_author(c, 4, seed=9)
    assert [f.fragment_id for f in one.fragments] == [
        f.fragment_id for f in two.fragments
    ]


def test_stratified_folds_balance():
    c = corpus_of(
        [("a", [f"x{i};"]) for i in range(10)]
        + [("b", [f"y{i};"]) for i in range(11)]
    )
    plan = stratified_folds(c, 3, seed=0)
    for author, frags in c.by_author().items():
        sizes = [0, 0, 0]
        for f in frags:
            sizes[plan.assignment[f.fragment_id]] += 1
        assert max(sizes) - min(sizes) <= 1, author


def test_stratified_folds_rejects_thin_authors():
    c = corpus_of([("a", ["x;"]), ("b", ["y;"]), ("b", ["z;"])])
    with pytest.raises(CorpusError):
        stratified_folds(c, 2, seed=0)


@given(st.integers(0, 6), st.integers(0, 2 ** 16))
@settings(deadline=None)
def test_corrupt_labels_conserves_counts(m, seed):
    c = corpus_of(
        [("a", [f"x{i};"]) for i in range(8)]
        + [("b", [f"y{i};"]) for i in range(8)]
    )
    corrupted = corrupt_labels(c, m, seed)
    assert len(corrupted) == len(c)
    before = sorted(f.author_key for f in c.fragments)
    after = sorted(f.author_key for f in corrupted.fragments)
    assert before == after  # swaps conserve the label multiset
    changed = sum(
        a.author_key != b.author_key
        for a, b in zip(c.fragments, corrupted.fragments)
    )
    assert changed <= 2 * m
    assert changed % 2 == 0


def test_corrupt_labels_m1_changes_exactly_two():
    c = corpus_of(
        [("a", [f"x{i};"]) for i in range(4)]
        + [("b", [f"y{i};"]) for i in range(4)]
    )
    corrupted = corrupt_labels(c, 1, seed=3)
    changed = sum(
        a.author_key != b.author_key
        for a, b in zip(c.fragments, corrupted.fragments)
    )
    assert changed == 2


def test_corrupt_labels_identity():
    c = corpus_of([("a", ["x;"]), ("b", ["y;"])])
    assert corrupt_labels(c, 0, seed=0) == c


def test_partition_open_world_rounds_are_disjoint():
    c = corpus_of([(f"a{i}", [f"x{i};"]) for i in range(12)])
    seen = set()
    for rnd in range(3):
        part = partition_open_world(c, 4, rnd, seed=2)
        assert len(part.unknowns) == 4
        assert part.suspects | part.unknowns == c.authors
        assert not part.suspects & part.unknowns
        assert not seen & part.unknowns
        seen |= part.unknowns
    with pytest.raises(CorpusError):
        partition_open_world(c, 4, 3, seed=2)


def test_loc_histogram_buckets():
    c = corpus_of([
        ("a", ["x;"]),  # loc 1
        ("a", [f"l{i};" for i in range(12)]),  # loc 10-99
        ("a", ["// comment only"]),  # loc 0
    ])
    rows = dict((b, n) for b, n, _ in loc_histogram(c))
    assert rows["0"] == 1
    assert rows["1"] == 1
    assert rows["10-99"] == 1
    total_percent = sum(p for _, _, p in loc_histogram(c))
    assert abs(total_percent - 100.0) < 1e-9
