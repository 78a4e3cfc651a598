"""Synthetic corpus generator: determinism, shape, uniqueness."""

from stylofrag.synthetic import generate_corpus


def test_shape_and_labels():
    c = generate_corpus(n_authors=4, samples_per_author=10, seed=0)
    assert len(c.fragments) == 40
    assert c.authors == {f"author{i:02d}@synthetic" for i in range(4)}
    for author, frags in c.by_author().items():
        assert len(frags) == 10


def test_content_unique():
    c = generate_corpus(n_authors=5, samples_per_author=30, seed=2)
    contents = [f.content() for f in c.fragments]
    assert len(contents) == len(set(contents))


def test_deterministic():
    a = generate_corpus(n_authors=3, samples_per_author=8, seed=7)
    b = generate_corpus(n_authors=3, samples_per_author=8, seed=7)
    assert a.fragments == b.fragments
    c = generate_corpus(n_authors=3, samples_per_author=8, seed=8)
    assert a.fragments != c.fragments


def test_loc_is_consistent():
    from stylofrag.blame import count_code_lines

    c = generate_corpus(n_authors=2, samples_per_author=5, seed=1)
    for f in c.fragments:
        assert f.loc == count_code_lines(f.lines)
        assert 1 <= len(f.lines) <= 8
