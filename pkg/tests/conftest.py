"""Shared fixtures: synthetic corpora, feature caches, a git fixture repo."""

import os
import subprocess

import pytest

from stylofrag import features as feat_mod
from stylofrag.blame import Fragment, count_code_lines
from stylofrag.corpus import Corpus
from stylofrag.forest import ForestConfig
from stylofrag.synthetic import generate_corpus


@pytest.fixture(scope="session")
def synthetic_corpus():
    """The acceptance corpus: 12 authors x 150 fragments, fixed seed."""
    return generate_corpus(n_authors=12, samples_per_author=150, seed=1)


@pytest.fixture(scope="session")
def feature_cache(synthetic_corpus):
    return {
        f.fragment_id: feat_mod.extract_features(f)
        for f in synthetic_corpus.fragments
    }


@pytest.fixture(scope="session")
def acceptance_cfg():
    # small forest: deep enough to separate 12 authors, fast enough for CI
    return ForestConfig(
        n_trees=30, max_depth=25, features_per_split=50, seed=7
    )


@pytest.fixture(scope="session")
def small_corpus():
    """3 authors x 24 fragments; fast enough for CLI round trips."""
    return generate_corpus(n_authors=3, samples_per_author=24, seed=5)


def make_fragment(fid, author, lines, repo="test", path="a.cpp", start=1):
    return Fragment(
        fragment_id=fid,
        author_key=author,
        lines=tuple(lines),
        origin=(repo, path, start),
        loc=count_code_lines(lines),
    )


@pytest.fixture
def tiny_corpus():
    frags = []
    bodies = {
        "a@x": ["int a = 1;", "a += 2;", "return a;"],
        "b@x": ["for (int i = 0; i < 9; i++) {", "}", "break;"],
    }
    for author, lines in bodies.items():
        for i in range(6):
            frags.append(make_fragment(
                f"{author}/{i}", author, lines + [f"// v{i}"], start=i * 4 + 1
            ))
    return Corpus(tuple(frags))


GOLDEN_V1 = """\
#include <stdio.h>

int add(int a, int b) {
    return a + b;
}
"""

GOLDEN_V2 = """\
#include <stdio.h>

int add(int a, int b) {
    return a + b; // overflow unchecked
}

int main() {
    printf("%d\\n", add(1, 2));
    return 0;
}
"""


def _git(args, cwd, author, email, when):
    env = dict(
        os.environ,
        GIT_AUTHOR_NAME=author,
        GIT_AUTHOR_EMAIL=email,
        GIT_AUTHOR_DATE=when,
        GIT_COMMITTER_NAME=author,
        GIT_COMMITTER_EMAIL=email,
        GIT_COMMITTER_DATE=when,
    )
    subprocess.run(
        ["git", *args], cwd=cwd, env=env, check=True, capture_output=True
    )


def build_golden_repo(root):
    """Two commits by two authors over one file, fully deterministic."""
    repo = root / "goldenrepo"
    repo.mkdir()
    _git(["init", "-q"], repo, "Alice", "alice@example.com",
         "2020-01-01T00:00:00 +0000")
    (repo / "frag.cpp").write_text(GOLDEN_V1)
    _git(["add", "frag.cpp"], repo, "Alice", "alice@example.com",
         "2020-01-01T00:00:00 +0000")
    _git(["commit", "-q", "-m", "add add()"], repo, "Alice",
         "alice@example.com", "2020-01-01T00:00:00 +0000")
    (repo / "frag.cpp").write_text(GOLDEN_V2)
    _git(["add", "frag.cpp"], repo, "Bob", "bob@example.com",
         "2020-02-01T00:00:00 +0000")
    _git(["commit", "-q", "-m", "add main(), note overflow"], repo, "Bob",
         "bob@example.com", "2020-02-01T00:00:00 +0000")
    return repo


@pytest.fixture
def golden_repo(tmp_path):
    return build_golden_repo(tmp_path)
