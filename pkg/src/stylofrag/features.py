"""Stylometric feature extraction over fragments.

Per fragment we count AST node unigrams and parent>child bigrams (from the
fuzzy parse of the dummy-main-wrapped text), word unigrams, C++ keywords and
API symbols (from the unwrapped lines, so the wrapper never leaks into
counts). A dictionary fit on training data maps (category, weighting, token)
keys to dense column indices, in both raw and TF-IDF weightings, dropping
any column that is constant across the training samples.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources

from .blame import Fragment, wrap_dummy_main
from .parsing import fuzzy_parse, node_bigrams, node_unigrams

CATEGORIES = ("ast_node", "ast_bigram", "word_unigram", "keyword", "api_symbol")
WEIGHTINGS = ("raw", "tfidf")

CPP_KEYWORDS = frozenset({
    "alignas", "alignof", "and", "and_eq", "asm", "auto", "bitand", "bitor",
    "bool", "break", "case", "catch", "char", "char16_t", "char32_t",
    "class", "compl", "const", "const_cast", "constexpr", "continue",
    "decltype", "default", "delete", "do", "double", "dynamic_cast", "else",
    "enum", "explicit", "export", "extern", "false", "float", "for",
    "friend", "goto", "if", "inline", "int", "long", "mutable", "namespace",
    "new", "noexcept", "not", "not_eq", "nullptr", "operator", "or",
    "or_eq", "private", "protected", "public", "register",
    "reinterpret_cast", "return", "short", "signed", "sizeof", "static",
    "static_assert", "static_cast", "struct", "switch", "template", "this",
    "thread_local", "throw", "true", "try", "typedef", "typeid", "typename",
    "union", "unsigned", "using", "virtual", "void", "volatile", "wchar_t",
    "while", "xor", "xor_eq",
})


def _load_api_symbols() -> frozenset[str]:
    text = resources.files("stylofrag").joinpath("data/api_symbols.txt").read_text()
    return frozenset(
        line.strip() for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    )


API_SYMBOLS = _load_api_symbols()


class FeatureError(Exception):
    pass


def tokenize_words(source: str) -> list[str]:
    """Word tokenizer: [A-Za-z0-9_] runs, single-char punctuation, STR/CHR
    placeholders for string and char literal contents."""
    tokens: list[str] = []
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch == '"' or ch == "'":
            quote = ch
            j = i + 1
            while j < n and source[j] != quote and source[j] != "\n":
                if source[j] == "\\":
                    j += 1
                j += 1
            i = min(j + 1, n)
            tokens.append("STR" if quote == '"' else "CHR")
            continue
        if ch.isalnum() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(source[i:j])
            i = j
            continue
        tokens.append(ch)
        i += 1
    return tokens


def keyword_counts(tokens: list[str]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for tok in tokens:
        if tok in CPP_KEYWORDS:
            counts[tok] = counts.get(tok, 0) + 1
    return counts


def api_symbol_counts(tokens: list[str]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for tok in tokens:
        if tok in API_SYMBOLS:
            counts[tok] = counts.get(tok, 0) + 1
    return counts


@dataclass(frozen=True)
class FragmentFeatures:
    """Raw counts for one fragment: (category, token) -> count."""

    counts: dict
    token_count: int


def extract_features(fragment: Fragment) -> FragmentFeatures:
    """Extract all count features. The dummy-main wrapper contributes only to
    the AST walk; word/keyword/API counts come from the unwrapped lines."""
    tree = fuzzy_parse(wrap_dummy_main(fragment))
    tokens = tokenize_words(fragment.content())
    counts: dict[tuple[str, str], int] = {}
    for kind, c in node_unigrams(tree).items():
        counts[("ast_node", kind)] = c
    for bigram, c in node_bigrams(tree).items():
        counts[("ast_bigram", bigram)] = c
    for tok in tokens:
        key = ("word_unigram", tok)
        counts[key] = counts.get(key, 0) + 1
    for kw, c in keyword_counts(tokens).items():
        counts[("keyword", kw)] = c
    for sym, c in api_symbol_counts(tokens).items():
        counts[("api_symbol", sym)] = c
    return FragmentFeatures(counts=counts, token_count=max(len(tokens), 1))


@dataclass(frozen=True)
class FeatureKey:
    category: str
    weighting: str
    token: str


@dataclass(frozen=True)
class FeatureDictionary:
    entries: dict  # FeatureKey -> column index, dense 0..dim-1
    idf: dict  # (category, token) -> ln(n_authors / n_authors_using)
    n_authors_fit: int

    @property
    def dimension(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class SparseFeatureVector:
    entries: dict  # column index -> nonzero value, all >= 0
    dimension: int

    def nonzero_count(self) -> int:
        return len(self.entries)


def build_dictionary(
    features: list[FragmentFeatures], authors: list[str]
) -> FeatureDictionary:
    """Fit a feature dictionary on training fragments.

    Every key observed in training gets a raw and a tfidf column unless the
    column would be constant across all training samples (a key used by all
    authors has idf 0, so its tfidf column is constant zero and excluded).
    """
    if len(features) < 2 or len(set(authors)) < 2:
        raise FeatureError("dictionary needs >= 2 training fragments and >= 2 authors")
    n_samples = len(features)
    n_authors = len(set(authors))
    present: dict[tuple[str, str], int] = {}
    vmin: dict[tuple[str, str], float] = {}
    vmax: dict[tuple[str, str], float] = {}
    users: dict[tuple[str, str], set] = {}
    for feat, author in zip(features, authors):
        for key, count in feat.counts.items():
            value = count / feat.token_count
            present[key] = present.get(key, 0) + 1
            if key not in vmin or value < vmin[key]:
                vmin[key] = value
            if key not in vmax or value > vmax[key]:
                vmax[key] = value
            users.setdefault(key, set()).add(author)
    idf = {
        key: math.log(n_authors / len(users[key])) for key in present
    }
    surviving: list[FeatureKey] = []
    for key in present:
        raw_constant = present[key] == n_samples and vmin[key] == vmax[key]
        if not raw_constant:
            surviving.append(FeatureKey(key[0], "raw", key[1]))
        if idf[key] != 0.0 and not raw_constant:
            surviving.append(FeatureKey(key[0], "tfidf", key[1]))
    if not surviving:
        raise FeatureError("no non-constant feature survives dictionary fitting")
    surviving.sort(key=lambda k: (k.category, k.weighting, k.token))
    entries = {key: i for i, key in enumerate(surviving)}
    return FeatureDictionary(entries=entries, idf=idf, n_authors_fit=n_authors)


def vectorize(feat: FragmentFeatures, dictionary: FeatureDictionary) -> SparseFeatureVector:
    """Map a fragment's counts onto dictionary columns; zeros are not stored."""
    entries: dict[int, float] = {}
    for key, count in feat.counts.items():
        raw = count / feat.token_count
        if raw == 0.0:
            continue
        raw_key = FeatureKey(key[0], "raw", key[1])
        col = dictionary.entries.get(raw_key)
        if col is not None:
            entries[col] = raw
        tfidf_key = FeatureKey(key[0], "tfidf", key[1])
        col = dictionary.entries.get(tfidf_key)
        if col is not None:
            value = raw * dictionary.idf[key]
            if value != 0.0:
                entries[col] = value
    return SparseFeatureVector(entries=entries, dimension=dictionary.dimension)


def sparsity_report(vectors: list[SparseFeatureVector]) -> tuple[int, float]:
    """(dimension, mean nonzero entries per vector)."""
    if not vectors:
        return (0, 0.0)
    dim = vectors[0].dimension
    mean = sum(v.nonzero_count() for v in vectors) / len(vectors)
    return (dim, mean)


DICTIONARY_FORMAT_VERSION = 1


def save_dictionary(dictionary: FeatureDictionary, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "version", DICTIONARY_FORMAT_VERSION,
            "dimension", dictionary.dimension,
            "n_authors_fit", dictionary.n_authors_fit,
        ])
        for key, index in sorted(dictionary.entries.items(), key=lambda kv: kv[1]):
            writer.writerow([
                key.category, key.weighting, key.token, index,
                repr(dictionary.idf[(key.category, key.token)]),
            ])


def load_dictionary(path) -> FeatureDictionary:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "version" or int(header[1]) != DICTIONARY_FORMAT_VERSION:
            raise FeatureError(f"unsupported dictionary file header: {header}")
        n_authors = int(header[5])
        entries: dict[FeatureKey, int] = {}
        idf: dict[tuple[str, str], float] = {}
        for row in reader:
            category, weighting, token, index, idf_value = row
            entries[FeatureKey(category, weighting, token)] = int(index)
            idf[(category, token)] = float(idf_value)
    return FeatureDictionary(entries=entries, idf=idf, n_authors_fit=n_authors)


def save_vectors(vectors_by_id: dict, path) -> None:
    """One line per fragment: id then space-separated index:value pairs."""
    with open(path, "w", encoding="utf-8") as fh:
        for fid, vec in vectors_by_id.items():
            pairs = " ".join(
                f"{i}:{vec.entries[i]!r}" for i in sorted(vec.entries)
            )
            fh.write(f"{fid}\t{vec.dimension}\t{pairs}\n")


def load_vectors(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            fid, dim, pairs = line.split("\t")
            entries = {}
            for pair in pairs.split():
                idx, value = pair.split(":", 1)
                entries[int(idx)] = float(value)
            out[fid] = SparseFeatureVector(entries=entries, dimension=int(dim))
    return out
