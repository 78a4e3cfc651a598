"""Seeded synthetic fragment corpus for experiments and acceptance runs.

Authors are simulated as mixtures over a shared pool of C++ statement
templates plus author-specific identifier and API habits. Sharing the
template pool keeps authors confusable at the single-fragment level, while
the mixture weights make accounts separable once several fragments are
aggregated, mirroring the behavior of real blame-mined corpora.
"""

from __future__ import annotations

import numpy as np

from .blame import Fragment, count_code_lines
from .corpus import Corpus

# Statement templates; {i} is a loop variable, {id*} identifiers, {n*}
# numeric literals, {api} an API call and {w*} comment words.
TEMPLATES = (
    "int {id} = {n};",
    "int {id} = {id2} + {n};",
    "double {id} = {n}.{n2};",
    "auto {id} = {id2};",
    "bool {id} = {id2} == {n};",
    "{id} = {n};",
    "{id} += {n};",
    "{id} -= {id2};",
    "{id} = {id2} * {n};",
    "{id} = {id2} ? {n} : {n2};",
    "{id}++;",
    "++{id};",
    "{id}--;",
    "for (int {i} = 0; {i} < {n}; {i}++) {{",
    "for (int {i} = 0; {i} < {id}; ++{i}) {{",
    "while ({id} > {n}) {{",
    "while ({id} != {id2}) {{",
    "do {{",
    "if ({id} == {n}) {{",
    "if ({id} < {id2}) {{",
    "if (!{id}) return;",
    "}} else {{",
    "}}",
    "return {id};",
    "return {n};",
    "break;",
    "continue;",
    "switch ({id}) {{",
    "case {n}: {id} = {n2}; break;",
    "{api}({id});",
    "{api}(\"{w}\");",
    "{id}.{api}({id2});",
    "{id}->{api}({n});",
    "std::vector<int> {id};",
    "std::string {id} = \"{w}\";",
    "const auto& {id} = {id2}.{api}();",
    "{id}[{i}] = {id2}[{i}] + {n};",
    "// {w} {w2}",
    "/* {w}: {w2} */",
    "#include <{w}.h>",
)

_IDENT_POOL = (
    "count", "total", "value", "index", "result", "buffer", "data", "node",
    "item", "key", "val", "sum", "temp", "flag", "pos", "len", "size_",
    "acc", "cur", "next_", "prev_", "left", "right", "width", "height",
    "offset", "score", "rate", "limit", "state",
)
_COMMON_IDENTS = ("i", "j", "k", "x", "y", "n")
_API_POOL = (
    "printf", "push_back", "size", "begin", "end", "find", "insert", "erase",
    "sort", "memset", "strlen", "malloc", "free", "sqrt", "abs", "min",
    "max", "resize", "clear", "substr",
)
_WORD_POOL = (
    "todo", "fixme", "note", "init", "update", "cleanup", "parse", "check",
    "main", "util", "config", "loop", "edge", "cache", "reset",
)


class AuthorStyle:
    """Sampled per-author writing habits."""

    def __init__(self, rng: np.random.Generator, template_alpha: float):
        self.template_weights = rng.dirichlet(
            np.full(len(TEMPLATES), template_alpha)
        )
        idents = rng.choice(len(_IDENT_POOL), size=8, replace=False)
        self.idents = tuple(_IDENT_POOL[i] for i in idents)
        apis = rng.choice(len(_API_POOL), size=6, replace=False)
        self.apis = tuple(_API_POOL[i] for i in apis)
        words = rng.choice(len(_WORD_POOL), size=5, replace=False)
        self.words = tuple(_WORD_POOL[i] for i in words)
        self.common_ident_rate = float(rng.uniform(0.2, 0.7))
        self.number_scale = int(rng.integers(1, 4))  # digits in literals


def _render_line(style: AuthorStyle, rng: np.random.Generator) -> str:
    template = TEMPLATES[
        int(rng.choice(len(TEMPLATES), p=style.template_weights))
    ]

    def ident() -> str:
        if rng.random() < style.common_ident_rate:
            return _COMMON_IDENTS[int(rng.integers(len(_COMMON_IDENTS)))]
        return style.idents[int(rng.integers(len(style.idents)))]

    def number() -> str:
        return str(int(rng.integers(0, 10 ** style.number_scale)))

    return template.format(
        i=_COMMON_IDENTS[int(rng.integers(3))],
        id=ident(), id2=ident(), id3=ident(),
        n=number(), n2=number(),
        api=style.apis[int(rng.integers(len(style.apis)))],
        w=style.words[int(rng.integers(len(style.words)))],
        w2=style.words[int(rng.integers(len(style.words)))],
    )


def _fragment_lines(style: AuthorStyle, rng: np.random.Generator) -> tuple[str, ...]:
    n_lines = min(1 + int(rng.geometric(0.45)) - 1 + (1 if rng.random() < 0.25 else 0), 8)
    n_lines = max(n_lines, 1)
    return tuple(_render_line(style, rng) for _ in range(n_lines))


def generate_corpus(
    n_authors: int = 12,
    samples_per_author: int = 150,
    seed: int = 0,
    template_alpha: float = 0.25,
) -> Corpus:
    """Generate a deterministic synthetic corpus with distinct author styles."""
    rng = np.random.default_rng(seed)
    styles = [AuthorStyle(rng, template_alpha) for _ in range(n_authors)]
    seen: set[str] = set()
    fragments: list[Fragment] = []
    for ai, style in enumerate(styles):
        author = f"author{ai:02d}@synthetic"
        line_cursor = 1
        for si in range(samples_per_author):
            for _attempt in range(200):
                lines = _fragment_lines(style, rng)
                content = "\n".join(lines)
                if content not in seen:
                    break
            else:
                # salt with a unique trailing comment to force uniqueness
                lines = lines + (f"// uniq {ai} {si}",)
                content = "\n".join(lines)
            seen.add(content)
            fragments.append(Fragment(
                fragment_id=f"synthetic/a{ai:02d}.cpp:{line_cursor}",
                author_key=author,
                lines=lines,
                origin=("synthetic", f"a{ai:02d}.cpp", line_cursor),
                loc=count_code_lines(lines),
            ))
            line_cursor += len(lines)
    return Corpus(tuple(fragments))
