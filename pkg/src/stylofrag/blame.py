"""Repository ingestion: git blame parsing and same-author run segmentation.

Turns version-controlled repositories into per-author fragment corpora. A
fragment is a maximal run of consecutive lines that ``git blame`` attributes
to the same author. Fragments are the unit of attribution everywhere else in
the package, and are exchanged between modules as JSON-lines corpus files
(see :func:`write_corpus_file`).
"""

from __future__ import annotations

import json
import logging
import os
import re
import subprocess
from dataclasses import dataclass, replace
from pathlib import Path

logger = logging.getLogger(__name__)

DUMMY_MAIN_OPEN = "int main() {"
DUMMY_MAIN_CLOSE = "}"


class BlameError(Exception):
    """Base class for ingestion failures."""


class BlameParseError(BlameError):
    """Raised when git blame porcelain output cannot be parsed."""


class NotARepositoryError(BlameError):
    """Raised when the scanned path is not a git work tree."""


class GitCommandError(BlameError):
    """Raised when a git subprocess fails; carries the git diagnostics."""


@dataclass(frozen=True)
class BlamedLine:
    line_number: int  # 1-based position in the file
    author_key: str
    content: str


@dataclass(frozen=True)
class Fragment:
    fragment_id: str
    author_key: str
    lines: tuple[str, ...]
    origin: tuple[str, str, int]  # (repo, file path, 1-based start line)
    loc: int

    def content(self) -> str:
        return "\n".join(self.lines)


_HEADER_RE = re.compile(r"^[0-9a-f]{4,40} \d+ \d+( \d+)?$")


def _normalize_author(mail: str | None, name: str | None) -> str:
    key = mail if mail else name
    if key is None:
        return ""
    key = key.strip()
    if key.startswith("<") and key.endswith(">"):
        key = key[1:-1]
    return key.lower()


def parse_line_porcelain(text: str) -> list[BlamedLine]:
    """Parse ``git blame --line-porcelain`` output for one file.

    Returns one :class:`BlamedLine` per source line, in file order. The
    author key is taken from the ``author-mail`` record, falling back to
    ``author`` when the mail is absent.
    """
    lines = text.splitlines()
    out: list[BlamedLine] = []
    i = 0
    while i < len(lines):
        header = lines[i]
        if not _HEADER_RE.match(header):
            raise BlameParseError(
                f"malformed blame header at line {i + 1}: {header!r}"
            )
        final_lineno = int(header.split()[2])
        i += 1
        author_mail: str | None = None
        author_name: str | None = None
        content: str | None = None
        while i < len(lines):
            ln = lines[i]
            i += 1
            if ln.startswith("\t"):
                content = ln[1:]
                break
            if ln.startswith("author-mail "):
                author_mail = ln[len("author-mail "):]
            elif ln.startswith("author "):
                author_name = ln[len("author "):]
        if content is None:
            raise BlameParseError(
                f"blame block starting at line {i} has no content line"
            )
        key = _normalize_author(author_mail, author_name)
        if not key:
            raise BlameParseError(
                f"blame block for line {final_lineno} carries no author"
            )
        out.append(BlamedLine(final_lineno, key, content))
    return out


def count_code_lines(lines) -> int:
    """Count lines that are neither blank nor comment-only.

    A line is code if non-whitespace remains after stripping ``//`` tails and
    ``/*...*/`` spans; block comments are tracked across lines. String
    literals shield comment markers inside them.
    """
    n = 0
    in_block = False
    for line in lines:
        has_code = False
        i = 0
        in_str: str | None = None
        while i < len(line):
            ch = line[i]
            if in_block:
                if line.startswith("*/", i):
                    in_block = False
                    i += 2
                else:
                    i += 1
                continue
            if in_str is not None:
                has_code = True
                if ch == "\\":
                    i += 2
                    continue
                if ch == in_str:
                    in_str = None
                i += 1
                continue
            if line.startswith("//", i):
                break
            if line.startswith("/*", i):
                in_block = True
                i += 2
                continue
            if ch in "\"'":
                in_str = ch
                has_code = True
                i += 1
                continue
            if not ch.isspace():
                has_code = True
            i += 1
        if has_code:
            n += 1
    return n


def segment_runs(lines: list[BlamedLine], repo: str, path: str) -> list[Fragment]:
    """Split a blamed file into maximal consecutive same-author runs.

    Concatenating the returned fragments' lines reproduces the file.
    """
    fragments: list[Fragment] = []
    run: list[BlamedLine] = []

    def flush() -> None:
        if not run:
            return
        content = tuple(bl.content for bl in run)
        start = run[0].line_number
        fragments.append(
            Fragment(
                fragment_id=f"{repo}/{path}:{start}",
                author_key=run[0].author_key,
                lines=content,
                origin=(repo, path, start),
                loc=count_code_lines(content),
            )
        )

    for bl in lines:
        if run and bl.author_key != run[-1].author_key:
            flush()
            run = []
        run.append(bl)
    flush()
    return fragments


def wrap_dummy_main(fragment: Fragment) -> str:
    """Enclose a fragment in a synthetic main function for parsing."""
    return DUMMY_MAIN_OPEN + "\n" + fragment.content() + "\n" + DUMMY_MAIN_CLOSE


def _run_git(args: list[str], cwd: str) -> bytes:
    proc = subprocess.run(
        ["git", *args], cwd=cwd, capture_output=True, check=False
    )
    if proc.returncode != 0:
        raise GitCommandError(
            f"git {' '.join(args)} failed ({proc.returncode}): "
            f"{proc.stderr.decode('utf-8', 'replace').strip()}"
        )
    return proc.stdout


def scan_repository(
    path: str | os.PathLike,
    extensions: set[str],
    exclude_authors: set[str] | None = None,
) -> list[Fragment]:
    """Blame every matching tracked file and segment it into fragments.

    ``extensions`` holds suffixes like ``.cpp``. Files that fail UTF-8
    decoding are skipped with a warning. Fragments whose author is in
    ``exclude_authors`` (e.g. bot or group accounts) are dropped.
    """
    root = Path(path)
    if not root.is_dir() or not (root / ".git").exists():
        raise NotARepositoryError(f"{root} is not a git work tree")
    repo = root.resolve().name
    listing = _run_git(["ls-files"], str(root)).decode("utf-8", "replace")
    fragments: list[Fragment] = []
    for rel in listing.splitlines():
        if not any(rel.endswith(ext) for ext in extensions):
            continue
        raw = _run_git(["blame", "--line-porcelain", "--", rel], str(root))
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            logger.warning("skipping %s/%s: not valid UTF-8", repo, rel)
            continue
        blamed = parse_line_porcelain(text)
        for frag in segment_runs(blamed, repo, rel):
            if exclude_authors and frag.author_key in exclude_authors:
                continue
            fragments.append(frag)
    return fragments


def fragment_to_record(fragment: Fragment) -> dict:
    repo, path, start = fragment.origin
    return {
        "fragment_id": fragment.fragment_id,
        "author_key": fragment.author_key,
        "repo": repo,
        "path": path,
        "start_line": start,
        "loc": fragment.loc,
        "lines": list(fragment.lines),
    }


def fragment_from_record(record: dict) -> Fragment:
    return Fragment(
        fragment_id=record["fragment_id"],
        author_key=record["author_key"],
        lines=tuple(record["lines"]),
        origin=(record["repo"], record["path"], record["start_line"]),
        loc=record["loc"],
    )


def write_corpus_file(fragments, path: str | os.PathLike) -> None:
    """Write fragments as line-delimited JSON records."""
    with open(path, "w", encoding="utf-8") as fh:
        for frag in fragments:
            fh.write(json.dumps(fragment_to_record(frag)) + "\n")


def read_corpus_file(path: str | os.PathLike) -> list[Fragment]:
    fragments = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                fragments.append(fragment_from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise BlameParseError(
                    f"{path}:{lineno}: malformed corpus record ({exc})"
                ) from exc
    return fragments


def relabel(fragment: Fragment, author_key: str) -> Fragment:
    return replace(fragment, author_key=author_key)
