#!/usr/bin/env python3
"""Generate the bundled synthetic corpus and write it as a JSONL corpus file.

Usage: python scripts/make_synthetic_corpus.py --out corpus.jsonl
"""

import argparse

from stylofrag.blame import write_corpus_file
from stylofrag.synthetic import generate_corpus


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, help="corpus file to write")
    ap.add_argument("--authors", type=int, default=12)
    ap.add_argument("--samples-per-author", type=int, default=150)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--template-alpha", type=float, default=0.25)
    args = ap.parse_args()

    corpus = generate_corpus(
        n_authors=args.authors,
        samples_per_author=args.samples_per_author,
        seed=args.seed,
        template_alpha=args.template_alpha,
    )
    write_corpus_file(corpus.fragments, args.out)
    print(
        f"wrote {len(corpus.fragments)} fragments "
        f"({args.authors} authors) to {args.out}"
    )


if __name__ == "__main__":
    main()
