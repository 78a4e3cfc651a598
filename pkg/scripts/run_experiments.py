#!/usr/bin/env python3
"""Run the full experiment battery on a corpus file.

Covers the attribution sweep (accuracy vs aggregation group size),
open-world rounds with calibration and threshold data, the dataset-size
sweep, the label-corruption sweep, and the sparsity / pseudo-F analysis.
All outputs land under --out as flat CSVs plus per-experiment manifests.

Usage: python scripts/run_experiments.py --corpus corpus.jsonl --out runs/
"""

import argparse

from stylofrag import experiments
from stylofrag import features as feat_mod
from stylofrag.blame import read_corpus_file
from stylofrag.corpus import Corpus
from stylofrag.forest import ForestConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--corpus", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trees", type=int, default=100)
    ap.add_argument("--max-depth", type=int, default=25)
    ap.add_argument("--features-per-split", type=int, default=50)
    ap.add_argument("--folds", type=int, default=10)
    args = ap.parse_args()

    c = Corpus(tuple(read_corpus_file(args.corpus)))
    cfg = ForestConfig(
        n_trees=args.trees,
        max_depth=args.max_depth,
        features_per_split=args.features_per_split,
        seed=args.seed,
    )
    n = len(c.fragments)
    # extract once, share across every experiment
    cache = {f.fragment_id: feat_mod.extract_features(f) for f in c.fragments}

    report = experiments.run_attribution_sweep(
        c, cfg, [1, 5, 15], args.folds, args.seed, args.out,
        feature_cache=cache,
    )
    for row in report.rows:
        print(f"sweep: group_size={row['group_size']} accuracy={row['accuracy']:.4f}")

    _, report = experiments.run_open_world_rounds(
        c, max(1, len(c.authors) // 3), cfg, 5, args.seed, args.out,
        group_sizes=[1, 5], feature_cache=cache,
    )
    for row in report.rows:
        print(
            f"openworld: round={row['round']} size={row['group_size']} "
            f"in_world_accuracy={row['in_world_accuracy']:.4f}"
        )

    report = experiments.run_size_sweep(
        c, [(1, 10), (1, 50), (1, 100)], cfg, 5, args.seed, args.out,
        feature_cache=cache,
    )
    for row in report.rows:
        print(f"size: {row['setting']} accuracy={row['accuracy']} ({row['status']})")

    report = experiments.run_corruption_sweep(
        c, [0, n // 40, n // 20], cfg, 5, args.seed, args.out,
        feature_cache=cache,
    )
    for row in report.rows:
        print(
            f"corrupt: m={row['m']} fraction={row['corrupted_fraction']:.4f} "
            f"accuracy={row['accuracy']:.4f}"
        )

    frags = sorted(c.fragments, key=lambda f: f.fragment_id)
    dictionary = feat_mod.build_dictionary(
        [cache[f.fragment_id] for f in frags], [f.author_key for f in frags]
    )
    by_class: dict[str, list] = {}
    for f in frags:
        by_class.setdefault(f.author_key, []).append(
            feat_mod.vectorize(cache[f.fragment_id], dictionary)
        )
    table = experiments.pseudo_f_table(by_class, [1, 5])
    experiments.write_pseudo_f_csv(table, f"{args.out}/pseudo_f.csv")
    for row in table["rows"]:
        q = row["quantiles"]
        print(
            f"pseudo-F: merge={row['merge_size']} "
            f"q50={q[50]:.2f} q100={q[100]:.2f}"
        )


if __name__ == "__main__":
    main()
