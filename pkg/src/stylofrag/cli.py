"""Command-line interface. Glue only: all logic lives in the library modules.

Machine-readable output goes to stdout or files; human logs go to stderr.
Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import sys

import click

from . import blame, calibration, corpus as corpus_mod, ensemble, experiments
from . import features as feat_mod
from .corpus import Corpus, CorpusError
from .ensemble import EnsembleError
from .features import FeatureError
from .forest import ForestConfig, ForestError

EXIT_DATA_ERROR = 3
EXIT_INTERNAL_ERROR = 4

_DATA_ERRORS = (
    blame.BlameError, CorpusError, FeatureError, ForestError, EnsembleError,
    calibration.CalibrationError, experiments.ExperimentError,
    FileNotFoundError,
)


def _log(message: str) -> None:
    click.echo(message, err=True)


def _load_corpus(path: str) -> Corpus:
    return Corpus(tuple(blame.read_corpus_file(path)))


def forest_options(fn):
    fn = click.option("--trees", default=500, show_default=True,
                      help="Number of trees in the forest.")(fn)
    fn = click.option("--max-depth", default=None, type=int,
                      help="Maximum tree depth (default: unlimited).")(fn)
    fn = click.option("--features-per-split", default=50, show_default=True,
                      help="Random feature candidates per split.")(fn)
    fn = click.option("--seed", default=0, show_default=True,
                      help="Random seed.")(fn)
    return fn


def _forest_config(trees, max_depth, features_per_split, seed) -> ForestConfig:
    return ForestConfig(
        n_trees=trees, max_depth=max_depth,
        features_per_split=features_per_split, seed=seed,
    )


@click.group()
def cli():
    """Authorship attribution of small git-blame source fragments."""


@cli.command()
@click.argument("repos", nargs=-1, type=click.Path(exists=True))
@click.option("--extensions", default=".cpp,.cc,.cxx,.h,.hpp",
              show_default=True, help="Comma-separated file suffixes.")
@click.option("--exclude-author", "exclude_authors", multiple=True,
              help="Author keys to drop (group/bot accounts); repeatable.")
@click.option("--out", required=True, type=click.Path(), help="Corpus file to write.")
def ingest(repos, extensions, exclude_authors, out):
    """Blame repositories into a fragment corpus file."""
    if not repos:
        raise click.UsageError("at least one repository path is required")
    suffixes = {s.strip() for s in extensions.split(",") if s.strip()}
    fragments = []
    for repo in dict.fromkeys(repos):  # duplicates deduplicated, order kept
        fragments.extend(blame.scan_repository(
            repo, suffixes, set(exclude_authors) or None
        ))
    blame.write_corpus_file(fragments, out)
    authors = {f.author_key for f in fragments}
    _log(f"ingested {len(fragments)} fragments from {len(authors)} authors")


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None,
              help="Optional CSV path for the LOC histogram.")
def stats(corpus_path, out):
    """Corpus statistics: author/fragment counts and a LOC histogram."""
    c = _load_corpus(corpus_path)
    if not c.fragments:
        click.echo("empty corpus")
        return
    click.echo(f"fragments: {len(c.fragments)}")
    click.echo(f"authors: {len(c.authors)}")
    rows = corpus_mod.loc_histogram(c)
    click.echo("loc_bucket,count,percent")
    for bucket, count, percent in rows:
        click.echo(f"{bucket},{count},{percent:.2f}")
    if out:
        corpus_mod.write_loc_histogram_csv(rows, out)
        _log(f"wrote {out}")


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--dictionary", "dictionary_path", required=True, type=click.Path())
@click.option("--vectors", "vectors_path", required=True, type=click.Path())
def extract(corpus_path, dictionary_path, vectors_path):
    """Fit a feature dictionary on the corpus and write vectors."""
    c = _load_corpus(corpus_path)
    frags = sorted(c.fragments, key=lambda f: f.fragment_id)
    feats = {f.fragment_id: feat_mod.extract_features(f) for f in frags}
    dictionary = feat_mod.build_dictionary(
        [feats[f.fragment_id] for f in frags],
        [f.author_key for f in frags],
    )
    feat_mod.save_dictionary(dictionary, dictionary_path)
    vectors = {
        f.fragment_id: feat_mod.vectorize(feats[f.fragment_id], dictionary)
        for f in frags
    }
    feat_mod.save_vectors(vectors, vectors_path)
    dim, mean_nonzero = feat_mod.sparsity_report(list(vectors.values()))
    _log(f"dictionary dimension {dim}; mean nonzero per vector {mean_nonzero:.2f}")


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--dictionary", "dictionary_path", required=True,
              type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path())
@forest_options
def train(corpus_path, dictionary_path, model_path, trees, max_depth,
          features_per_split, seed):
    """Train a random forest on the full corpus with a fitted dictionary."""
    from .forest import save_model, train_forest

    c = _load_corpus(corpus_path)
    dictionary = feat_mod.load_dictionary(dictionary_path)
    frags = sorted(c.fragments, key=lambda f: f.fragment_id)
    vectors = [
        feat_mod.vectorize(feat_mod.extract_features(f), dictionary)
        for f in frags
    ]
    model = train_forest(
        vectors, [f.author_key for f in frags],
        _forest_config(trees, max_depth, features_per_split, seed),
    )
    save_model(model, model_path)
    _log(f"trained {trees} trees over {len(frags)} fragments; wrote {model_path}")


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--dictionary", "dictionary_path", required=True,
              type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--group-size", default=1, show_default=True)
@click.option("--mode", type=click.Choice(["ordered", "random"]), default="ordered",
              show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(),
              help="CSV of group attributions.")
def attribute(corpus_path, dictionary_path, model_path, group_size, mode,
              seed, out):
    """Attribute fragment groups with a trained model."""
    from .forest import load_model

    c = _load_corpus(corpus_path)
    dictionary = feat_mod.load_dictionary(dictionary_path)
    model = load_model(model_path)
    vectors = {
        f.fragment_id: feat_mod.vectorize(feat_mod.extract_features(f), dictionary)
        for f in c.fragments
    }
    spec = ensemble.GroupingSpec(group_size=group_size, mode=mode, seed=seed)
    rows = []
    for author, frags in sorted(c.by_author().items()):
        for group in ensemble.group_samples(frags, spec):
            predicted, confidence = ensemble.attribute_group(model, group, vectors)
            rows.append((group.group_id, group.truth, predicted,
                         f"{confidence:.9f}", group_size))
    ensemble.write_group_attributions_csv(rows, out)
    _log(f"attributed {len(rows)} groups; wrote {out}")


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--group-sizes", default="1,5,15", show_default=True,
              help="Comma-separated aggregation group sizes.")
@click.option("--folds", default=10, show_default=True)
@click.option("--out", required=True, type=click.Path())
@forest_options
def sweep(corpus_path, group_sizes, folds, out, trees, max_depth,
          features_per_split, seed):
    """Attribution sweep: accuracy vs aggregation group size."""
    c = _load_corpus(corpus_path)
    sizes = [int(s) for s in group_sizes.split(",") if s.strip()]
    report = experiments.run_attribution_sweep(
        c, _forest_config(trees, max_depth, features_per_split, seed),
        sizes, folds, seed, out,
    )
    for row in report.rows:
        click.echo(f"group_size={row['group_size']} accuracy={row['accuracy']:.4f}")
    _log(f"wrote {report.out_dir}")


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--n-unknown", default=4, show_default=True)
@click.option("--folds", default=5, show_default=True)
@click.option("--rounds", default=None, type=int,
              help="Number of rounds (default: authors // n_unknown).")
@click.option("--group-sizes", default="1", show_default=True,
              help="Comma-separated record granularities.")
@click.option("--out", required=True, type=click.Path())
@forest_options
def openworld(corpus_path, n_unknown, folds, rounds, group_sizes, out, trees,
              max_depth, features_per_split, seed):
    """Open-world rounds: calibration, threshold sweeps and ROC."""
    c = _load_corpus(corpus_path)
    sizes = [int(s) for s in group_sizes.split(",") if s.strip()]
    _, report = experiments.run_open_world_rounds(
        c, n_unknown, _forest_config(trees, max_depth, features_per_split, seed),
        folds, seed, out, rounds=rounds, group_sizes=sizes,
    )
    for row in report.rows:
        click.echo(
            f"round={row['round']} size={row['group_size']} "
            f"records={row['n_records']} "
            f"in_world_accuracy={row['in_world_accuracy']:.4f}"
        )
    _log(f"wrote {report.out_dir}")


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--m-values", default="0,10,50", show_default=True,
              help="Comma-separated corruption pair counts.")
@click.option("--folds", default=5, show_default=True)
@click.option("--out", required=True, type=click.Path())
@forest_options
def corrupt(corpus_path, m_values, folds, out, trees, max_depth,
            features_per_split, seed):
    """Ground-truth corruption sweep, scored against original labels."""
    c = _load_corpus(corpus_path)
    values = [int(s) for s in m_values.split(",") if s.strip()]
    report = experiments.run_corruption_sweep(
        c, values, _forest_config(trees, max_depth, features_per_split, seed),
        folds, seed, out,
    )
    for row in report.rows:
        click.echo(
            f"m={row['m']} corrupted_fraction={row['corrupted_fraction']:.4f} "
            f"accuracy={row['accuracy']:.4f}"
        )
    _log(f"wrote {report.out_dir}")


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--merge-sizes", default="1,5", show_default=True)
@click.option("--out", required=True, type=click.Path(),
              help="CSV for pseudo-F quantiles.")
@click.option("--seed", default=0, show_default=True)
def analyze(corpus_path, merge_sizes, out, seed):
    """Sparsity and pseudo-F separation analysis of the corpus features."""
    c = _load_corpus(corpus_path)
    frags = sorted(c.fragments, key=lambda f: f.fragment_id)
    feats = {f.fragment_id: feat_mod.extract_features(f) for f in frags}
    dictionary = feat_mod.build_dictionary(
        [feats[f.fragment_id] for f in frags],
        [f.author_key for f in frags],
    )
    by_class = {}
    for f in frags:
        vec = feat_mod.vectorize(feats[f.fragment_id], dictionary)
        by_class.setdefault(f.author_key, []).append(vec)
    sizes = [int(s) for s in merge_sizes.split(",") if s.strip()]
    all_vectors = [v for vs in by_class.values() for v in vs]
    dim, mean_nonzero = feat_mod.sparsity_report(all_vectors)
    click.echo(f"dimension={dim} mean_nonzero={mean_nonzero:.2f}")
    table = experiments.pseudo_f_table(by_class, sizes)
    experiments.write_pseudo_f_csv(table, out)
    for row in table["rows"]:
        q = row["quantiles"]
        click.echo(
            f"merge_size={row['merge_size']} "
            f"q0={q[0]:.2f} q25={q[25]:.2f} q50={q[50]:.2f} "
            f"q75={q[75]:.2f} q100={q[100]:.2f}"
        )
    _log(f"wrote {out}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        _log(f"usage error: {exc.format_message()}")
        return 2
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        return 2
    except _DATA_ERRORS as exc:
        _log(f"data error: {exc}")
        return EXIT_DATA_ERROR
    except Exception as exc:  # pragma: no cover - defensive
        _log(f"internal error: {exc}")
        return EXIT_INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
