"""``radar`` command line entry point.

Every subcommand prints one JSON document on stdout (``inventory`` and
``sweep`` print their line-oriented formats instead). Exit status: 0 on
success, 1 when a stage fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from repolink.errors import RepoLinkError
from repolink.git import GitRepository, RepoCache
from repolink.index import CorpusManifest, ProvenanceIndex, build_index
from repolink.metadata import (
    HttpPageFetcher,
    HttpResolver,
    MappingPageFetcher,
    MappingResolver,
    OfflinePageFetcher,
    OfflineResolver,
    retrieve_from_metadata,
)
from repolink.phantom import phantom_report
from repolink.pipeline import PipelineConfig, run_pipeline
from repolink.registry import (
    FixtureSource,
    HttpSource,
    MappingMaintainerProvider,
    Registry,
)
from repolink.retriever import (
    RetrieverParams,
    get_most_probable,
    load_labeled_corpus,
    sweep,
    sweep_csv,
)
from repolink.sdist import open_sdist
from repolink.validator.estimator import KINDS, LinkValidator, evaluate_holdout
from repolink.validator.features import read_dataset
from repolink.walker import traverse

logger = logging.getLogger("repolink")


def _unit_interval(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is outside [0, 1]")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} must be >= 1")
    return value


def _add_source_options(p):
    p.add_argument("--fixtures", metavar="DIR", help="read registry documents from a fixture tree")
    p.add_argument("--registry-url", default="https://pypi.org/pypi")
    p.add_argument("--offline", action="store_true", help="forbid all network access")
    p.add_argument("--cache", metavar="DIR", help="registry download cache")
    p.add_argument("--repos", metavar="DIR", help="local repository cache (<host>/<owner>/<name>)")
    p.add_argument("--redirects", metavar="JSON", help="fixture redirect map {url: new_url|'gone'}")
    p.add_argument("--pages", metavar="JSON", help="fixture page map {url: page text}")
    p.add_argument("--maintainers", metavar="JSON", help="maintainer counts {package: [n, pkgs]}")


def _add_retriever_options(p):
    p.add_argument("--blob-uniqueness", type=_positive_int, default=500)
    p.add_argument("--topn", type=_positive_int, default=5)
    p.add_argument("--name-similarity", type=_unit_interval, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radar", description=__doc__.splitlines()[0])
    parser.add_argument("--config", metavar="JSON", help="defaults for any flag, keyed by dest name")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metadata", help="retrieve the repository URL from metadata")
    p.add_argument("package")
    p.add_argument("version", nargs="?")
    _add_source_options(p)

    p = sub.add_parser("inventory", help="list sdist members as '<blob> <size> <path>'")
    p.add_argument("sdist")

    p = sub.add_parser("phantom", help="phantom files of an sdist against a local repository")
    p.add_argument("sdist")
    p.add_argument("repo")
    p.add_argument("--repos", metavar="DIR", help="where submodule clones live")
    p.add_argument("--no-submodules", action="store_true", help="ignore gitlinks")

    p = sub.add_parser("validate", help="score the metadata link of a release")
    p.add_argument("package")
    p.add_argument("version", nargs="?")
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=_unit_interval, default=0.5)
    _add_source_options(p)

    p = sub.add_parser("retrieve", help="retrieve the repository from sdist content")
    p.add_argument("package")
    p.add_argument("version", nargs="?")
    p.add_argument("--index", required=True, metavar="DIR")
    _add_source_options(p)
    _add_retriever_options(p)

    p = sub.add_parser("index", help="provenance index maintenance")
    index_sub = p.add_subparsers(dest="index_command", required=True)
    b = index_sub.add_parser("build", help="build an index from a corpus manifest")
    b.add_argument("manifest")
    b.add_argument("out")

    p = sub.add_parser("train", help="train and evaluate a validator model")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=KINDS, default="random_forest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-grid", action="store_true")

    p = sub.add_parser("sweep", help="coverage/accuracy over name-similarity thresholds")
    p.add_argument("corpus", help="labels CSV (sdist,package,repo_id) or a directory holding labels.csv")
    p.add_argument("--index", required=True, metavar="DIR")
    p.add_argument("--blob-uniqueness", type=_positive_int, default=500)
    p.add_argument("--topn", type=_positive_int, default=5)

    p = sub.add_parser("pipeline", help="metadata -> validation -> content fallback")
    p.add_argument("package")
    p.add_argument("version", nargs="?")
    p.add_argument("--model")
    p.add_argument("--index", metavar="DIR")
    p.add_argument("--threshold", type=_unit_interval, default=0.5)
    _add_source_options(p)
    _add_retriever_options(p)
    return parser


def _load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _registry(args) -> Registry:
    if args.fixtures:
        source = FixtureSource(args.fixtures)
    else:
        source = HttpSource(args.registry_url, offline=args.offline)
    return Registry(source, args.cache)


def _resolver(args):
    if args.redirects:
        data = _load_json(args.redirects)
        return MappingResolver(data.get("moves", data), data.get("gone", ()))
    if args.offline or args.fixtures:
        return OfflineResolver()
    return HttpResolver()


def _page_fetcher(args):
    if args.pages:
        return MappingPageFetcher(_load_json(args.pages))
    if args.offline or args.fixtures:
        return OfflinePageFetcher()
    return HttpPageFetcher()


def _repo_cache(args) -> RepoCache:
    return RepoCache(args.repos, offline=args.offline or bool(args.fixtures))


def _emit(record):
    json.dump(record, sys.stdout, indent=2, sort_keys=True, default=str)
    sys.stdout.write("\n")


def cmd_metadata(args):
    registry = _registry(args)
    doc = registry.fetch_metadata(args.package, args.version)
    outcome = retrieve_from_metadata(doc, _resolver(args), _page_fetcher(args))
    _emit({"package": doc.name, "version": doc.version, "outcome": outcome.to_dict()})
    return 0


def cmd_inventory(args):
    sys.stdout.write(open_sdist(args.sdist).dump())
    return 0


def cmd_phantom(args):
    inventory = open_sdist(args.sdist)
    files = traverse(GitRepository(args.repo), fetcher=RepoCache(args.repos),
                     follow_submodules=not args.no_submodules)
    report = phantom_report(inventory, files)
    _emit({
        "sdist": str(args.sdist),
        "repo": str(args.repo),
        "repo_files": len(files.hashes),
        "commits": files.commit_count,
        "submodules": files.submodule_repos,
        "warnings": files.warnings,
        "report": report.to_dict(),
    })
    return 0


def _pipeline_config(args, model=None, index=None) -> PipelineConfig:
    params = RetrieverParams(
        getattr(args, "blob_uniqueness", 500),
        getattr(args, "topn", 5),
        getattr(args, "name_similarity", 0.5),
    )
    maintainers = MappingMaintainerProvider.from_json(args.maintainers) if args.maintainers else None
    return PipelineConfig(
        registry=_registry(args),
        resolver=_resolver(args),
        page_fetcher=_page_fetcher(args),
        repos=_repo_cache(args),
        maintainers=maintainers,
        model=model,
        index=index,
        params=params,
        threshold=getattr(args, "threshold", 0.5),
        offline=args.offline or bool(args.fixtures),
    )


def _has_stage_error(report) -> bool:
    return any(e["status"] == "error" for e in report.errors)


def cmd_validate(args):
    config = _pipeline_config(args, model=LinkValidator.load(args.model))
    report = run_pipeline(args.package, args.version, config)
    _emit({
        "package": report.package,
        "version": report.version,
        "metadata_outcome": report.metadata_outcome,
        "validation": report.validation,
        "errors": report.errors,
    })
    return 1 if _has_stage_error(report) else 0


def cmd_retrieve(args):
    registry = _registry(args)
    doc = registry.fetch_metadata(args.package, args.version)
    inventory = open_sdist(registry.download_sdist(doc), doc.name, doc.version)
    index = ProvenanceIndex.load(args.index)
    params = RetrieverParams(args.blob_uniqueness, args.topn, args.name_similarity)
    result = get_most_probable(inventory, index, params, doc.name)
    _emit({"package": doc.name, "version": doc.version, "params": params.to_dict(),
           **result.to_dict()})
    return 0


def cmd_index(args):
    stats = build_index(CorpusManifest.load(args.manifest), args.out)
    _emit(stats.to_dict())
    return 0


def cmd_train(args):
    links = read_dataset(args.dataset)
    result = evaluate_holdout(links, kind=args.kind, seed=args.seed, grid=not args.no_grid)
    result.model.save(args.out)
    _emit({
        "model": str(args.out),
        "kind": args.kind,
        "seed": args.seed,
        "params": result.model.get_params(),
        "train_size": int(len(result.train_index)),
        "test_size": int(len(result.test_index)),
        "test_auc": result.auc,
        "permutation_importance": result.importances,
    })
    return 0


def cmd_sweep(args):
    cases = load_labeled_corpus(args.corpus)
    index = ProvenanceIndex.load(args.index)
    rows = sweep(cases, index, blob_uniqueness=args.blob_uniqueness, topn=args.topn)
    sys.stdout.write(sweep_csv(rows))
    return 0


def cmd_pipeline(args):
    model = LinkValidator.load(args.model) if args.model else None
    index = ProvenanceIndex.load(args.index) if args.index else None
    report = run_pipeline(args.package, args.version, _pipeline_config(args, model, index))
    sys.stdout.write(report.to_json() + "\n")
    return 1 if _has_stage_error(report) else 0


COMMANDS = {
    "metadata": cmd_metadata,
    "inventory": cmd_inventory,
    "phantom": cmd_phantom,
    "validate": cmd_validate,
    "retrieve": cmd_retrieve,
    "index": cmd_index,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "pipeline": cmd_pipeline,
}


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    defaults = _load_json(known.config)
    for action in parser._subparsers._group_actions:
        for subparser in action.choices.values():
            subparser.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except RepoLinkError as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)})
        return 1
    except (OSError, ValueError) as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)})
        return 1


if __name__ == "__main__":
    sys.exit(main())
