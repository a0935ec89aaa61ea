"""End-to-end flow: metadata retrieval, validation, content-based fallback."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

from repolink.errors import NoSdist, OfflineSkipped, RepoLinkError
from repolink.git import RepoCache
from repolink.index import ProvenanceIndex
from repolink.metadata import PageFetcher, RedirectResolver, RetrievalOutcome, retrieve_from_metadata
from repolink.phantom import phantom_report
from repolink.registry import MaintainerProvider, Registry, get_maintainers
from repolink.retriever import RetrieverParams, get_most_probable
from repolink.sdist import open_sdist
from repolink.validator.estimator import LinkValidator
from repolink.validator.features import extract_features
from repolink.walker import traverse

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ROUTES = ("metadata_validated", "code_retrieved", "none")


@dataclass
class PipelineConfig:
    registry: Registry
    resolver: Optional[RedirectResolver] = None
    page_fetcher: Optional[PageFetcher] = None
    repos: RepoCache = field(default_factory=RepoCache)
    maintainers: Optional[MaintainerProvider] = None
    model: Optional[LinkValidator] = None
    index: Optional[ProvenanceIndex] = None
    params: RetrieverParams = field(default_factory=RetrieverParams)
    threshold: float = 0.5
    offline: bool = True


@dataclass
class RadarReport:
    package: str
    version: Optional[str]
    route: str = "none"
    final_repo: Optional[str] = None
    metadata_outcome: Optional[dict] = None
    validation: Optional[dict] = None
    code_retrieval: Optional[dict] = None
    rejected_candidate: Optional[str] = None
    unvalidated_candidate: Optional[str] = None
    errors: list[dict] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.route not in ROUTES:
            raise ValueError(f"unknown route {self.route!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RadarReport":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {data.get('schema_version')}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "RadarReport":
        return cls.from_dict(json.loads(text))


def decide_route(metadata_url: Optional[str], probability: Optional[float], threshold: float,
                 code_repo: Optional[str]) -> tuple[str, Optional[str]]:
    """Route and final repository from the stage outcomes.

    The metadata URL is kept only when the validator scored it below the
    threshold; otherwise the content-based answer (if any) is used.
    """
    if metadata_url is not None and probability is not None and probability < threshold:
        return "metadata_validated", metadata_url
    if code_repo is not None:
        return "code_retrieved", code_repo
    return "none", None


class _Stage:
    def __init__(self, report: RadarReport, name: str):
        self.report = report
        self.name = name

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.report.timings[self.name] = round(time.perf_counter() - self.start, 6)
        if exc is None:
            return False
        if isinstance(exc, OfflineSkipped):
            status = "offline_skipped"
        elif isinstance(exc, RepoLinkError):
            status = "error"
        else:
            logger.exception("stage %s crashed", self.name)
            status = "error"
        self.report.errors.append(
            {"stage": self.name, "status": status, "error": type(exc).__name__, "message": str(exc)}
        )
        return True


def run_pipeline(package: str, version: Optional[str], config: PipelineConfig) -> RadarReport:
    report = RadarReport(package=package, version=version)

    doc, outcome = None, RetrievalOutcome()
    with _Stage(report, "metadata"):
        doc = config.registry.fetch_metadata(package, version)
        report.version = doc.version
        outcome = retrieve_from_metadata(doc, config.resolver, config.page_fetcher)
        report.metadata_outcome = outcome.to_dict()
    if doc is None:
        return report
    metadata_url = outcome.url.canonical if outcome.url else None

    inventory = None
    with _Stage(report, "sdist"):
        try:
            path = config.registry.download_sdist(doc)
        except NoSdist:
            report.errors.append({"stage": "sdist", "status": "no_sdist", "error": "NoSdist",
                                  "message": "release has no source distribution"})
            path = None
        if path is not None:
            inventory = open_sdist(path, doc.name, doc.version)

    probability = None
    if metadata_url is not None:
        report.validation = {"status": "skipped", "probability": None, "verdict": None,
                             "threshold": config.threshold}
        with _Stage(report, "validation"):
            if inventory is None:
                report.validation["status"] = "no_sdist"
            elif config.model is None:
                report.validation["status"] = "no_model"
            else:
                repo = config.repos.open(metadata_url)
                if repo is None:
                    if config.offline:
                        raise OfflineSkipped(f"{metadata_url} is not in the local repository cache")
                    raise RepoLinkError(f"could not open {metadata_url}")
                files = traverse(repo, fetcher=config.repos)
                maintainers = get_maintainers(doc.name, config.maintainers)
                features = extract_features(
                    inventory, files, repo.tags(), doc.name, outcome.url.name, maintainers
                )
                probability = config.model.incorrect_probability(features)
                report.validation.update(
                    status="ok",
                    probability=probability,
                    verdict="correct" if probability < config.threshold else "incorrect",
                    features=features.to_dict(),
                    phantom=phantom_report(inventory, files).to_dict(),
                )
        if report.errors and report.errors[-1]["stage"] == "validation":
            report.validation["status"] = report.errors[-1]["status"]

    route, final = decide_route(metadata_url, probability, config.threshold, None)
    if route == "none":
        code_repo = None
        if inventory is None:
            report.code_retrieval = {"status": "no_sdist", "repo_id": None}
        elif config.index is None:
            report.code_retrieval = {"status": "no_index", "repo_id": None}
        else:
            with _Stage(report, "code_retrieval"):
                result = get_most_probable(inventory, config.index, config.params, doc.name)
                code_repo = result.repo_id
                report.code_retrieval = {"status": "ok", **result.to_dict(),
                                         "params": config.params.to_dict()}
        route, final = decide_route(metadata_url, probability, config.threshold, code_repo)

    report.route, report.final_repo = route, final
    if metadata_url is not None and route != "metadata_validated":
        if probability is not None:
            report.rejected_candidate = metadata_url
        else:
            report.unvalidated_candidate = metadata_url
    return report
