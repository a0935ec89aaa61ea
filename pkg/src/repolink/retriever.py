"""Repository retrieval from sdist content through the provenance index."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from repolink.errors import EmptyCandidates, NoPythonFiles
from repolink.index import ProvenanceIndex
from repolink.sdist import SdistInventory, open_sdist
from repolink.validator.features import name_similarity

DEFAULT_THRESHOLDS = tuple(round(0.1 * i, 1) for i in range(11))


@dataclass(frozen=True)
class RetrieverParams:
    blob_uniqueness: int = 500
    topn: int = 5
    name_similarity: float = 0.5

    def __post_init__(self):
        if self.blob_uniqueness < 1:
            raise ValueError("blob_uniqueness must be >= 1")
        if self.topn < 1:
            raise ValueError("topn must be >= 1")
        if not 0.0 <= self.name_similarity <= 1.0:
            raise ValueError("name_similarity must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "blob_uniqueness": self.blob_uniqueness,
            "topn": self.topn,
            "name_similarity": self.name_similarity,
        }


@dataclass
class CandidateList:
    ranked: list[tuple[str, int]] = field(default_factory=list)

    def top(self, n: int) -> list[tuple[str, int]]:
        return self.ranked[:n]


@dataclass
class Retrieval:
    """Outcome of one lookup; ``repo_id`` is ``None`` when nothing qualifies."""

    repo_id: Optional[str]
    reason: str = "ok"
    best: Optional[str] = None
    similarity: Optional[float] = None
    candidates: list[tuple[str, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "repo_id": self.repo_id,
            "reason": self.reason,
            "best": self.best,
            "similarity": self.similarity,
            "candidates": [list(c) for c in self.candidates],
        }


def get_candidates(inventory: SdistInventory, index: ProvenanceIndex,
                   blob_uniqueness: int = 500) -> CandidateList:
    """Rank repositories by how many of the sdist's Python files they hold.

    Each distinct Python blob is looked up once: blob -> first commit ->
    repositories holding that commit. Blobs spread over more than
    ``blob_uniqueness`` repositories are ignored.
    """
    digests = sorted({e.blob_sha1 for e in inventory.python_entries})
    if not digests:
        raise NoPythonFiles(f"{inventory.package} has no Python files")
    credit: Counter = Counter()
    for digest in digests:
        repos = index.commit_to_repos(index.blob_to_first_commit(digest))
        if repos and len(repos) <= blob_uniqueness:
            credit.update(repos)
    if not credit:
        raise EmptyCandidates(f"no {inventory.package} Python file is known to the index")
    ranked = sorted(credit.items(), key=lambda item: (-item[1], item[0]))
    return CandidateList(ranked)


def repo_name(repo_id: str) -> str:
    return repo_id.rstrip("/").rsplit("/", 1)[-1]


def select_most_probable(candidates: CandidateList, index: ProvenanceIndex, topn: int):
    """Most common fork root among the top candidates.

    Ties go to the larger summed match count, then the smaller id.
    """
    votes: Counter = Counter()
    weight: Counter = Counter()
    for repo_id, count in candidates.top(topn):
        root = index.defork(repo_id)
        votes[root] += 1
        weight[root] += count
    return min(votes, key=lambda r: (-votes[r], -weight[r], r))


def get_most_probable(inventory: SdistInventory, index: ProvenanceIndex,
                      params: RetrieverParams = RetrieverParams(),
                      package: Optional[str] = None) -> Retrieval:
    package = package or inventory.package
    try:
        candidates = get_candidates(inventory, index, params.blob_uniqueness)
    except NoPythonFiles:
        return Retrieval(None, "no_python_files")
    except EmptyCandidates:
        return Retrieval(None, "empty_candidates")
    best = select_most_probable(candidates, index, params.topn)
    similarity = name_similarity(package, repo_name(best))
    if similarity < params.name_similarity:
        return Retrieval(None, "name_similarity_gate", best, similarity, candidates.ranked)
    return Retrieval(best, "ok", best, similarity, candidates.ranked)


@dataclass
class SweepCase:
    inventory: SdistInventory
    package: str
    expected: str


@dataclass
class SweepRow:
    threshold: float
    coverage: float
    accuracy: float
    retrieved: int
    correct: int


def sweep(cases: Iterable[SweepCase], index: ProvenanceIndex,
          thresholds: Iterable[float] = DEFAULT_THRESHOLDS,
          blob_uniqueness: int = 500, topn: int = 5) -> list[SweepRow]:
    """Coverage and accuracy as the name-similarity gate varies.

    A retrieval is correct when it names the expected repository or that
    repository's fork root. Accuracy is NaN when nothing was retrieved.
    """
    cases = list(cases)
    # candidate ranking does not depend on the gate; compute it once
    ungated = []
    for case in cases:
        result = get_most_probable(
            case.inventory, index, RetrieverParams(blob_uniqueness, topn, 0.0), case.package
        )
        ungated.append(result)

    rows = []
    for threshold in thresholds:
        retrieved = correct = 0
        for case, result in zip(cases, ungated):
            if result.repo_id is None or result.similarity < threshold:
                continue
            retrieved += 1
            if result.repo_id in (case.expected, index.defork(case.expected)):
                correct += 1
        total = len(cases)
        rows.append(SweepRow(
            threshold=float(threshold),
            coverage=retrieved / total if total else math.nan,
            accuracy=correct / retrieved if retrieved else math.nan,
            retrieved=retrieved,
            correct=correct,
        ))
    return rows


def sweep_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["threshold", "coverage", "accuracy"])
    for row in rows:
        accuracy = "" if math.isnan(row.accuracy) else f"{row.accuracy:.6f}"
        writer.writerow([f"{row.threshold:.1f}", f"{row.coverage:.6f}", accuracy])
    return buf.getvalue()


def load_labeled_corpus(path) -> list[SweepCase]:
    """Read ``sdist,package,repo_id`` rows; sdist paths are relative to the CSV."""
    path = Path(path)
    if path.is_dir():
        path = path / "labels.csv"
    cases = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            archive = Path(row["sdist"])
            if not archive.is_absolute():
                archive = path.parent / archive
            inventory = open_sdist(archive, row["package"])
            cases.append(SweepCase(inventory, row["package"], row["repo_id"]))
    return cases
