"""Phantom files: sdist entries whose content never appears in the repository."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable

from repolink.errors import EmptyInventory
from repolink.sdist import SdistInventory

SPEC_FILES = ("setup.py", "pyproject.toml")


@dataclass
class PhantomReport:
    total_files: int
    phantom_files: int
    phantom_python_files: int
    pkg_spec_phantom: bool
    phantom_paths: list[str] = field(default_factory=list)
    matched_ratio: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)


def phantom_report(inventory: SdistInventory, repo_files) -> PhantomReport:
    """Compare an inventory against a repository's blob set.

    ``repo_files`` may be a :class:`~repolink.walker.RepoFileSet` or any
    container of hex digests.
    """
    hashes = getattr(repo_files, "hashes", repo_files)
    total = len(inventory.entries)
    if total == 0:
        raise EmptyInventory(f"{inventory.package} {inventory.version} has no files")
    phantom = [e for e in inventory.entries if e.blob_sha1 not in hashes]
    spec_phantom = any(e.path in SPEC_FILES for e in phantom)
    return PhantomReport(
        total_files=total,
        phantom_files=len(phantom),
        phantom_python_files=sum(e.is_python for e in phantom),
        pkg_spec_phantom=spec_phantom,
        phantom_paths=sorted(e.path for e in phantom),
        matched_ratio=1.0 - len(phantom) / total,
    )


@dataclass
class FileRates:
    inclusion_rate: float
    phantom_rate: float


def inclusion_and_phantom_rates(links: Iterable[tuple[SdistInventory, PhantomReport, int]]):
    """Per-basename inclusion and phantom rates, split by link label.

    ``links`` yields ``(inventory, report, label)`` triples. Returns
    ``{label: {basename: FileRates}}``; a basename absent from every sdist of
    a label does not appear under that label.
    """
    link_totals: dict[int, int] = defaultdict(int)
    included: dict[int, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    phantom: dict[int, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    for inventory, report, label in links:
        link_totals[label] += 1
        names = {e.basename for e in inventory.entries}
        phantom_names = {p.rsplit("/", 1)[-1] for p in report.phantom_paths}
        for name in names:
            included[label][name] += 1
        for name in phantom_names:
            phantom[label][name] += 1

    table: dict[int, dict[str, FileRates]] = {}
    for label, total in link_totals.items():
        table[label] = {
            name: FileRates(count / total, phantom[label][name] / count)
            for name, count in included[label].items()
        }
    return table


def rates_csv(table) -> str:
    """``filename,inclusion_correct,phantom_correct,inclusion_incorrect,phantom_incorrect``."""
    correct, incorrect = table.get(0, {}), table.get(1, {})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["filename", "inclusion_correct", "phantom_correct", "inclusion_incorrect", "phantom_incorrect"]
    )

    def cells(rates):
        if rates is None:
            return ["0", ""]
        return [f"{rates.inclusion_rate:.6g}", f"{rates.phantom_rate:.6g}"]

    for name in sorted(set(correct) | set(incorrect)):
        writer.writerow([name, *cells(correct.get(name)), *cells(incorrect.get(name))])
    return buf.getvalue()
