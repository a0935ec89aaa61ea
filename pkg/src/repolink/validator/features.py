"""The six link features and their CSV representation."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from repolink.phantom import phantom_report
from repolink.registry import MaintainerInfo

FEATURE_NAMES = (
    "phantom_pyfiles",
    "pkg_spec_change",
    "tag_alignment",
    "name_similarity",
    "maintainers",
    "maintainer_pkgs",
)


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


def normalized_levenshtein(a: str, b: str) -> float:
    """``1 - distance / max(len)``; two empty strings are identical."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def normalize_for_similarity(name: str) -> str:
    return re.sub(r"[-_.]", "", name.lower())


def name_similarity(package: str, repo_name: str) -> float:
    return normalized_levenshtein(normalize_for_similarity(package), normalize_for_similarity(repo_name))


def tag_alignment(version: str, tags: Iterable[str]) -> int:
    """1 when some tag ends with the version string (byte-wise)."""
    if not version:
        return 0
    return int(any(tag.endswith(version) for tag in tags))


@dataclass(frozen=True)
class FeatureVector:
    phantom_pyfiles: int
    pkg_spec_change: int
    tag_alignment: int
    name_similarity: float
    maintainers: Optional[float] = None
    maintainer_pkgs: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.name_similarity <= 1.0:
            raise ValueError("name_similarity must lie in [0, 1]")

    def as_array(self) -> np.ndarray:
        """Feature row in ``FEATURE_NAMES`` order; unknown counts become NaN."""
        return np.array(
            [math.nan if getattr(self, n) is None else float(getattr(self, n)) for n in FEATURE_NAMES]
        )

    def to_dict(self) -> dict:
        return {n: getattr(self, n) for n in FEATURE_NAMES}


@dataclass(frozen=True)
class LabeledLink:
    features: FeatureVector
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("label must be 0 (correct) or 1 (incorrect)")


def extract_features(inventory, repo_files, tags, package: str, repo_name: str,
                     maintainers: Optional[MaintainerInfo] = None) -> FeatureVector:
    report = phantom_report(inventory, repo_files)
    maintainers = maintainers or MaintainerInfo()
    return FeatureVector(
        phantom_pyfiles=report.phantom_python_files,
        pkg_spec_change=int(report.pkg_spec_phantom),
        tag_alignment=tag_alignment(inventory.version, tags),
        name_similarity=name_similarity(package, repo_name),
        maintainers=maintainers.maintainer_count,
        maintainer_pkgs=maintainers.maintained_package_count,
    )


def to_matrix(links: Iterable) -> tuple[np.ndarray, np.ndarray]:
    """Stack :class:`LabeledLink` (or bare feature vectors) into ``X, y``."""
    rows, labels = [], []
    for link in links:
        if isinstance(link, LabeledLink):
            rows.append(link.features.as_array())
            labels.append(link.label)
        else:
            rows.append(link.as_array())
    X = np.vstack(rows) if rows else np.empty((0, len(FEATURE_NAMES)))
    return X, np.asarray(labels, dtype=int)


def _cell(value: str) -> Optional[float]:
    value = value.strip()
    if value == "" or value.lower() in ("nan", "na", "unknown"):
        return None
    return float(value)


def read_dataset(path) -> list[LabeledLink]:
    """Load ``phantom_pyfiles,...,maintainer_pkgs,label`` rows."""
    links = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(FEATURE_NAMES + ("label",)) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"dataset is missing columns: {sorted(missing)}")
        for row in reader:
            features = FeatureVector(
                phantom_pyfiles=int(float(row["phantom_pyfiles"])),
                pkg_spec_change=int(float(row["pkg_spec_change"])),
                tag_alignment=int(float(row["tag_alignment"])),
                name_similarity=float(row["name_similarity"]),
                maintainers=_cell(row["maintainers"]),
                maintainer_pkgs=_cell(row["maintainer_pkgs"]),
            )
            links.append(LabeledLink(features, int(row["label"])))
    return links


def write_dataset(links: Iterable[LabeledLink], path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FEATURE_NAMES + ("label",))
        for link in links:
            values = ["" if getattr(link.features, n) is None else repr(getattr(link.features, n))
                      for n in FEATURE_NAMES]
            writer.writerow(values + [link.label])
