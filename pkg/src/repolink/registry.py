"""Package registry access: release metadata, sdist downloads, maintainers.

Two sources speak the same JSON API document shape:

* :class:`HttpSource` talks to a live registry (``https://pypi.org/pypi``).
* :class:`FixtureSource` reads documents from a directory laid out like the
  API itself: ``<root>/<package>/json`` for the latest release and
  ``<root>/<package>/<version>/json`` for a specific one. Archives referenced
  by ``urls[].url`` are looked up by filename under ``<root>/files/``.

Both are wrapped by :class:`Registry`, which normalizes documents into
:class:`MetadataDoc` and caches raw responses on disk.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

from repolink.errors import (
    ChecksumMismatch,
    MalformedDocument,
    NoSdist,
    NotFound,
    OfflineSkipped,
    TransportError,
)

logger = logging.getLogger(__name__)

_NAME_RE = re.compile(r"^[A-Za-z0-9._-]+$")
LATEST = "latest"


@dataclass
class MetadataDoc:
    name: str
    version: str
    home_page: Optional[str] = None
    download_url: Optional[str] = None
    project_urls: dict[str, str] = field(default_factory=dict)
    description: str = ""
    description_format: str = "plain"
    sdist_url: Optional[str] = None
    sdist_filename: Optional[str] = None
    sdist_digests: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.name or not self.version:
            raise MalformedDocument("metadata needs a non-empty name and version")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "version": self.version,
            "home_page": self.home_page,
            "download_url": self.download_url,
            "project_urls": dict(self.project_urls),
            "description": self.description,
            "description_format": self.description_format,
            "sdist_url": self.sdist_url,
            "sdist_filename": self.sdist_filename,
            "sdist_digests": dict(self.sdist_digests),
        }


@dataclass(frozen=True)
class MaintainerInfo:
    """Maintainer counts; ``None`` means unknown."""

    maintainer_count: Optional[int] = None
    maintained_package_count: Optional[int] = None

    def __post_init__(self):
        for value in (self.maintainer_count, self.maintained_package_count):
            if value is not None and value < 0:
                raise ValueError("maintainer counts must be non-negative")


def _content_format(content_type: Optional[str]) -> str:
    if not content_type:
        return "plain"
    content_type = content_type.lower()
    if "markdown" in content_type:
        return "markdown"
    if "rst" in content_type or "restructuredtext" in content_type:
        return "rst"
    return "plain"


def _blank_to_none(value):
    if value is None:
        return None
    value = str(value).strip()
    if not value or value.upper() == "UNKNOWN":
        return None
    return value


def normalize_document(raw: dict) -> MetadataDoc:
    """Turn a registry JSON API document into a :class:`MetadataDoc`."""
    if not isinstance(raw, dict) or not isinstance(raw.get("info"), dict):
        raise MalformedDocument("document has no 'info' object")
    info = raw["info"]
    name = info.get("name")
    version = info.get("version")
    if not name or not version:
        raise MalformedDocument("document lacks name or version")

    project_urls = {}
    for label, url in (info.get("project_urls") or {}).items():
        if url:
            project_urls[str(label)] = str(url)

    sdist_url = sdist_filename = None
    digests: dict[str, str] = {}
    for entry in raw.get("urls") or []:
        if entry.get("packagetype") == "sdist":
            sdist_url = entry.get("url")
            sdist_filename = entry.get("filename") or (
                sdist_url.rsplit("/", 1)[-1] if sdist_url else None
            )
            digests = {k: v for k, v in (entry.get("digests") or {}).items() if v}
            break

    return MetadataDoc(
        name=str(name),
        version=str(version),
        home_page=_blank_to_none(info.get("home_page")),
        download_url=_blank_to_none(info.get("download_url")),
        project_urls=project_urls,
        description=info.get("description") or "",
        description_format=_content_format(info.get("description_content_type")),
        sdist_url=sdist_url,
        sdist_filename=sdist_filename,
        sdist_digests=digests,
    )


class Source(Protocol):
    def get_document(self, package: str, version: Optional[str]) -> bytes: ...

    def get_file(self, url: str, filename: str) -> bytes: ...


class FixtureSource:
    def __init__(self, root):
        self.root = Path(root)

    def get_document(self, package, version):
        parts = [package] + ([version] if version else []) + ["json"]
        path = self.root.joinpath(*parts)
        if not path.is_file():
            raise NotFound(f"{package} {version or '(latest)'} not in fixtures")
        return path.read_bytes()

    def get_file(self, url, filename):
        path = self.root / "files" / filename
        if not path.is_file():
            raise NotFound(f"fixture archive {filename} missing")
        return path.read_bytes()


class HttpSource:
    def __init__(self, base_url="https://pypi.org/pypi", timeout=30.0, offline=False):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.offline = offline

    def _get(self, url):
        if self.offline:
            raise OfflineSkipped(f"offline mode forbids fetching {url}")
        import requests

        try:
            response = requests.get(url, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if response.status_code == 404:
            raise NotFound(url)
        if response.status_code >= 400:
            raise TransportError(f"{url}: HTTP {response.status_code}")
        return response.content

    def get_document(self, package, version):
        if version:
            return self._get(f"{self.base_url}/{package}/{version}/json")
        return self._get(f"{self.base_url}/{package}/json")

    def get_file(self, url, filename):
        return self._get(url)


def _atomic_write(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Registry:
    """Cached front-end over a :class:`Source`.

    Cache layout is ``<cache>/<package>/<version>/metadata`` for documents and
    ``<cache>/<package>/<version>/<filename>`` for archives. Requests without
    a version are cached under the ``latest`` directory.
    """

    def __init__(self, source: Source, cache_dir=None):
        self.source = source
        self.cache_dir = Path(cache_dir) if cache_dir else None

    def _cache_path(self, package, version, leaf):
        return self.cache_dir / package / (version or LATEST) / leaf

    def fetch_metadata(self, package: str, version: Optional[str] = None) -> MetadataDoc:
        if not _NAME_RE.match(package or ""):
            raise ValueError(f"invalid package name: {package!r}")
        raw = None
        cached = self._cache_path(package, version, "metadata") if self.cache_dir else None
        if cached is not None and cached.is_file():
            raw = cached.read_bytes()
        else:
            raw = self.source.get_document(package, version)
        try:
            document = json.loads(raw)
        except (ValueError, UnicodeDecodeError) as exc:
            raise MalformedDocument(f"{package}: not JSON ({exc})") from exc
        doc = normalize_document(document)
        if cached is not None and not cached.is_file():
            _atomic_write(cached, raw)
        return doc

    def download_sdist(self, doc: MetadataDoc, dest_dir=None) -> Path:
        if not doc.sdist_url or not doc.sdist_filename:
            raise NoSdist(f"{doc.name} {doc.version} publishes no source distribution")
        if self.cache_dir is not None:
            target = self._cache_path(doc.name, doc.version, doc.sdist_filename)
        elif dest_dir is not None:
            target = Path(dest_dir) / doc.sdist_filename
        else:
            target = Path(tempfile.mkdtemp(prefix="sdist-")) / doc.sdist_filename

        if target.is_file():
            data = target.read_bytes()
            _check_digests(doc, data)
            return target
        data = self.source.get_file(doc.sdist_url, doc.sdist_filename)
        _check_digests(doc, data)
        _atomic_write(target, data)
        return target


def _check_digests(doc: MetadataDoc, data: bytes):
    for algorithm in ("sha256", "md5"):
        expected = doc.sdist_digests.get(algorithm)
        if expected:
            actual = hashlib.new(algorithm, data).hexdigest()
            if actual != expected.lower():
                raise ChecksumMismatch(
                    f"{doc.sdist_filename}: {algorithm} {actual} != declared {expected}"
                )
            return


def fetch_metadata(package, version=None, source=None, cache_dir=None):
    return Registry(source, cache_dir).fetch_metadata(package, version)


def download_sdist(doc, source, cache_dir=None, dest_dir=None):
    return Registry(source, cache_dir).download_sdist(doc, dest_dir)


class MaintainerProvider(Protocol):
    def lookup(self, package: str) -> Optional[tuple[int, int]]: ...


class NullMaintainerProvider:
    """Default offline provider; knows nothing."""

    def lookup(self, package):
        return None


class MappingMaintainerProvider:
    def __init__(self, mapping):
        self.mapping = {k.lower(): tuple(v) for k, v in dict(mapping).items()}

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def lookup(self, package):
        return self.mapping.get(package.lower())


def get_maintainers(package: str, provider: Optional[MaintainerProvider] = None) -> MaintainerInfo:
    provider = provider or NullMaintainerProvider()
    try:
        answer = provider.lookup(package)
    except Exception:
        logger.warning("maintainer provider failed for %s", package, exc_info=True)
        answer = None
    if answer is None:
        return MaintainerInfo()
    count, packages = answer
    return MaintainerInfo(
        None if count is None else int(count),
        None if packages is None else int(packages),
    )
