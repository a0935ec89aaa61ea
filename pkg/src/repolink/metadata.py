"""Repository URL retrieval from release metadata.

Search order:

1. ``home_page``, ``download_url`` and every ``project_urls`` value in source
   order; the first repository URL found wins and is returned as-is (after
   redirect resolution).
2. Badges, then plain repository URLs in the description; only candidates
   whose repository name matches the package name are accepted.
3. Pages behind the homepage and any documentation link are fetched and
   scanned the same way, again gated by the name match.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Protocol

from repolink.errors import Gone, OfflineSkipped

logger = logging.getLogger(__name__)

PLATFORM_HOSTS = {
    "github": "github.com",
    "gitlab": "gitlab.com",
    "bitbucket": "bitbucket.org",
}
_HOST_TO_PLATFORM = {host: name for name, host in PLATFORM_HOSTS.items()}

# First path segments that are site pages rather than owners.
_RESERVED_OWNERS = {
    "about", "apps", "collections", "contact", "explore", "features", "login",
    "marketplace", "notifications", "orgs", "pricing", "settings", "site",
    "sponsors", "topics", "users",
}

# A host counts only at a URL start: after "://", after "@" (scp-style), or
# at a token boundary that is not itself part of a path or hostname.
_REPO_RE = re.compile(
    r"(?:(?<=://)|(?<=@)|(?<![\w./@:-]))"
    r"(?:www\.)?(?P<host>github\.com|gitlab\.com|bitbucket\.org)"
    r"[/:](?P<owner>[A-Za-z0-9_.-]+)/(?P<name>[A-Za-z0-9_.-]+)",
    re.IGNORECASE,
)

SOURCE_FIELDS = (
    "url", "download_url", "project_urls", "description", "badge",
    "homepage", "docpage", "none",
)


@dataclass(frozen=True)
class RepoUrl:
    platform: str
    owner: str
    name: str
    raw: str = ""

    def __post_init__(self):
        if not self.owner or not self.name:
            raise ValueError("owner and name must be non-empty")
        if self.platform not in PLATFORM_HOSTS:
            raise ValueError(f"unknown platform {self.platform!r}")

    @property
    def host(self) -> str:
        return PLATFORM_HOSTS[self.platform]

    @property
    def canonical(self) -> str:
        return f"https://{self.host}/{self.owner}/{self.name}"

    @property
    def slug(self) -> str:
        return f"{self.owner}/{self.name}"

    def to_dict(self) -> dict:
        return {
            "platform": self.platform,
            "owner": self.owner,
            "name": self.name,
            "raw": self.raw,
            "canonical": self.canonical,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RepoUrl":
        return cls(data["platform"], data["owner"], data["name"], data.get("raw", ""))

    @classmethod
    def parse(cls, text: str) -> "RepoUrl":
        urls = extract_repo_urls(text)
        if not urls:
            raise ValueError(f"not a repository URL: {text!r}")
        return urls[0]


@dataclass
class RetrievalOutcome:
    url: Optional[RepoUrl] = None
    source_field: str = "none"
    redirected: bool = False
    candidates: list[str] = field(default_factory=list)

    def __post_init__(self):
        if (self.url is None) != (self.source_field == "none"):
            raise ValueError("source_field must be 'none' exactly when url is absent")

    def to_dict(self) -> dict:
        return {
            "url": self.url.to_dict() if self.url else None,
            "source_field": self.source_field,
            "redirected": self.redirected,
            "candidates": list(self.candidates),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RetrievalOutcome":
        url = RepoUrl.from_dict(data["url"]) if data.get("url") else None
        return cls(url, data["source_field"], data["redirected"], list(data.get("candidates", [])))


def _clean_name(name: str) -> str:
    name = name.rstrip(".")
    if name.lower().endswith(".git"):
        name = name[:-4]
    return name.rstrip(".")


def extract_repo_urls(text: Optional[str]) -> list[RepoUrl]:
    """All repository coordinates in ``text``, in order, deduplicated."""
    if not text:
        return []
    found: list[RepoUrl] = []
    seen = set()
    for match in _REPO_RE.finditer(text):
        owner = match.group("owner")
        name = _clean_name(match.group("name"))
        if not name or owner.lower() in _RESERVED_OWNERS or owner.startswith("."):
            continue
        platform = _HOST_TO_PLATFORM[match.group("host").lower()]
        repo = RepoUrl(platform, owner, name, match.group(0))
        if repo.canonical not in seen:
            seen.add(repo.canonical)
            found.append(repo)
    return found


# img.shields.io/github/<metric>/<owner>/<name>; a few metrics span segments.
_SHIELDS_RE = re.compile(
    r"img\.shields\.io/github/"
    r"(?:v/release|v/tag|actions/workflow/status|workflow/status|commit-activity/[a-z]+"
    r"|checks-status|release-date|last-commit|[\w-]+)"
    r"/(?P<owner>[A-Za-z0-9_.-]+)/(?P<name>[A-Za-z0-9_.-]+)",
    re.IGNORECASE,
)
# CI / coverage badge services that embed a GitHub coordinate.
_SERVICE_RES = (
    re.compile(r"travis-ci\.(?:org|com)/(?P<owner>[A-Za-z0-9_.-]+)/(?P<name>[A-Za-z0-9_.-]+)", re.I),
    re.compile(r"codecov\.io/(?:gh|github)/(?P<owner>[A-Za-z0-9_.-]+)/(?P<name>[A-Za-z0-9_.-]+)", re.I),
    re.compile(
        r"coveralls\.io/(?:repos/)?github/(?P<owner>[A-Za-z0-9_.-]+)/(?P<name>[A-Za-z0-9_.-]+)", re.I
    ),
)
_MD_BADGE_LINK_RE = re.compile(r"\[!\[[^\]]*\]\([^)]*\)\]\((?P<target>[^)\s]+)")
_MD_IMAGE_RE = re.compile(r"!\[[^\]]*\]\((?P<src>[^)\s]+)")
_RST_IMAGE_RE = re.compile(
    r"\.\.\s+(?:\|[^|]+\|\s+)?image::\s*(?P<src>\S+)(?P<opts>(?:\n[ \t]+:[\w-]+:[^\n]*)*)"
)
_RST_TARGET_RE = re.compile(r":target:\s*(?P<target>\S+)")
_HTML_BADGE_LINK_RE = re.compile(
    r"<a\s[^>]*href=[\"'](?P<target>[^\"']+)[\"'][^>]*>\s*<img\s[^>]*src=[\"'](?P<src>[^\"']+)",
    re.IGNORECASE,
)


_IMAGE_SUFFIX_RE = re.compile(r"\.(?:svg|png)$", re.IGNORECASE)


def _badge_image_repos(src: str) -> list[RepoUrl]:
    src = src.split("?", 1)[0].split("#", 1)[0]
    src = _IMAGE_SUFFIX_RE.sub("", src)
    match = _SHIELDS_RE.search(src)
    if match:
        name = _clean_name(match.group("name"))
        if name:
            return [RepoUrl("github", match.group("owner"), name, match.group(0))]
    for pattern in _SERVICE_RES:
        match = pattern.search(src)
        if match:
            name = _clean_name(match.group("name"))
            if name:
                return [RepoUrl("github", match.group("owner"), name, match.group(0))]
    return []


def extract_badge_repo_urls(description: Optional[str], format: str = "markdown") -> list[RepoUrl]:
    """Repository coordinates recovered from badges in ``description``.

    Covers shield-style image URLs that embed ``<owner>/<name>`` as well as the
    link targets wrapping badge images (markdown, reStructuredText and raw
    HTML are all scanned regardless of ``format``).
    """
    if not description:
        return []
    hits: list[tuple[int, RepoUrl]] = []

    for match in _MD_IMAGE_RE.finditer(description):
        hits.extend((match.start(), r) for r in _badge_image_repos(match.group("src")))
    for match in _MD_BADGE_LINK_RE.finditer(description):
        hits.extend((match.start("target"), r) for r in extract_repo_urls(match.group("target")))
    for match in _RST_IMAGE_RE.finditer(description):
        hits.extend((match.start(), r) for r in _badge_image_repos(match.group("src")))
        target = _RST_TARGET_RE.search(match.group("opts") or "")
        if target:
            hits.extend(
                (match.start("opts"), r) for r in extract_repo_urls(target.group("target"))
            )
    for match in _HTML_BADGE_LINK_RE.finditer(description):
        hits.extend((match.start(), r) for r in _badge_image_repos(match.group("src")))
        hits.extend((match.start("target"), r) for r in extract_repo_urls(match.group("target")))

    hits.sort(key=lambda item: item[0])
    result, seen = [], set()
    for _, repo in hits:
        if repo.canonical not in seen:
            seen.add(repo.canonical)
            result.append(repo)
    return result


class RedirectResolver(Protocol):
    def resolve(self, canonical_url: str) -> Optional[str]:
        """Return the moved-to URL, ``None`` when unchanged; raise Gone."""


class OfflineResolver:
    def resolve(self, canonical_url):
        return None


class MappingResolver:
    """Fixture resolver: ``{canonical_or_slug: new_url | "gone"}``.

    Bare ``owner/name`` keys match that slug on any platform.
    """

    def __init__(self, moves=None, gone=()):
        self.moves = {}
        for key, value in dict(moves or {}).items():
            self.moves[_resolver_key(key)] = value
        self.gone = {_resolver_key(key) for key in gone}
        for key, value in list(self.moves.items()):
            if value == "gone":
                self.gone.add(key)
                del self.moves[key]

    def resolve(self, canonical_url):
        keys = _resolver_keys(canonical_url)
        if self.gone.intersection(keys):
            raise Gone(canonical_url)
        for key in keys:
            if key in self.moves:
                return self.moves[key]
        return None


def _resolver_key(url: str) -> str:
    urls = extract_repo_urls(url)
    if urls:
        return urls[0].canonical.lower()
    return url.strip("/").lower()


def _resolver_keys(url: str) -> list[str]:
    """Canonical form first, then the bare ``owner/name`` slug."""
    urls = extract_repo_urls(url)
    if not urls:
        return [_resolver_key(url)]
    return [urls[0].canonical.lower(), urls[0].slug.lower()]


class HttpResolver:
    """Follows HTTP redirects on the canonical URL; 404 counts as gone."""

    def __init__(self, timeout=15.0, offline=False):
        self.timeout = timeout
        self.offline = offline
        self._cache: dict[str, Optional[str]] = {}

    def resolve(self, canonical_url):
        if self.offline:
            return None
        if canonical_url in self._cache:
            return self._cache[canonical_url]
        import requests

        try:
            response = requests.head(canonical_url, allow_redirects=True, timeout=self.timeout)
        except requests.RequestException:
            logger.warning("redirect lookup failed for %s", canonical_url)
            return None
        if response.status_code == 404:
            raise Gone(canonical_url)
        moved = response.url if response.url.rstrip("/") != canonical_url else None
        self._cache[canonical_url] = moved
        return moved


def resolve_redirect(url: RepoUrl, resolver: Optional[RedirectResolver] = None) -> tuple[RepoUrl, bool]:
    """Post-redirect coordinate and whether a redirect happened."""
    if resolver is None:
        return url, False
    moved = resolver.resolve(url.canonical)
    if not moved:
        return url, False
    targets = extract_repo_urls(moved)
    if not targets:
        logger.warning("redirect target %s is not a known platform URL", moved)
        return url, False
    target = replace(targets[0], raw=url.raw)
    return target, target.canonical != url.canonical


def normalize_name(name: str) -> str:
    return re.sub(r"[^0-9a-z]", "", name.lower())


def name_match(package: str, repo: RepoUrl) -> bool:
    return normalize_name(package) == normalize_name(repo.name)


class PageFetcher(Protocol):
    def fetch(self, url: str) -> str: ...


class OfflinePageFetcher:
    def fetch(self, url):
        raise OfflineSkipped(url)


class MappingPageFetcher:
    def __init__(self, pages):
        self.pages = dict(pages)

    def fetch(self, url):
        if url not in self.pages:
            raise LookupError(url)
        return self.pages[url]


class HttpPageFetcher:
    def __init__(self, timeout=15.0):
        self.timeout = timeout

    def fetch(self, url):
        import requests

        response = requests.get(url, timeout=self.timeout)
        response.raise_for_status()
        return response.text


def _first_redirected(candidates: Iterable[RepoUrl], resolver, package=None):
    for candidate in candidates:
        try:
            resolved, redirected = resolve_redirect(candidate, resolver)
        except Gone:
            logger.info("candidate %s is gone", candidate.canonical)
            continue
        if package is not None and not name_match(package, resolved):
            continue
        return resolved, redirected
    return None


def _scrape_targets(doc) -> list[tuple[str, str]]:
    targets = []
    if doc.home_page and doc.home_page.startswith(("http://", "https://")):
        targets.append(("homepage", doc.home_page))
    for label, url in doc.project_urls.items():
        lowered = label.lower()
        if "doc" in lowered:
            targets.append(("docpage", url))
        elif "home" in lowered:
            targets.append(("homepage", url))
    seen, unique = set(), []
    for kind, url in targets:
        if url not in seen:
            seen.add(url)
            unique.append((kind, url))
    return unique


def retrieve_from_metadata(doc, resolver: Optional[RedirectResolver] = None,
                           page_fetcher: Optional[PageFetcher] = None) -> RetrievalOutcome:
    """Run the three-stage search over a :class:`MetadataDoc`."""
    # Stage 1: declared fields, no name gate.
    fields = [("url", doc.home_page), ("download_url", doc.download_url)]
    fields += [("project_urls", url) for url in doc.project_urls.values()]
    stage1 = []
    for source, text in fields:
        for repo in extract_repo_urls(text):
            stage1.append((source, repo))
    candidates = list(dict.fromkeys(repo.canonical for _, repo in stage1))
    for source, repo in stage1:
        hit = _first_redirected([repo], resolver)
        if hit:
            return RetrievalOutcome(hit[0], source, hit[1], candidates)

    # Stage 2: description badges, then description URLs.
    badges = extract_badge_repo_urls(doc.description, doc.description_format)
    hit = _first_redirected(badges, resolver, doc.name)
    if hit:
        return RetrievalOutcome(hit[0], "badge", hit[1], candidates)
    hit = _first_redirected(extract_repo_urls(doc.description), resolver, doc.name)
    if hit:
        return RetrievalOutcome(hit[0], "description", hit[1], candidates)

    # Stage 3: scrape homepage / documentation pages.
    if page_fetcher is not None:
        for kind, url in _scrape_targets(doc):
            try:
                page = page_fetcher.fetch(url)
            except Exception as exc:
                logger.info("could not scrape %s: %s", url, exc)
                continue
            hit = _first_redirected(extract_repo_urls(page), resolver, doc.name)
            if hit:
                return RetrievalOutcome(hit[0], kind, hit[1], candidates)

    return RetrievalOutcome(candidates=candidates)
