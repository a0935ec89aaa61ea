"""Full-history file enumeration of a Git repository, submodules included.

Every commit object in the object database is visited (reachable or not).
Each commit's root tree is walked recursively; gitlink entries are resolved
through the ``.gitmodules`` of that same commit and the pinned submodule
commit is walked in the submodule's own object store.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Optional

from repolink.errors import MissingObject, NotARepository
from repolink.git import GitRepository, RepoCache, RepoFetcher, resolve_relative_url

logger = logging.getLogger(__name__)

MAX_SUBMODULE_DEPTH = 10

_SECTION_RE = re.compile(r'^\s*\[\s*submodule\s+"(?P<name>[^"]*)"\s*\]\s*$')
_KEYVAL_RE = re.compile(r"^\s*(?P<key>[A-Za-z][\w-]*)\s*=\s*(?P<value>.*?)\s*$")


@dataclass
class SubmoduleMap:
    entries: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def get(self, path: str) -> Optional[str]:
        return self.entries.get(path)


def _unquote(value: str) -> str:
    # drop trailing comments outside quotes, then strip one level of quotes
    out, quoted = [], False
    for ch in value:
        if ch == '"':
            quoted = not quoted
            continue
        if ch in "#;" and not quoted:
            break
        out.append(ch)
    return "".join(out).strip()


def _norm_path(path: str) -> str:
    return "/".join(p for p in path.replace("\\", "/").split("/") if p not in ("", "."))


def parse_gitmodules(content) -> SubmoduleMap:
    """Parse ``.gitmodules`` into ``{path: url}``.

    Sections lacking either ``path`` or ``url`` are dropped with a warning;
    anything unparseable yields an empty map and a warning.
    """
    if isinstance(content, bytes):
        content = content.decode("utf-8", "replace")
    result = SubmoduleMap()
    sections: list[tuple[str, dict[str, str]]] = []
    current: Optional[dict[str, str]] = None
    for lineno, raw in enumerate(content.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        section = _SECTION_RE.match(line)
        if section:
            current = {}
            sections.append((section.group("name"), current))
            continue
        if line.startswith("["):
            current = None  # some other section; ignore its keys
            continue
        keyval = _KEYVAL_RE.match(line)
        if keyval is None:
            result.warnings.append(f".gitmodules line {lineno} unparseable")
            return SubmoduleMap(warnings=result.warnings)
        if current is not None:
            current[keyval.group("key").lower()] = _unquote(keyval.group("value"))

    for name, keys in sections:
        path, url = keys.get("path"), keys.get("url")
        if not path or not url:
            result.warnings.append(f'submodule "{name}" lacks path or url')
            continue
        result.entries[_norm_path(path)] = url
    return result


@dataclass
class RepoFileSet:
    repo: str
    hashes: set[str] = field(default_factory=set)
    named: set[tuple[str, str]] = field(default_factory=set)
    commit_count: int = 0
    submodule_repos: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


class _Walk:
    def __init__(self, fetcher: Optional[RepoFetcher], follow_submodules: bool, max_depth: int):
        self.fetcher = fetcher
        self.follow = follow_submodules
        self.max_depth = max_depth
        self.named: set[tuple[str, str]] = set()
        self.memo: set = set()
        self.submodules: dict[str, None] = {}
        self.warnings: dict[str, None] = {}

    def warn(self, message):
        if message not in self.warnings:
            logger.info(message)
            self.warnings[message] = None

    def tree(self, repo: GitRepository, tree_id: str, submap: dict[str, str],
             prefix: str = "", depth: int = 0):
        """Walk one tree; ``submap`` is keyed by paths from the repository root."""
        local = prefix + "/" if prefix else ""
        relevant = tuple(sorted(
            (k[len(local):], v) for k, v in submap.items() if k.startswith(local)
        ))
        key = (repo.url, tree_id, relevant)
        if key in self.memo:
            return
        self.memo.add(key)
        try:
            entries = repo.read_tree(tree_id)
        except MissingObject as exc:
            self.warn(f"unreadable tree {tree_id} in {repo.url}: {exc}")
            return

        # pass 1: submodule declarations in this tree
        for entry in entries:
            if entry.name == ".gitmodules" and entry.kind == "blob":
                try:
                    parsed = parse_gitmodules(repo.read_blob(entry.oid))
                except MissingObject:
                    continue
                for w in parsed.warnings:
                    self.warn(f"{repo.url}: {w}")
                submap = dict(submap)
                for path, url in parsed.entries.items():
                    submap[local + path] = url

        # pass 2: content
        for entry in entries:
            kind = entry.kind
            if kind == "blob":
                self.named.add((entry.name, entry.oid))
            elif kind == "tree":
                self.tree(repo, entry.oid, submap, local + entry.name, depth)
            elif self.follow:
                self.gitlink(repo, entry, submap.get(local + entry.name), local + entry.name, depth)

    def gitlink(self, repo: GitRepository, entry, url: Optional[str], path: str, depth: int):
        if url is None:
            self.warn(f"{repo.url}: gitlink {path} has no .gitmodules entry")
            return
        url = resolve_relative_url(url, repo.url)
        if depth + 1 > self.max_depth:
            self.warn(f"{repo.url}: submodule depth cap reached at {path}")
            return
        sub = self.fetcher.open(url) if self.fetcher is not None else None
        if sub is None:
            self.warn(f"{repo.url}: submodule {url} unavailable")
            return
        self.submodules.setdefault(url, None)
        try:
            sub_tree, _ = sub.read_commit(entry.oid)
        except MissingObject:
            self.warn(f"{repo.url}: commit {entry.oid} absent from submodule {url}")
            return
        self.tree(sub, sub_tree, {}, "", depth + 1)


def _open(repo, fetcher) -> GitRepository:
    if isinstance(repo, GitRepository):
        return repo
    if fetcher is not None and not isinstance(repo, str):
        repo = str(repo)
    if fetcher is not None:
        opened = fetcher.open(str(repo))
        if opened is not None:
            return opened
    return GitRepository(repo)


def traverse(repo, fetcher: Optional[RepoFetcher] = None, max_depth: int = MAX_SUBMODULE_DEPTH,
             follow_submodules: bool = True) -> RepoFileSet:
    """Union of (file name, blob id) over every commit's snapshot.

    Args:
        repo: a :class:`GitRepository`, a local path, or a URL the fetcher
            can open.
        fetcher: opens submodule repositories by URL. Defaults to a
            :class:`RepoCache` that only resolves local paths.
        max_depth: submodule nesting cap; deeper branches are skipped with a
            warning rather than aborting the walk.
        follow_submodules: set to ``False`` for the naive walk that ignores
            gitlinks.
    """
    if fetcher is None:
        fetcher = RepoCache()
    git_repo = _open(repo, fetcher)
    walk = _Walk(fetcher, follow_submodules, max_depth)
    commits = git_repo.list_all_commits()
    for commit in commits:
        try:
            root, _ = git_repo.read_commit(commit)
        except MissingObject as exc:
            walk.warn(str(exc))
            continue
        walk.tree(git_repo, root, {})
    return RepoFileSet(
        repo=git_repo.url,
        hashes={digest for _, digest in walk.named},
        named=walk.named,
        commit_count=len(commits),
        submodule_repos=list(walk.submodules),
        warnings=list(walk.warnings),
    )


def traverse_tree(repo: GitRepository, tree_id: str, submodules: Optional[SubmoduleMap | dict] = None,
                  prefix: str = "", fetcher: Optional[RepoFetcher] = None) -> set[tuple[str, str]]:
    """File set under a single tree; see :func:`traverse`."""
    if isinstance(submodules, SubmoduleMap):
        submodules = submodules.entries
    walk = _Walk(fetcher or RepoCache(), True, MAX_SUBMODULE_DEPTH)
    walk.tree(repo, tree_id, dict(submodules or {}), prefix)
    return walk.named


__all__ = [
    "NotARepository", "RepoFileSet", "SubmoduleMap", "parse_gitmodules",
    "traverse", "traverse_tree",
]
