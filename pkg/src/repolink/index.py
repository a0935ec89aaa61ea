"""Local blob -> commit -> repository provenance index.

Directory layout::

    blob2commit.tsv   <blob>\\t<first commit>
    commit2repos.tsv  <commit>\\t<repo_id>,<repo_id>,...
    forks.tsv         <repo_id>\\t<fork parent repo_id>
    META              JSON: format version, corpus digest, counts

Keys are strictly ascending in every file, and building twice from the same
corpus yields byte-identical output.
"""

from __future__ import annotations

import bisect
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from repolink.errors import EmptyCorpus, MissingObject, NotARepository
from repolink.git import GitRepository

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
FILES = ("blob2commit.tsv", "commit2repos.tsv", "forks.tsv", "META")


@dataclass
class CorpusEntry:
    repo_id: str
    path: str
    fork_of: Optional[str] = None


@dataclass
class CorpusManifest:
    repos: list[CorpusEntry]

    def __post_init__(self):
        ids = [r.repo_id for r in self.repos]
        if len(ids) != len(set(ids)):
            raise ValueError("repo_ids must be unique")
        known = set(ids)
        for repo in self.repos:
            if repo.fork_of is not None and repo.fork_of not in known:
                raise ValueError(f"{repo.repo_id} forks unknown repo {repo.fork_of}")

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        entries = []
        for item in data["repos"]:
            local = item.get("path") or item.get("local_path") or item.get("url")
            if local and "://" not in local and not os.path.isabs(local):
                local = str((path.parent / local).resolve())
            entries.append(CorpusEntry(item["repo_id"], local, item.get("fork_of")))
        return cls(entries)

    def dump(self, path):
        data = {"repos": [
            {"repo_id": r.repo_id, "path": r.path, "fork_of": r.fork_of} for r in self.repos
        ]}
        Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


@dataclass
class BuildStats:
    repos_indexed: int = 0
    repos_skipped: list[str] = field(default_factory=list)
    commits: int = 0
    blobs: int = 0
    corpus_digest: str = ""

    def to_dict(self) -> dict:
        return {
            "repos_indexed": self.repos_indexed,
            "repos_skipped": list(self.repos_skipped),
            "commits": self.commits,
            "blobs": self.blobs,
            "corpus_digest": self.corpus_digest,
        }


def _scan_repo(repo: GitRepository):
    """First (timestamp, commit) for every blob reachable from a commit tree.

    Commits are visited oldest first (committer time, then id) and a tree
    already walked is never walked again: every blob under it was already
    credited to an earlier or equal commit.
    """
    commits = repo.list_all_commits()
    dated = []
    for commit in commits:
        try:
            tree, when = repo.read_commit(commit)
        except MissingObject:
            continue
        dated.append((when, commit, tree))
    dated.sort()

    first: dict[str, tuple[int, str]] = {}
    seen_trees: set[str] = set()
    for when, commit, root in dated:
        stack = [root]
        while stack:
            tree = stack.pop()
            if tree in seen_trees:
                continue
            seen_trees.add(tree)
            try:
                entries = repo.read_tree(tree)
            except MissingObject:
                logger.warning("%s: unreadable tree %s", repo.url, tree)
                continue
            for entry in entries:
                kind = entry.kind
                if kind == "blob":
                    if entry.oid not in first:
                        first[entry.oid] = (when, commit)
                elif kind == "tree":
                    stack.append(entry.oid)
    return commits, first


def build_index(manifest: CorpusManifest, out) -> BuildStats:
    if not manifest.repos:
        raise EmptyCorpus("manifest lists no repositories")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stats = BuildStats()

    blob_first: dict[str, tuple[int, str]] = {}
    commit_repos: dict[str, set[str]] = {}
    digest = hashlib.sha256()
    for entry in sorted(manifest.repos, key=lambda r: r.repo_id):
        try:
            repo = GitRepository(entry.path, url=entry.repo_id)
        except NotARepository as exc:
            logger.warning("skipping %s: %s", entry.repo_id, exc)
            stats.repos_skipped.append(entry.repo_id)
            continue
        with repo:
            commits, first = _scan_repo(repo)
        stats.repos_indexed += 1
        digest.update(f"{entry.repo_id}\t{entry.fork_of or ''}\n".encode())
        for commit in commits:
            digest.update(commit.encode() + b"\n")
            commit_repos.setdefault(commit, set()).add(entry.repo_id)
        for blob, stamp in first.items():
            current = blob_first.get(blob)
            if current is None or stamp < current:
                blob_first[blob] = stamp
    if stats.repos_indexed == 0:
        raise EmptyCorpus("no repository in the manifest could be opened")

    indexed = set().union(*commit_repos.values()) if commit_repos else set()
    forks = {
        r.repo_id: r.fork_of for r in manifest.repos
        if r.fork_of is not None and r.repo_id in indexed
    }

    stats.commits = len(commit_repos)
    stats.blobs = len(blob_first)
    stats.corpus_digest = digest.hexdigest()

    _write_lines(out / "blob2commit.tsv", (f"{b}\t{blob_first[b][1]}" for b in sorted(blob_first)))
    _write_lines(
        out / "commit2repos.tsv",
        (f"{c}\t{','.join(sorted(commit_repos[c]))}" for c in sorted(commit_repos)),
    )
    _write_lines(out / "forks.tsv", (f"{r}\t{forks[r]}" for r in sorted(forks)))
    meta = {
        "format_version": FORMAT_VERSION,
        "corpus_digest": stats.corpus_digest,
        "repos": stats.repos_indexed,
        "commits": stats.commits,
        "blobs": stats.blobs,
    }
    _write_text(out / "META", json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return stats


def _write_text(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_lines(path: Path, lines):
    _write_text(path, "".join(line + "\n" for line in lines))


class ProvenanceIndex:
    """Immutable, in-memory view of an index directory."""

    def __init__(self, blob2commit=None, commit2repos=None, fork_of=None, meta=None):
        self.blob2commit: dict[str, str] = dict(blob2commit or {})
        self.commit2repos: dict[str, tuple[str, ...]] = {
            c: tuple(sorted(r)) for c, r in (commit2repos or {}).items()
        }
        self.fork_of: dict[str, str] = dict(fork_of or {})
        self.meta = dict(meta or {})
        self.fork_root = {r: self._root(r) for r in self.fork_of}

    def _root(self, repo_id):
        seen = {repo_id}
        while repo_id in self.fork_of:
            repo_id = self.fork_of[repo_id]
            if repo_id in seen:
                break  # cycle: stop where it closes
            seen.add(repo_id)
        return repo_id

    @classmethod
    def load(cls, directory) -> "ProvenanceIndex":
        directory = Path(directory)
        meta = json.loads((directory / "META").read_text(encoding="utf-8"))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported index format {meta.get('format_version')}")
        blob2commit = dict(_read_pairs(directory / "blob2commit.tsv"))
        commit2repos = {c: v.split(",") for c, v in _read_pairs(directory / "commit2repos.tsv")}
        forks = dict(_read_pairs(directory / "forks.tsv"))
        return cls(blob2commit, commit2repos, forks, meta)

    def blob_to_first_commit(self, digest: str) -> Optional[str]:
        return self.blob2commit.get(digest)

    def commit_to_repos(self, commit: Optional[str]) -> list[str]:
        if commit is None:
            return []
        return list(self.commit2repos.get(commit, ()))

    def defork(self, repo_id: str) -> str:
        return self.fork_root.get(repo_id, repo_id)


def _read_pairs(path: Path):
    if not path.exists():
        return
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            key, _, value = line.rstrip("\n").partition("\t")
            if key:
                yield key, value


class SortedTsvLookup:
    """Binary-search lookups straight off a sorted ``.tsv`` file's lines.

    Useful when the index is too large to hold as dicts; keys are compared as
    strings, which matches the build order.
    """

    def __init__(self, path):
        with open(path, encoding="utf-8") as fh:
            self._lines = fh.read().splitlines()
        self._keys = [line.split("\t", 1)[0] for line in self._lines]

    def get(self, key: str) -> Optional[str]:
        i = bisect.bisect_left(self._keys, key)
        if i < len(self._keys) and self._keys[i] == key:
            return self._lines[i].split("\t", 1)[1]
        return None


def load_index(directory) -> ProvenanceIndex:
    return ProvenanceIndex.load(directory)


def blob_to_first_commit(index: ProvenanceIndex, digest: str) -> Optional[str]:
    return index.blob_to_first_commit(digest)


def commit_to_repos(index: ProvenanceIndex, commit: str) -> list[str]:
    return index.commit_to_repos(commit)


def defork(index: ProvenanceIndex, repo_id: str) -> str:
    return index.defork(repo_id)
