"""Thin object-store access on top of the ``git`` executable.

Objects are read through one long-lived ``git cat-file --batch`` process per
repository; everything else shells out to plumbing commands.
"""

from __future__ import annotations

import logging
import os
import re
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

from repolink.errors import MissingObject, NotARepository, OfflineSkipped

logger = logging.getLogger(__name__)

MODE_TREE = b"40000"
MODE_GITLINK = b"160000"

_COMMITTER_RE = re.compile(rb"^committer .* (\d+) [+-]\d{4}$", re.MULTILINE)


@dataclass(frozen=True)
class TreeEntry:
    mode: bytes
    name: str
    oid: str

    @property
    def kind(self) -> str:
        if self.mode == MODE_TREE:
            return "tree"
        if self.mode == MODE_GITLINK:
            return "commit"
        return "blob"


def parse_tree(data: bytes) -> list[TreeEntry]:
    """Decode a raw tree object: ``<mode> <name>\\0<20-byte id>`` repeated."""
    entries = []
    pos, end = 0, len(data)
    while pos < end:
        space = data.index(b" ", pos)
        nul = data.index(b"\0", space)
        mode = data[pos:space]
        name = data[space + 1:nul].decode("utf-8", "surrogateescape")
        oid = data[nul + 1:nul + 21].hex()
        entries.append(TreeEntry(mode, name, oid))
        pos = nul + 21
    return entries


def parse_commit(data: bytes) -> tuple[str, int]:
    """Root tree id and committer timestamp of a raw commit object."""
    header = data.split(b"\n\n", 1)[0]
    tree = None
    for line in header.split(b"\n"):
        if line.startswith(b"tree "):
            tree = line[5:].decode()
            break
    if tree is None:
        raise MissingObject("commit object has no tree line")
    match = _COMMITTER_RE.search(header)
    return tree, int(match.group(1)) if match else 0


def _git(args, cwd, input=None) -> bytes:
    proc = subprocess.run(
        ["git", *args], cwd=cwd, input=input, capture_output=True, check=False
    )
    if proc.returncode != 0:
        raise subprocess.CalledProcessError(proc.returncode, args, proc.stdout, proc.stderr)
    return proc.stdout


class GitRepository:
    """Read-only handle on a repository's object database."""

    def __init__(self, path, url: Optional[str] = None):
        self.path = Path(path)
        if not self.path.exists():
            raise NotARepository(f"{path} does not exist")
        try:
            git_dir = _git(["rev-parse", "--git-dir"], cwd=self.path).decode().strip()
        except (subprocess.CalledProcessError, NotADirectoryError) as exc:
            raise NotARepository(f"{path} is not a git repository") from exc
        self.git_dir = (self.path / git_dir).resolve()
        self.url = url or str(self.path.resolve())
        self._proc = None
        self._lock = threading.Lock()

    def __repr__(self):
        return f"GitRepository({str(self.path)!r})"

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self._proc is not None:
            self._proc.stdin.close()
            self._proc.wait()
            self._proc.stdout.close()
            self._proc = None

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    def _batch(self):
        if self._proc is None:
            self._proc = subprocess.Popen(
                ["git", "--git-dir", str(self.git_dir), "cat-file", "--batch"],
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        return self._proc

    def read_object(self, oid: str) -> tuple[str, bytes]:
        with self._lock:
            proc = self._batch()
            proc.stdin.write(oid.encode() + b"\n")
            proc.stdin.flush()
            header = proc.stdout.readline()
            if not header:
                raise MissingObject(f"{oid}: cat-file terminated")
            fields = header.split()
            if len(fields) < 3 or fields[-1] == b"missing":
                raise MissingObject(f"{oid} not in {self.path}")
            kind, size = fields[1].decode(), int(fields[2])
            data = proc.stdout.read(size)
            proc.stdout.read(1)
        return kind, data

    def read_tree(self, oid: str) -> list[TreeEntry]:
        kind, data = self.read_object(oid)
        if kind != "tree":
            raise MissingObject(f"{oid} is a {kind}, not a tree")
        return parse_tree(data)

    def read_commit(self, oid: str) -> tuple[str, int]:
        kind, data = self.read_object(oid)
        if kind != "commit":
            raise MissingObject(f"{oid} is a {kind}, not a commit")
        return parse_commit(data)

    def read_blob(self, oid: str) -> bytes:
        kind, data = self.read_object(oid)
        if kind != "blob":
            raise MissingObject(f"{oid} is a {kind}, not a blob")
        return data

    def list_all_commits(self) -> list[str]:
        """Every commit object in the database, reachable or not."""
        out = _git(
            [
                "--git-dir", str(self.git_dir), "cat-file", "--batch-check",
                "--batch-all-objects", "--unordered",
            ],
            cwd=self.path,
        )
        commits = set()
        for line in out.splitlines():
            parts = line.split()
            if len(parts) >= 2 and parts[1] == b"commit":
                commits.add(parts[0].decode())
        return sorted(commits)

    def tags(self) -> list[str]:
        out = _git(
            ["--git-dir", str(self.git_dir), "for-each-ref", "--format=%(refname:short)", "refs/tags"],
            cwd=self.path,
        )
        return [line for line in out.decode("utf-8", "replace").splitlines() if line]


def list_all_commits(repo) -> list[str]:
    if not isinstance(repo, GitRepository):
        repo = GitRepository(repo)
    return repo.list_all_commits()


class RepoFetcher(Protocol):
    def open(self, url: str) -> Optional[GitRepository]: ...


def _is_local(url: str) -> Optional[Path]:
    if url.startswith("file://"):
        return Path(url[len("file://"):])
    if "://" not in url and not re.match(r"^[\w.-]+@[\w.-]+:", url):
        return Path(url)
    return None


class RepoCache:
    """Maps repository URLs to local object stores.

    Resolution order: explicit ``mapping`` entries, local paths and
    ``file://`` URLs, then ``<cache_dir>/<host>/<owner>/<name>[.git]``. When
    not offline, a missing remote is mirrored into the cache with
    ``git clone --mirror``.
    """

    def __init__(self, cache_dir=None, mapping=None, offline=True):
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.mapping = {_norm_url(k): v for k, v in dict(mapping or {}).items()}
        self.offline = offline
        self._open: dict[str, GitRepository] = {}
        self._lock = threading.Lock()

    def _locate(self, url: str) -> Optional[Path]:
        key = _norm_url(url)
        if key in self.mapping:
            return Path(self.mapping[key])
        local = _is_local(url)
        if local is not None:
            return local if local.exists() else None
        if self.cache_dir is None:
            return None
        rel = _cache_relpath(url)
        if rel is None:
            return None
        for candidate in (self.cache_dir / rel, self.cache_dir / (str(rel) + ".git")):
            if candidate.exists():
                return candidate
        if self.offline:
            raise OfflineSkipped(f"offline mode: {url} is not cached")
        target = self.cache_dir / (str(rel) + ".git")
        target.parent.mkdir(parents=True, exist_ok=True)
        logger.info("cloning %s", url)
        try:
            subprocess.run(
                ["git", "clone", "--mirror", "--quiet", url, str(target)],
                check=True, capture_output=True, env={**os.environ, "GIT_TERMINAL_PROMPT": "0"},
            )
        except subprocess.CalledProcessError:
            logger.warning("clone of %s failed", url)
            return None
        return target

    def open(self, url: str) -> Optional[GitRepository]:
        key = _norm_url(url)
        with self._lock:
            if key in self._open:
                return self._open[key]
        try:
            path = self._locate(url)
        except OfflineSkipped:
            logger.info("offline: %s not available", url)
            return None
        if path is None:
            return None
        try:
            repo = GitRepository(path, url=url)
        except NotARepository:
            return None
        with self._lock:
            self._open.setdefault(key, repo)
            return self._open[key]

    def close(self):
        for repo in self._open.values():
            repo.close()
        self._open.clear()


def _norm_url(url: str) -> str:
    url = url.strip().rstrip("/")
    if url.lower().endswith(".git"):
        url = url[:-4]
    return url


def _cache_relpath(url: str) -> Optional[Path]:
    match = re.search(r"(?:://|@)(?:[^@/]*@)?([\w.-]+)[/:]([\w.-]+)/([\w.-]+?)(?:\.git)?/?$", url)
    if not match:
        return None
    host, owner, name = match.groups()
    return Path(host.lower()) / owner / name


def resolve_relative_url(url: str, base: str) -> str:
    """Resolve ``./x`` / ``../x`` submodule URLs against the superproject URL."""
    if not url.startswith(("./", "../")):
        return url
    base = base.rstrip("/")
    scheme_split = base.split("://", 1)
    prefix, rest = (scheme_split[0] + "://", scheme_split[1]) if len(scheme_split) == 2 else ("", base)
    segments = rest.split("/")
    for part in url.split("/"):
        if part == "..":
            if len(segments) > 1:
                segments.pop()
        elif part not in (".", ""):
            segments.append(part)
    return prefix + "/".join(segments)
