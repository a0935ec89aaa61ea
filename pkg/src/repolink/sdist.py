"""Source distribution enumeration and Git blob hashing."""

from __future__ import annotations

import hashlib
import stat
import tarfile
import zipfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

from repolink.errors import CorruptArchive, PathTraversal, UnsupportedFormat

TAR_SUFFIXES = (".tar.gz", ".tgz", ".tar.bz2")
ZIP_SUFFIXES = (".zip",)


def git_blob_sha1(content: bytes) -> str:
    """Object id Git assigns to a blob with these bytes."""
    digest = hashlib.sha1(b"blob %d\0" % len(content))
    digest.update(content)
    return digest.hexdigest()


@dataclass(frozen=True)
class FileEntry:
    path: str
    blob_sha1: str
    size: int

    @property
    def is_python(self) -> bool:
        return self.path.endswith(".py")

    @property
    def basename(self) -> str:
        return self.path.rsplit("/", 1)[-1]


@dataclass
class SdistInventory:
    package: str
    version: str
    root_prefix: str = ""
    entries: list[FileEntry] = field(default_factory=list)

    @property
    def python_entries(self) -> list[FileEntry]:
        return [e for e in self.entries if e.is_python]

    def dump(self) -> str:
        """Newline-delimited ``<hex> <size> <path>`` records."""
        return "".join(f"{e.blob_sha1} {e.size} {e.path}\n" for e in self.entries)

    @classmethod
    def from_files(cls, package, version, files: dict[str, bytes]) -> "SdistInventory":
        entries = [FileEntry(p, git_blob_sha1(data), len(data)) for p, data in files.items()]
        return cls(package, version, "", sorted(entries, key=lambda e: e.path))


def _check_member_path(name: str) -> str:
    normalized = name.replace("\\", "/")
    if normalized.startswith("/") or (len(normalized) > 1 and normalized[1] == ":"):
        raise PathTraversal(f"absolute member path: {name}")
    parts = [p for p in normalized.split("/") if p not in ("", ".")]
    if ".." in parts:
        raise PathTraversal(f"member path escapes archive: {name}")
    return "/".join(parts)


def split_sdist_filename(filename: str) -> tuple[str, str]:
    stem = filename
    for suffix in TAR_SUFFIXES + ZIP_SUFFIXES:
        if stem.lower().endswith(suffix):
            stem = stem[: -len(suffix)]
            break
    if "-" in stem:
        name, version = stem.rsplit("-", 1)
        return name, version
    return stem, ""


def _iter_tar(path):
    try:
        with tarfile.open(path, "r:*") as archive:
            for member in archive:
                # dirs, symlinks, hardlinks and devices are not content
                if not member.isreg():
                    _check_member_path(member.name)
                    continue
                name = _check_member_path(member.name)
                fh = archive.extractfile(member)
                yield name, fh.read() if fh else b""
    except (tarfile.TarError, EOFError, OSError, zlib.error) as exc:
        raise CorruptArchive(f"{path}: {exc}") from exc


def _iter_zip(path):
    try:
        with zipfile.ZipFile(path) as archive:
            for info in archive.infolist():
                name = _check_member_path(info.filename)
                if info.is_dir():
                    continue
                mode = info.external_attr >> 16
                if mode and stat.S_ISLNK(mode):
                    continue
                yield name, archive.read(info)
    except (zipfile.BadZipFile, EOFError, OSError, zlib.error) as exc:
        raise CorruptArchive(f"{path}: {exc}") from exc


def open_sdist(path, package=None, version=None) -> SdistInventory:
    """Enumerate the regular files of a ``.tar.gz``/``.tgz``/``.zip`` sdist.

    A single shared top-level directory is stripped into ``root_prefix``;
    archives with several top-level entries keep their paths untouched.
    Entries are returned sorted by path, later duplicates overriding earlier.
    """
    path = Path(path)
    lowered = path.name.lower()
    if lowered.endswith(TAR_SUFFIXES):
        members = _iter_tar(path)
    elif lowered.endswith(ZIP_SUFFIXES):
        members = _iter_zip(path)
    else:
        raise UnsupportedFormat(f"{path.name}: expected .tar.gz, .tgz or .zip")
    if not path.is_file():
        raise FileNotFoundError(path)

    files: dict[str, tuple[str, int]] = {}
    for name, data in members:
        if name:
            files[name] = (git_blob_sha1(data), len(data))

    tops = {PurePosixPath(p).parts[0] for p in files}
    root_prefix = ""
    if len(tops) == 1 and all("/" in p for p in files):
        root_prefix = tops.pop()

    entries = []
    for name, (digest, size) in files.items():
        rel = name[len(root_prefix) + 1:] if root_prefix else name
        entries.append(FileEntry(rel, digest, size))
    entries.sort(key=lambda e: e.path)

    guessed_name, guessed_version = split_sdist_filename(path.name)
    return SdistInventory(
        package=package or guessed_name,
        version=version or guessed_version,
        root_prefix=root_prefix,
        entries=entries,
    )
