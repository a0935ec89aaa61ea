"""Exception hierarchy shared by every stage."""


class RepoLinkError(Exception):
    """Base class for all errors raised by this package."""


# registry
class NotFound(RepoLinkError):
    pass


class TransportError(RepoLinkError):
    pass


class MalformedDocument(RepoLinkError):
    pass


class NoSdist(RepoLinkError):
    pass


class ChecksumMismatch(RepoLinkError):
    pass


class OfflineSkipped(RepoLinkError):
    """Raised when a stage needs the network but offline mode forbids it."""


# metadata
class Gone(RepoLinkError):
    """The hosting platform reports the repository no longer exists."""


# sdist
class UnsupportedFormat(RepoLinkError):
    pass


class CorruptArchive(RepoLinkError):
    pass


class PathTraversal(RepoLinkError):
    pass


# git
class NotARepository(RepoLinkError):
    pass


class MissingObject(RepoLinkError):
    pass


class DepthExceeded(RepoLinkError):
    pass


# phantom / validator
class EmptyInventory(RepoLinkError):
    pass


class DegenerateDataset(RepoLinkError):
    pass


class SingleClass(RepoLinkError):
    pass


class ModelFormatError(RepoLinkError):
    pass


# index / retriever
class EmptyCorpus(RepoLinkError):
    pass


class NoPythonFiles(RepoLinkError):
    pass


class EmptyCandidates(RepoLinkError):
    pass
