"""Link package releases to their source repositories and check the link."""

from repolink.index import CorpusManifest, ProvenanceIndex, build_index
from repolink.metadata import RepoUrl, RetrievalOutcome, extract_repo_urls, retrieve_from_metadata
from repolink.phantom import PhantomReport, phantom_report
from repolink.pipeline import PipelineConfig, RadarReport, run_pipeline
from repolink.registry import MaintainerInfo, MetadataDoc, Registry
from repolink.retriever import RetrieverParams, get_candidates, get_most_probable
from repolink.sdist import FileEntry, SdistInventory, git_blob_sha1, open_sdist
from repolink.validator import LinkValidator, RandomForestClassifier, auc, extract_features
from repolink.walker import RepoFileSet, traverse

__version__ = "0.1.0"

__all__ = [
    "CorpusManifest", "FileEntry", "LinkValidator", "MaintainerInfo", "MetadataDoc",
    "PhantomReport", "PipelineConfig", "ProvenanceIndex", "RadarReport", "RandomForestClassifier",
    "Registry", "RepoFileSet", "RepoUrl", "RetrievalOutcome", "RetrieverParams",
    "SdistInventory", "auc", "build_index", "extract_features", "extract_repo_urls",
    "get_candidates", "get_most_probable", "git_blob_sha1", "open_sdist", "phantom_report",
    "retrieve_from_metadata", "run_pipeline", "traverse",
]
