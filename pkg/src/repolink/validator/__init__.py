from repolink.validator.estimator import (
    HoldoutResult,
    LinkValidator,
    evaluate_holdout,
    oversample,
    predict_proba,
    train,
)
from repolink.validator.features import (
    FEATURE_NAMES,
    FeatureVector,
    LabeledLink,
    extract_features,
    levenshtein,
    name_similarity,
    normalized_levenshtein,
    read_dataset,
    tag_alignment,
    to_matrix,
    write_dataset,
)
from repolink.validator.forest import GiniTree, RandomForestClassifier
from repolink.validator.linear import LogisticRegressionGD
from repolink.validator.metrics import auc

__all__ = [
    "FEATURE_NAMES", "FeatureVector", "GiniTree", "HoldoutResult", "LabeledLink",
    "LinkValidator", "LogisticRegressionGD", "RandomForestClassifier", "auc",
    "evaluate_holdout", "extract_features", "levenshtein", "name_similarity",
    "normalized_levenshtein", "oversample", "predict_proba", "read_dataset",
    "tag_alignment", "to_matrix", "train", "write_dataset",
]
