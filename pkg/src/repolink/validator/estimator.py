"""Link validator: probability that a (release, repository) link is wrong."""

from __future__ import annotations

import ast
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.inspection import permutation_importance
from sklearn.model_selection import GridSearchCV, StratifiedKFold, train_test_split
from sklearn.utils.validation import check_array, check_is_fitted

from repolink.errors import DegenerateDataset, ModelFormatError
from repolink.validator.features import FEATURE_NAMES, FeatureVector, to_matrix
from repolink.validator.forest import GiniTree, RandomForestClassifier
from repolink.validator.linear import LogisticRegressionGD
from repolink.validator.metrics import auc

logger = logging.getLogger(__name__)

MODEL_MAGIC = "repolink-validator-model"
MODEL_VERSION = 1
KINDS = ("random_forest", "logistic")

FOREST_GRID = {"n_estimators": [50, 100, 200], "min_samples_leaf": [1, 5]}
LOGISTIC_GRID = {"learning_rate": [0.05, 0.5], "alpha": [1e-4, 1e-2]}


def oversample(y, rng) -> np.ndarray:
    """Row indices with the minority class resampled (with replacement) to parity."""
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    indices = np.arange(len(y))
    if len(classes) < 2 or counts[0] == counts[1]:
        return indices
    minority = classes[np.argmin(counts)]
    pool = indices[y == minority]
    extra = rng.choice(pool, size=counts.max() - counts.min(), replace=True)
    return np.concatenate([indices, extra])


class LinkValidator(ClassifierMixin, BaseEstimator):
    """Classifier over the six link features; label 1 means incorrect.

    Unknown maintainer counts (NaN) are replaced by the training medians, and
    the minority class is randomly oversampled before the inner model is
    fitted. Both steps only ever see the data passed to :meth:`fit`.

    Parameters
    ----------
    kind : {"random_forest", "logistic"}
    n_estimators, min_samples_leaf : forest settings.
    learning_rate, alpha : logistic settings.
    oversample : bool
        Balance classes before fitting.
    random_state : int
        Master seed for resampling and tree construction.
    """

    def __init__(self, kind="random_forest", n_estimators=100, min_samples_leaf=1,
                 learning_rate=0.1, alpha=1e-4, oversample=True, random_state=0):
        self.kind = kind
        self.n_estimators = n_estimators
        self.min_samples_leaf = min_samples_leaf
        self.learning_rate = learning_rate
        self.alpha = alpha
        self.oversample = oversample
        self.random_state = random_state

    def _make_model(self):
        if self.kind == "random_forest":
            return RandomForestClassifier(
                n_estimators=self.n_estimators,
                max_features="sqrt",
                min_samples_leaf=self.min_samples_leaf,
                bootstrap=True,
                random_state=self.random_state,
            )
        if self.kind == "logistic":
            return LogisticRegressionGD(learning_rate=self.learning_rate, alpha=self.alpha)
        raise ValueError(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")

    def _impute(self, X):
        X = np.array(X, dtype=float, copy=True)
        missing = np.isnan(X)
        if missing.any():
            X[missing] = np.take(self.impute_values_, np.nonzero(missing)[1])
        return X

    def fit(self, X, y):
        X = check_array(X, dtype=float, ensure_all_finite="allow-nan")
        y = np.asarray(y, dtype=int)
        if len(X) != len(y):
            raise ValueError("X and y differ in length")
        if len(np.unique(y)) < 2:
            raise DegenerateDataset("training data must contain both labels")
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN columns
            medians = np.nanmedian(X, axis=0)
        self.impute_values_ = np.nan_to_num(np.asarray(medians, dtype=float), nan=0.0)
        X = self._impute(X)
        rng = np.random.default_rng(self.random_state)
        self.sample_indices_ = oversample(y, rng) if self.oversample else np.arange(len(y))
        self.model_ = self._make_model().fit(X[self.sample_indices_], y[self.sample_indices_])
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        if isinstance(X, FeatureVector):
            X = X.as_array()[None, :]
        X = check_array(X, dtype=float, ensure_all_finite="allow-nan")
        return self.model_.predict_proba(self._impute(X))

    def predict(self, X, threshold=0.5):
        return (self.predict_proba(X)[:, 1] >= threshold).astype(int)

    def incorrect_probability(self, features: FeatureVector) -> float:
        return float(self.predict_proba(features)[0, 1])

    # -- persistence -------------------------------------------------------

    def save(self, path):
        check_is_fitted(self, "model_")
        lines = [
            f"{MODEL_MAGIC} {MODEL_VERSION}",
            f"kind {self.kind}",
            f"seed {self.random_state}",
            "features " + ",".join(FEATURE_NAMES[: self.n_features_in_]),
            "impute " + " ".join(repr(float(v)) for v in self.impute_values_),
            "params " + " ".join(f"{k}={v!r}" for k, v in sorted(self.get_params().items())
                                 if k not in ("kind", "random_state")),
        ]
        model = self.model_
        if self.kind == "random_forest":
            lines.append(f"trees {len(model.estimators_)}")
            for tree in model.estimators_:
                records = tree.to_records()
                lines.append(f"tree {len(records)}")
                lines.extend(records)
        else:
            for name in ("mean_", "scale_", "coef_"):
                lines.append(name.rstrip("_") + " " + " ".join(repr(float(v)) for v in getattr(model, name)))
            lines.append(f"intercept {float(model.intercept_)!r}")
        lines.append("end")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "LinkValidator":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        try:
            return cls._parse(lines)
        except (IndexError, ValueError, KeyError, StopIteration, SyntaxError) as exc:
            raise ModelFormatError(f"{path}: {exc}") from exc

    @classmethod
    def _parse(cls, lines):
        it = iter(lines)
        magic, version = next(it).split()
        if magic != MODEL_MAGIC or int(version) != MODEL_VERSION:
            raise ModelFormatError(f"unsupported model header {magic} {version}")
        header = {}
        for _ in range(5):
            key, _, value = next(it).partition(" ")
            header[key] = value
        features = tuple(header["features"].split(","))
        if features != FEATURE_NAMES[: len(features)]:
            raise ModelFormatError(f"unexpected feature order {features}")
        params = {}
        for item in header["params"].split():
            key, _, value = item.partition("=")
            params[key] = _literal(value)
        self = cls(kind=header["kind"], random_state=int(header["seed"]), **params)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = len(features)
        self.impute_values_ = np.array([float(v) for v in header["impute"].split()])

        if self.kind == "random_forest":
            _, count = next(it).split()
            model = self._make_model()
            model.classes_ = np.array([0, 1])
            model.n_features_in_ = len(features)
            model.estimators_ = []
            for _ in range(int(count)):
                _, n_records = next(it).split()
                records = [next(it) for _ in range(int(n_records))]
                model.estimators_.append(GiniTree.from_records(records))
        else:
            model = self._make_model()
            model.classes_ = np.array([0, 1])
            model.n_features_in_ = len(features)
            for name in ("mean_", "scale_", "coef_"):
                key, *values = next(it).split()
                if key != name.rstrip("_"):
                    raise ModelFormatError(f"expected {name.rstrip('_')}, got {key}")
                setattr(model, name, np.array([float(v) for v in values]))
            model.intercept_ = float(next(it).split()[1])
        if next(it) != "end":
            raise ModelFormatError("missing end marker")
        self.model_ = model
        return self


def _literal(text):
    return ast.literal_eval(text)


def _as_xy(dataset):
    if isinstance(dataset, tuple) and len(dataset) == 2:
        X, y = dataset
        return np.asarray(X, dtype=float), np.asarray(y, dtype=int)
    return to_matrix(dataset)


def train(dataset, kind="random_forest", seed=0, grid=True, cv=3) -> LinkValidator:
    """Fit a validator, optionally grid-searching its hyperparameters.

    ``dataset`` is a list of :class:`LabeledLink` or an ``(X, y)`` pair. The
    grid search is skipped when the minority class is too small to fill every
    cross-validation fold.
    """
    X, y = _as_xy(dataset)
    labels, counts = np.unique(y, return_counts=True)
    if len(labels) < 2:
        raise DegenerateDataset("training data must contain both labels")
    base = LinkValidator(kind=kind, random_state=seed)
    if not grid or counts.min() < cv:
        return base.fit(X, y)
    param_grid = FOREST_GRID if kind == "random_forest" else LOGISTIC_GRID
    search = GridSearchCV(
        base,
        param_grid,
        scoring="roc_auc",
        cv=StratifiedKFold(cv, shuffle=True, random_state=seed),
        refit=True,
    )
    search.fit(X, y)
    logger.info("grid search picked %s (cv auc %.4f)", search.best_params_, search.best_score_)
    return search.best_estimator_


@dataclass
class HoldoutResult:
    model: LinkValidator
    auc: float
    train_index: np.ndarray
    test_index: np.ndarray
    test_scores: np.ndarray
    importances: dict[str, float] = field(default_factory=dict)

    def ranked_features(self) -> list[str]:
        return sorted(self.importances, key=lambda k: -self.importances[k])


def evaluate_holdout(dataset, kind="random_forest", seed=0, test_size=0.2, grid=True,
                     importance_repeats=10) -> HoldoutResult:
    """Stratified split, train on the larger part, AUC on the held-out part.

    Permutation importance (AUC drop when one column is shuffled) is computed
    on the held-out part when ``importance_repeats`` is positive.
    """
    X, y = _as_xy(dataset)
    if len(np.unique(y)) < 2:
        raise DegenerateDataset("evaluation needs both labels")
    index = np.arange(len(y))
    train_idx, test_idx = train_test_split(
        index, test_size=test_size, stratify=y, random_state=seed
    )
    model = train((X[train_idx], y[train_idx]), kind=kind, seed=seed, grid=grid)
    scores = model.predict_proba(X[test_idx])[:, 1]
    result = HoldoutResult(model, auc(scores, y[test_idx]), train_idx, test_idx, scores)
    if importance_repeats:
        perm = permutation_importance(
            model, X[test_idx], y[test_idx], scoring="roc_auc",
            n_repeats=importance_repeats, random_state=seed,
        )
        result.importances = dict(zip(FEATURE_NAMES, map(float, perm.importances_mean)))
    return result


def predict_proba(model: LinkValidator, features: FeatureVector) -> float:
    return model.incorrect_probability(features)
