import functools
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from repolink.errors import DegenerateDataset, ModelFormatError, SingleClass
from repolink.registry import MaintainerInfo
from repolink.sdist import SdistInventory, git_blob_sha1
from repolink.validator import (
    FEATURE_NAMES,
    FeatureVector,
    GiniTree,
    LabeledLink,
    LinkValidator,
    LogisticRegressionGD,
    RandomForestClassifier,
    auc,
    evaluate_holdout,
    extract_features,
    levenshtein,
    name_similarity,
    normalized_levenshtein,
    oversample,
    read_dataset,
    tag_alignment,
    train,
    write_dataset,
)
from synth import synthetic_links


def edit_distance_oracle(a, b):
    @functools.lru_cache(maxsize=None)
    def d(i, j):
        if i == 0 or j == 0:
            return i + j
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def pairwise_auc_oracle(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    credit = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return credit / (len(pos) * len(neg))


@pytest.mark.parametrize(
    "a, b, expected",
    [("abc", "abc", 1.0), ("abc", "abd", 1 - 1 / 3), ("kitten", "sitting", 1 - 3 / 7), ("", "", 1.0)],
)
def test_normalized_levenshtein_examples(a, b, expected):
    assert normalized_levenshtein(a, b) == pytest.approx(expected, abs=1e-9)


_short = st.text(alphabet="abcde", max_size=8)


@given(_short, _short)
def test_levenshtein_matches_recursive_oracle(a, b):
    assert levenshtein(a, b) == edit_distance_oracle(a, b)


@given(_short, _short, _short)
def test_normalized_levenshtein_properties(a, b, c):
    assert normalized_levenshtein(a, b) == normalized_levenshtein(b, a)
    assert (normalized_levenshtein(a, b) == 1.0) == (a == b)
    # triangle inequality on the raw distance
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)
    scale = max(len(a), len(b), len(c), 1)
    bound = levenshtein(b, c) / scale
    lhs = abs(levenshtein(a, c) - levenshtein(a, b)) / scale
    assert lhs <= bound + 1e-12


def test_name_similarity_normalizes_separators():
    assert name_similarity("my-pkg", "My_Pkg") == 1.0
    assert name_similarity("acme", "acme") == 1.0


@pytest.mark.parametrize(
    "version, tags, expected",
    [("1.2.1", ["v1.2.1"], 1), ("1.2.1", [], 0), ("1.2", ["v1.2.1"], 0), ("1.2.1", ["1.2.1"], 1),
     ("1.0", ["V1.0"], 1), ("1.0a", ["v1.0A"], 0)],
)
def test_tag_alignment(version, tags, expected):
    assert tag_alignment(version, tags) == expected


def test_extract_features_clean_link():
    files = {"cleantool/__init__.py": b"x = 1\n", "setup.py": b"setup()\n"}
    inventory = SdistInventory.from_files("cleantool", "1.0.0", files)
    hashes = {git_blob_sha1(d) for d in files.values()}
    fv = extract_features(inventory, hashes, ["v1.0.0"], "cleantool", "cleantool", MaintainerInfo(1, 1))
    assert fv == FeatureVector(0, 0, 1, 1.0, 1, 1)


def test_extract_features_template_link():
    files = {"wrongpkg/core.py": b"print(1)\n", "setup.py": b"setup(name='wrongpkg')\n"}
    inventory = SdistInventory.from_files("wrongpkg", "0.3", files)
    sample = {git_blob_sha1(b"def main():\n    pass\n"), git_blob_sha1(b"setup(name='sample')\n")}
    fv = extract_features(inventory, sample, ["1.2.0"], "wrongpkg", "sampleproject")
    assert fv.phantom_pyfiles > 0 and fv.pkg_spec_change == 1 and fv.name_similarity < 0.5
    assert fv.maintainers is None and np.isnan(fv.as_array()[4])


@pytest.mark.parametrize(
    "scores, labels, expected",
    [([0.9, 0.1], [1, 0], 1.0), ([0.4, 0.4, 0.4], [1, 0, 1], 0.5), ([0.3, 0.7], [1, 0], 0.0)],
)
def test_auc_examples(scores, labels, expected):
    assert auc(scores, labels) == expected


def test_auc_single_class():
    with pytest.raises(SingleClass):
        auc([0.1, 0.2], [0, 0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 200))
def test_auc_matches_pairwise_oracle(seed, n):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, n)
    labels[:2] = [0, 1]
    scores = rng.integers(0, 10, n) / 10.0  # plenty of ties
    assert abs(auc(scores, labels) - pairwise_auc_oracle(scores, labels)) <= 1e-12


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_auc_invariant_under_monotone_transform(seed):
    rng = np.random.default_rng(seed)
    labels = np.array([0, 1] + list(rng.integers(0, 2, 40)))
    scores = rng.normal(size=len(labels))
    assert auc(np.exp(3 * scores) + 7, labels) == auc(scores, labels)


def test_tree_records_round_trip():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 6))
    y = (X[:, 0] + X[:, 3] > 0).astype(int)
    tree = GiniTree(max_features=3).fit(X, y, rng)
    clone = GiniTree.from_records(tree.to_records())
    np.testing.assert_array_equal(tree.vote(X), clone.vote(X))
    assert (tree.vote(X) == y).all()  # unlimited depth, leaf minimum 1


def test_forest_vote_fraction():
    X = np.array([[0.0] * 6, [1.0] * 6])
    y = np.array([0, 1])
    forest = RandomForestClassifier(n_estimators=100, random_state=3).fit(X, y)
    proba = forest.predict_proba(X)[:, 1]
    votes = np.mean([tree.vote(X) for tree in forest.estimators_], axis=0)
    np.testing.assert_array_equal(proba, votes)
    assert set(np.round(proba * 100)).issubset(set(range(101)))
    forest.estimators_ = forest.estimators_[:2]
    assert set(forest.predict_proba(X)[:, 1]) <= {0.0, 0.5, 1.0}


def test_two_point_separable():
    X = np.array([[0, 0, 1, 1.0, 1, 1], [3, 1, 0, 0.1, 1, 9]], dtype=float)
    y = np.array([0, 1])
    for kind in ("random_forest", "logistic"):
        model = LinkValidator(kind=kind, random_state=0).fit(X, y)
        assert (model.predict(X) == y).all()


def test_single_class_rejected():
    X = np.zeros((4, 6))
    with pytest.raises(DegenerateDataset):
        LinkValidator().fit(X, np.zeros(4))
    with pytest.raises(DegenerateDataset):
        train((X, np.ones(4)))


def test_determinism_and_probability_range():
    links = synthetic_links(80, 20, seed=5)
    probe = synthetic_links(10, 10, seed=6)
    from repolink.validator import to_matrix

    Xp, _ = to_matrix(probe)
    a = train(links, seed=11, grid=False).predict_proba(Xp)
    b = train(links, seed=11, grid=False).predict_proba(Xp)
    np.testing.assert_array_equal(a, b)
    assert ((a >= 0) & (a <= 1)).all()
    np.testing.assert_allclose(a.sum(axis=1), 1.0)


def test_imputation_uses_training_median():
    X = np.array([[0, 0, 1, 1.0, 2, 4], [1, 1, 0, 0.2, np.nan, np.nan], [0, 0, 1, 0.9, 4, 8]])
    model = LinkValidator(n_estimators=5).fit(X, [0, 1, 0])
    np.testing.assert_allclose(model.impute_values_[4:], [3.0, 6.0])


def test_oversample_balances_classes():
    y = np.array([0] * 9 + [1] * 3)
    idx = oversample(y, np.random.default_rng(0))
    counts = np.bincount(y[idx])
    assert counts[0] == counts[1] == 9
    assert set(idx[12:]) <= {9, 10, 11}


def test_oversampling_does_not_touch_held_out_rows():
    links = synthetic_links(120, 30, seed=2)
    result = evaluate_holdout(links, seed=4, grid=False, importance_repeats=0)
    assert set(result.train_index).isdisjoint(result.test_index)
    used = set(result.train_index[result.model.sample_indices_])
    assert used <= set(result.train_index)
    assert used.isdisjoint(result.test_index)
    assert len(result.model.sample_indices_) > len(result.train_index)


def test_clean_training_point_scores_low():
    links = synthetic_links(200, 50, seed=9)
    model = train(links, seed=0, grid=False)
    clean = FeatureVector(0, 0, 1, 1.0, 1, 1)
    assert model.incorrect_probability(clean) < 0.5


@pytest.mark.parametrize("kind", ["random_forest", "logistic"])
def test_model_save_load_round_trip(tmp_path, kind):
    links = synthetic_links(60, 20, seed=3)
    model = train(links, kind=kind, seed=1, grid=False)
    path = tmp_path / "model.txt"
    model.save(path)
    text = path.read_text()
    assert text.startswith("repolink-validator-model 1\nkind " + kind)
    assert "features " + ",".join(FEATURE_NAMES) in text
    loaded = LinkValidator.load(path)
    from repolink.validator import to_matrix

    X, _ = to_matrix(synthetic_links(20, 20, seed=4))
    np.testing.assert_array_equal(model.predict_proba(X), loaded.predict_proba(X))
    assert loaded.get_params() == model.get_params()


def test_bad_model_file(tmp_path):
    path = tmp_path / "m"
    path.write_text("not a model\n")
    with pytest.raises(ModelFormatError):
        LinkValidator.load(path)
    path.write_text("repolink-validator-model 1\nkind random_forest\n")
    with pytest.raises(ModelFormatError):
        LinkValidator.load(path)


def test_logistic_baseline_learns():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(300, 6))
    y = (2 * X[:, 3] - X[:, 0] > 0).astype(int)
    model = LogisticRegressionGD().fit(X, y)
    assert auc(model.predict_proba(X)[:, 1], y) > 0.97
    assert model.coef_[3] > 0 > model.coef_[0]


def test_dataset_csv_round_trip(tmp_path):
    links = [LabeledLink(FeatureVector(2, 1, 0, 0.25, None, 3), 1), LabeledLink(FeatureVector(0, 0, 1, 1.0, 1, 1), 0)]
    path = tmp_path / "links.csv"
    write_dataset(links, path)
    assert read_dataset(path) == links


def test_grid_search_picks_from_documented_grid():
    model = train(synthetic_links(90, 30, seed=8), seed=0, grid=True)
    assert model.n_estimators in (50, 100, 200) and model.min_samples_leaf in (1, 5)
