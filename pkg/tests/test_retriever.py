import pytest
from hypothesis import given, strategies as st

from corpus import build_desk_corpus
from repolink.index import CorpusManifest, ProvenanceIndex, build_index
from repolink.retriever import (
    RetrieverParams,
    get_candidates,
    get_most_probable,
    load_labeled_corpus,
    select_most_probable,
    sweep,
    sweep_csv,
)
from repolink.errors import EmptyCandidates, NoPythonFiles
from repolink.sdist import SdistInventory, git_blob_sha1


def inv(package, files):
    return SdistInventory.from_files(package, "1.0", files)


def make_index(blob_repos, forks=None):
    """Index where blob b<i> was first committed in commit c<i> held by the given repos."""
    blob2commit, commit2repos = {}, {}
    for i, (content, repos) in enumerate(blob_repos):
        commit = f"{i:040x}"
        blob2commit[git_blob_sha1(content)] = commit
        commit2repos[commit] = repos
    return ProvenanceIndex(blob2commit, commit2repos, forks or {})


def test_three_unique_files():
    index = make_index([(b"1", ["R"]), (b"2", ["R"]), (b"3", ["R"])])
    assert get_candidates(inv("r", {"a.py": b"1", "b.py": b"2", "c.py": b"3"}), index).ranked == [("R", 3)]


def test_split_ranking_and_non_python_ignored():
    index = make_index([(b"1", ["R"]), (b"2", ["R"]), (b"3", ["S"]), (b"4", ["T"])])
    files = {"a.py": b"1", "b.py": b"2", "c.py": b"3", "README": b"4"}
    assert get_candidates(inv("r", files), index).ranked == [("R", 2), ("S", 1)]


def test_blob_uniqueness_threshold():
    popular = [f"repo{i:03d}" for i in range(600)]
    index = make_index([(b"common", popular), (b"own", ["R"])])
    files = {"six.py": b"common", "r.py": b"own"}
    assert get_candidates(inv("r", files), index, blob_uniqueness=500).ranked == [("R", 1)]
    assert len(get_candidates(inv("r", files), index, blob_uniqueness=600).ranked) == 601


def test_duplicate_digest_credited_once():
    index = make_index([(b"1", ["R"]), (b"2", ["S"])])
    files = {"a.py": b"1", "copy/a.py": b"1", "b.py": b"2"}
    assert get_candidates(inv("r", files), index).ranked == [("R", 1), ("S", 1)]


def test_errors():
    index = make_index([(b"1", ["R"])])
    with pytest.raises(NoPythonFiles):
        get_candidates(inv("r", {"README": b"1"}), index)
    with pytest.raises(EmptyCandidates):
        get_candidates(inv("r", {"a.py": b"unknown"}), index)
    assert get_most_probable(inv("r", {"a.py": b"unknown"}), index).reason == "empty_candidates"
    assert get_most_probable(inv("r", {"README": b"x"}), index).reason == "no_python_files"


def test_defork_collapse():
    index = make_index([(b"1", ["github/acme/tool", "github/fork/tool"]), (b"2", ["github/fork/tool"])],
                       forks={"github/fork/tool": "github/acme/tool"})
    result = get_most_probable(inv("tool", {"a.py": b"1", "b.py": b"2"}), index)
    assert result.repo_id == "github/acme/tool"


def test_most_common_root_beats_single_large_candidate():
    # B (8 files) alone vs three forks of A (5 files each) inside the top 5
    index = make_index(
        [(bytes([i]), ["B"]) for i in range(8)]
        + [(bytes([100 + i]), ["A1", "A2", "A3"]) for i in range(5)],
        forks={"A1": "A", "A2": "A", "A3": "A"},
    )
    files = {f"f{i}.py": bytes([i]) for i in range(8)}
    files.update({f"g{i}.py": bytes([100 + i]) for i in range(5)})
    cands = get_candidates(inv("a", files), index)
    assert cands.ranked[0] == ("B", 8)
    assert select_most_probable(cands, index, topn=5) == "A"
    assert select_most_probable(cands, index, topn=1) == "B"


def test_name_gate():
    index = make_index([(b"1", ["https://github.com/x/xyzlib"])])
    result = get_most_probable(inv("totally-different", {"a.py": b"1"}), index)
    assert result.repo_id is None and result.reason == "name_similarity_gate"
    assert result.best == "https://github.com/x/xyzlib"
    relaxed = get_most_probable(inv("totally-different", {"a.py": b"1"}), index, RetrieverParams(name_similarity=0.0))
    assert relaxed.repo_id == "https://github.com/x/xyzlib"


@pytest.mark.parametrize("kwargs", [{"blob_uniqueness": 0}, {"topn": 0}, {"name_similarity": 1.5}])
def test_params_validated(kwargs):
    with pytest.raises(ValueError):
        RetrieverParams(**kwargs)


@given(st.lists(st.floats(0, 1), min_size=2, max_size=5))
def test_gate_monotone(thresholds):
    index = make_index([(b"1", ["https://github.com/o/mytool"]), (b"2", ["https://github.com/o/other-thing"])])
    inventories = [inv("mytool", {"a.py": b"1"}), inv("my-tool-x", {"a.py": b"1"}), inv("zzz", {"a.py": b"2"})]
    answered = []
    for t in sorted(thresholds):
        answered.append({i for i, v in enumerate(inventories)
                         if get_most_probable(v, index, RetrieverParams(name_similarity=t)).repo_id})
    for wider, narrower in zip(answered, answered[1:]):
        assert narrower <= wider


@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk")
    corpus = build_desk_corpus(root)
    build_index(CorpusManifest.load(corpus.manifest), root / "idx")
    return corpus, ProvenanceIndex.load(root / "idx")


def test_self_retrieval_on_desk_corpus(desk):
    corpus, index = desk
    for case in load_labeled_corpus(corpus.labels):
        result = get_most_probable(case.inventory, index, RetrieverParams(name_similarity=0.0), case.package)
        assert result.repo_id == index.defork(case.expected)


def test_mytool_end_to_end(desk):
    corpus, index = desk
    case = next(c for c in load_labeled_corpus(corpus.labels) if c.package == "mytool")
    assert get_most_probable(case.inventory, index).repo_id == "https://github.com/acme/mytool"


def test_sweep_csv_shape(desk):
    corpus, index = desk
    rows = sweep(load_labeled_corpus(corpus.labels), index)
    text = sweep_csv(rows)
    lines = text.splitlines()
    assert lines[0] == "threshold,coverage,accuracy" and len(lines) == 12
    assert lines[1].startswith("0.0,1.000000,")
    coverage = [r.coverage for r in rows]
    assert coverage == sorted(coverage, reverse=True)
