import re

import pytest
from hypothesis import given, strategies as st

from repolink.errors import Gone
from repolink.metadata import (
    MappingPageFetcher,
    MappingResolver,
    OfflineResolver,
    RepoUrl,
    RetrievalOutcome,
    extract_badge_repo_urls,
    extract_repo_urls,
    name_match,
    resolve_redirect,
    retrieve_from_metadata,
)
from repolink.registry import MetadataDoc


def coords(urls):
    return [(u.platform, u.owner, u.name) for u in urls]


def tokenizer_oracle(text):
    """Independent extraction: split on whitespace and quotes, then parse each token by hand."""
    hosts = {"github.com": "github", "gitlab.com": "gitlab", "bitbucket.org": "bitbucket"}
    found = []
    for token in re.split(r"[\s\"'<>()\[\]]+", text):
        for prefix in ("git+", "git@"):
            if token.startswith(prefix):
                token = token[len(prefix):]
        token = token.split("://", 1)[-1]
        token = token.split("#", 1)[0].split("?", 1)[0]
        head, _, rest = token.replace(":", "/", 1).partition("/") if token.lower().startswith(
            tuple(hosts)) and ":" in token.split("/", 1)[0] else token.partition("/")
        host = head.lower()
        if host.startswith("www."):
            host = host[4:]
        if host not in hosts:
            continue
        parts = [p for p in rest.split("/") if p]
        if len(parts) < 2:
            continue
        owner, name = parts[0], ""
        for ch in parts[1]:
            if not (ch.isascii() and (ch.isalnum() or ch in "_.-")):
                break
            name += ch
        name = name.rstrip(".")
        name = name[:-4] if name.lower().endswith(".git") else name
        item = (hosts[host], owner, name)
        if item not in found:
            found.append(item)
    return found


@pytest.mark.parametrize(
    "text, expected",
    [
        ("see https://github.com/numpy/numpy for code", [("github", "numpy", "numpy")]),
        ("git+https://gitlab.com/Owner/Proj.git#egg=proj", [("gitlab", "Owner", "Proj")]),
        ("https://example.com/github.com-mirror", []),
        ("https://notgithub.com/a/b", []),
        ("git@github.com:acme/tool.git", [("github", "acme", "tool")]),
        ("https://GitHub.com/a/b/tree/main/docs?x=1 https://github.com/a/b", [("github", "a", "b")]),
        ("https://bitbucket.org/team/repo/src", [("bitbucket", "team", "repo")]),
        ("", []),
    ],
)
def test_extract_examples(text, expected):
    assert coords(extract_repo_urls(text)) == expected


CORPUS = [
    "Source at https://github.com/pallets/flask, docs elsewhere.",
    "pip install git+https://gitlab.com/Owner/Proj.git#egg=proj",
    "mirror: https://bitbucket.org/team/repo and https://github.com/x/y.git",
    "clone git@github.com:acme/tool.git then https://www.github.com/acme/tool2",
    "https://github.com/a/b?tab=readme https://github.com/a/b#x",
    "nothing to see here",
]


@pytest.mark.parametrize("text", CORPUS)
def test_extract_agrees_with_tokenizer_oracle(text):
    assert coords(extract_repo_urls(text)) == tokenizer_oracle(text)


def test_canonical_form():
    url = extract_repo_urls("HTTPS://GITHUB.COM/Owner/Name.git")[0]
    assert url.canonical == "https://github.com/Owner/Name"


_noise = st.text(alphabet=st.characters(blacklist_characters="/:@.", blacklist_categories=("Cs",)),
                 max_size=40).map(lambda s: " " + s)


@given(_noise)
def test_extract_invariant_under_appended_text(noise):
    text = "code: https://github.com/acme/tool and https://gitlab.com/g/p"
    assert coords(extract_repo_urls(text + noise)) == coords(extract_repo_urls(text))


@pytest.mark.parametrize(
    "description, fmt, expected",
    [
        ("[![CI](https://img.shields.io/github/stars/acme/tool)](x)", "markdown", [("github", "acme", "tool")]),
        ("[![CI](https://img.shields.io/badge/build-ok-green)](https://github.com/acme/tool)", "markdown",
         [("github", "acme", "tool")]),
        ("plain text with no badges", "plain", []),
        (".. image:: https://img.shields.io/badge/x-y-z\n   :target: https://github.com/r/s\n", "rst",
         [("github", "r", "s")]),
    ],
)
def test_badges(description, fmt, expected):
    assert coords(extract_badge_repo_urls(description, fmt)) == expected


def test_redirects():
    resolver = MappingResolver({"https://github.com/acme/old": "https://github.com/acme/new"},
                               gone=["acme/deleted"])
    moved, redirected = resolve_redirect(RepoUrl("github", "acme", "old"), resolver)
    assert (moved.owner, moved.name, redirected) == ("acme", "new", True)
    with pytest.raises(Gone):
        resolve_redirect(RepoUrl("github", "acme", "deleted"), resolver)


@given(st.from_regex(r"[A-Za-z0-9_-]{1,12}", fullmatch=True), st.from_regex(r"[A-Za-z0-9_.-]{1,12}", fullmatch=True))
def test_offline_redirect_is_identity(owner, name):
    url = RepoUrl("github", owner, name)
    assert resolve_redirect(url, OfflineResolver()) == (url, False)


@pytest.mark.parametrize(
    "package, repo, expected",
    [("my-pkg", "my_pkg", True), ("requests", "requests", True), ("requests", "request", False)],
)
def test_name_match(package, repo, expected):
    assert name_match(package, RepoUrl("github", "o", repo)) is expected


_names = st.from_regex(r"[A-Za-z0-9][A-Za-z0-9._-]{0,10}", fullmatch=True)


@given(_names, _names)
def test_name_match_symmetric(a, b):
    assert name_match(a, RepoUrl("github", "o", b)) == name_match(b, RepoUrl("github", "o", a))


def _doc(**kw):
    return MetadataDoc(name=kw.pop("name", "acme-pkg"), version="1.0", **kw)


def test_stage1_project_urls():
    outcome = retrieve_from_metadata(_doc(project_urls={"Homepage": "https://github.com/a/b"}))
    assert (outcome.url.slug, outcome.source_field) == ("a/b", "project_urls")


def test_stage1_has_no_name_gate_and_wins():
    doc = _doc(home_page="https://github.com/pypa/sampleproject",
               description="[![b](https://img.shields.io/github/stars/acme/acmepkg)](x)")
    outcome = retrieve_from_metadata(doc)
    assert (outcome.url.slug, outcome.source_field) == ("pypa/sampleproject", "url")


def test_stage1_order():
    doc = _doc(download_url="https://github.com/d/l",
               project_urls={"Src": "https://github.com/p/u"})
    assert retrieve_from_metadata(doc).source_field == "download_url"
    assert retrieve_from_metadata(doc).candidates == ["https://github.com/d/l", "https://github.com/p/u"]


def test_stage2_badge():
    doc = _doc(description="[![x](https://img.shields.io/github/stars/acme/acmepkg)](x)",
               description_format="markdown")
    outcome = retrieve_from_metadata(doc)
    assert (outcome.url.slug, outcome.source_field) == ("acme/acmepkg", "badge")


def test_stage2_description_needs_name_match():
    doc = _doc(description="based on https://github.com/other/thing, code at https://github.com/acme/acme_pkg")
    outcome = retrieve_from_metadata(doc)
    assert (outcome.url.slug, outcome.source_field) == ("acme/acme_pkg", "description")


def test_stage3_docs_scrape():
    doc = _doc(project_urls={"Documentation": "https://acme-pkg.readthedocs.io"})
    pages = MappingPageFetcher({"https://acme-pkg.readthedocs.io": "<a href='https://github.com/acme/acme-pkg'>"})
    outcome = retrieve_from_metadata(doc, OfflineResolver(), pages)
    assert (outcome.url.slug, outcome.source_field) == ("acme/acme-pkg", "docpage")


def test_scrape_failure_downgrades():
    doc = _doc(home_page="https://acme.example.org")
    outcome = retrieve_from_metadata(doc, OfflineResolver(), MappingPageFetcher({}))
    assert outcome == RetrievalOutcome()


def test_gone_candidate_skipped_and_redirect_recorded():
    doc = _doc(home_page="https://github.com/acme/deleted", project_urls={"Code": "https://github.com/acme/old"})
    resolver = MappingResolver({"acme/old": "https://github.com/acme/new"}, gone=["https://github.com/acme/deleted"])
    outcome = retrieve_from_metadata(doc, resolver)
    assert (outcome.url.slug, outcome.source_field, outcome.redirected) == ("acme/new", "project_urls", True)


def test_no_repo_anywhere():
    outcome = retrieve_from_metadata(_doc(description="just words"))
    assert outcome.url is None and outcome.source_field == "none"


def test_outcome_invariant_and_round_trip():
    with pytest.raises(ValueError):
        RetrievalOutcome(None, "url")
    outcome = RetrievalOutcome(RepoUrl("gitlab", "g", "p", "raw"), "badge", True, ["c"])
    assert RetrievalOutcome.from_dict(outcome.to_dict()) == outcome
