"""Identity merging and commit labeling."""

from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import SZZ_ISSUES, GitRepo
from minehub import Store, identity, labels, linking, tracker, vcs

PROJECT = "calcproj"


# --- identity merging --------------------------------------------------------

def persons(*specs):
    return [{"id": f"p{i}", "name": name, "email": email}
            for i, (name, email) in enumerate(specs)]


def test_same_email_merges():
    comps = identity.merge_components(persons(
        ("J. Smith", "jsmith@x.org"),
        ("John Smith", "jsmith@x.org"),
    ))
    assert comps == [["p0", "p1"]]


def test_normalized_name_merges_two_token_names():
    comps = identity.merge_components(persons(
        ("John Smith", "john@a.com"),
        ("john  smith", "js@b.com"),
        ("José García", "jg@x.com"),
        ("Jose Garcia", "jga@y.com"),
    ))
    assert comps == [["p0", "p1"], ["p2", "p3"]]


def test_single_token_names_never_merge_by_name():
    comps = identity.merge_components(persons(
        ("admin", "a@x.com"),
        ("admin", "b@y.com"),
    ))
    assert comps == [["p0"], ["p1"]]


def test_long_local_part_merges():
    comps = identity.merge_components(persons(
        ("Jane", "jane.doe@a.com"),
        ("J Doe", "jane.doe@b.org"),
    ))
    assert comps == [["p0", "p1"]]


def test_short_local_part_does_not_merge():
    comps = identity.merge_components(persons(
        ("Dev One", "dev@a.com"),
        ("Dev Two", "dev@b.com"),
    ))
    assert comps == [["p0"], ["p1"]]


def test_empty_email_is_never_rule_one():
    comps = identity.merge_components(persons(
        ("ghost", ""),
        ("shadow", ""),
    ))
    assert comps == [["p0"], ["p1"]]


def test_transitive_closure():
    # p0~p1 by email, p1~p2 by name, so all three belong together
    comps = identity.merge_components(persons(
        ("A One", "shared@x.com"),
        ("Bea Two", "shared@x.com"),
        ("bea two", "other@y.com"),
    ))
    assert comps == [["p0", "p1", "p2"]]


@given(st.permutations(list(range(6))))
def test_partition_is_order_independent(order):
    base = persons(
        ("John Smith", "jsmith@x.org"),
        ("J. Smith", "jsmith@x.org"),
        ("john smith", "elsewhere@y.org"),
        ("Someone Else", "someone.else@z.org"),
        ("S Else", "someone.else@w.org"),
        ("Loner", "lone@q.org"),
    )
    shuffled = [base[i] for i in order]
    comps = identity.merge_components(shuffled)
    assert comps == [["p0", "p1", "p2"], ["p3", "p4"], ["p5"]]
    # partition: disjoint cover of every person
    flat = [pid for comp in comps for pid in comp]
    assert sorted(flat) == sorted(p["id"] for p in base)


def test_merge_identities_replaces_stale_components(tmp_path):
    store = Store(tmp_path / "data")
    a = store.upsert("person", {"name": "Ada L", "email": "ada@one.org"})
    b = store.upsert("person", {"name": "Grace H", "email": "grace@two.org"})
    identity.merge_identities(store, PROJECT)
    assert store.count("identity") == 2  # singletons cover everyone

    # a bridge person shares ada's email and grace's normalized name
    store.upsert("person", {"name": "grace  h", "email": "ada@one.org"})
    summary = identity.merge_identities(store, PROJECT)
    assert summary == {"persons": 3, "identities": 1}
    assert store.count("identity") == 1
    merged = store.query("identity")[0]
    assert set(merged["person_ids"]) >= {a, b}

    # idempotent
    identity.merge_identities(store, PROJECT)
    assert store.count("identity") == 1


# --- commit labels -----------------------------------------------------------

MAIN_V1 = (
    "public class Main {\n"
    "    // TODO handle nulls\n"
    "    public static void main(String[] args) {\n"
    "        run();\n"
    "    }\n"
    "}\n"
)
MAIN_V2 = MAIN_V1.replace("// TODO handle nulls", "// nulls handled upstream")
MAIN_V3 = MAIN_V2.replace("run();", "run(0);")


@pytest.fixture
def labeled_store(tmp_path):
    repo = GitRepo(tmp_path / "repo")
    repo.write("docs/guide.md", "# guide\n\nusage text\n")
    repo.commit("Write the guide", date="2024-01-01T10:00:00Z")
    repo.write("src/Main.java", MAIN_V1)
    repo.commit("Add main entry point", date="2024-01-02T10:00:00Z")
    repo.write("src/Main.java", MAIN_V2)
    repo.commit("Reword null note", date="2024-01-03T10:00:00Z")
    repo.write("src/Main.java", MAIN_V3)
    repo.commit("Cleanup run loop", date="2024-01-04T10:00:00Z")
    repo.write("src/Strings.java",
               'public class Strings {\n    String s = "TODO later";\n}\n')
    repo.commit("Add strings holder", date="2024-01-05T10:00:00Z")

    store = Store(tmp_path / "data")
    vcs.harvest_vcs(store, PROJECT, str(repo.path))
    return store


def label_map(store):
    return {c["message"].strip(): c["labels"] for c in store.query("commit")}


def test_label_vocabulary(labeled_store):
    counts = labels.label_commits(labeled_store, PROJECT)
    got = label_map(labeled_store)

    assert got["Write the guide"]["documentation"] is True
    assert got["Add main entry point"]["documentation"] is False
    assert got["Add main entry point"]["satd_added"] is True

    # only a comment line changed: documentation, and the TODO went away
    assert got["Reword null note"]["documentation"] is True
    assert got["Reword null note"]["satd_removed"] is True
    assert got["Reword null note"]["satd_added"] is False

    assert got["Cleanup run loop"]["refactoring_keyword"] is True
    assert got["Cleanup run loop"]["documentation"] is False

    # SATD text inside a string literal is not a comment
    assert got["Add strings holder"]["satd_added"] is False

    assert counts["documentation"] == 2
    assert counts["satd_added"] == 1
    assert counts["satd_removed"] == 1
    assert counts["bugfix"] == 0


def test_refactoring_keyword_boundaries():
    assert labels.has_keyword("clean up the loop", labels.REFACTORING_KEYWORDS)
    assert labels.has_keyword("Refactor parser", labels.REFACTORING_KEYWORDS)
    assert labels.has_keyword("big cleanup", labels.REFACTORING_KEYWORDS)
    assert not labels.has_keyword("renamed variable", labels.REFACTORING_KEYWORDS)
    assert not labels.has_keyword("cleanups galore", labels.REFACTORING_KEYWORDS)


def test_documentation_path_rule():
    assert labels.is_documentation_path("docs/guide.md")
    assert labels.is_documentation_path("doc/api.adoc")
    assert labels.is_documentation_path("notes.txt")
    assert labels.is_documentation_path("manual.rst")
    assert not labels.is_documentation_path("src/main.py")
    assert not labels.is_documentation_path("dockerfiles/build.sh")


def test_bugfix_label_follows_links(tmp_path, szz_repo):
    store = Store(tmp_path / "data")
    vcs.harvest_vcs(store, PROJECT, str(szz_repo.path))
    fixture = tmp_path / "issues.ndjson"
    fixture.write_text("\n".join(json.dumps(p) for p in SZZ_ISSUES) + "\n")
    tracker.harvest_issues(store, PROJECT, "jira", fixture=fixture)
    linking.link_commits_to_issues(store, PROJECT)

    counts = labels.label_commits(store, PROJECT)
    got = label_map(store)
    assert got["Fixed JCALC-7: correct total"]["bugfix"] is True
    assert got["Fixed JCALC-8: guard input"]["bugfix"] is True
    assert got["Add calculator"]["bugfix"] is False
    assert counts["bugfix"] == 2


def test_labeling_is_deterministic(labeled_store):
    labels.label_commits(labeled_store, PROJECT)
    first = label_map(labeled_store)
    fp = labeled_store.domain_fingerprint()
    labels.label_commits(labeled_store, PROJECT)
    assert label_map(labeled_store) == first
    assert labeled_store.domain_fingerprint() == fp


def test_satd_patterns_are_monotone(labeled_store):
    base = labels.label_commits(labeled_store, PROJECT)
    extended = labels.label_commits(
        labeled_store, PROJECT,
        satd_patterns=labels.SATD_PATTERNS + ("nulls handled",),
    )
    assert extended["satd_added"] >= base["satd_added"]
    assert extended["satd_added"] == base["satd_added"] + 1  # the reworded note now matches