"""Commit-issue linking and inducing-change detection.

The inducing fixture constructs one candidate of every label and checks
the result against the scripted timeline; ancestry is verified with an
independent rev-list oracle.
"""

from __future__ import annotations

import json

import pytest

from conftest import SZZ_ISSUES, jira_payload
from minehub import Store, linking, tracker, vcs

PROJECT = "calcproj"


def write_ndjson(path, payloads):
    path.write_text("\n".join(json.dumps(p) for p in payloads) + "\n", encoding="utf-8")


def setup_szz(tmp_path, szz_repo, issues=None):
    store = Store(tmp_path / "data")
    vcs.harvest_vcs(store, PROJECT, str(szz_repo.path))
    fixture = tmp_path / "issues.ndjson"
    write_ndjson(fixture, issues if issues is not None else SZZ_ISSUES)
    tracker.harvest_issues(store, PROJECT, "jira", fixture=fixture)
    return store


def by_message(store):
    return {c["message"].strip(): c for c in store.query("commit")}


# --- linking -----------------------------------------------------------------

def test_multi_key_message_creates_two_links(tmp_path, szz_repo):
    issues = SZZ_ISSUES + [
        jira_payload("JCALC-9", summary="second defect",
                     created="2023-01-21T00:00:00Z", updated="2023-04-02T00:00:00Z"),
    ]
    szz_repo.write("extra.java", "class Extra {\n}\n")
    szz_repo.commit("Fixed JCALC-7 and JCALC-9.", date="2023-04-07T10:00:00Z")
    store = setup_szz(tmp_path, szz_repo, issues)

    summary = linking.link_commits_to_issues(store, PROJECT)
    double = by_message(store)["Fixed JCALC-7 and JCALC-9."]
    links = store.query("commit_issue_link", {"commit_id": double["id"]})
    assert len(links) == 2
    assert {l["approach"] for l in links} == {"id_pattern"}
    assert all(l["syntactic_confidence"] == 2 for l in links)
    assert summary["by_approach"]["id_pattern"] >= 2


def test_unknown_key_prefix_and_unresolvable_id_are_skipped(tmp_path, szz_repo):
    szz_repo.write("extra.java", "class Extra {\n}\n")
    szz_repo.commit("Fixed OTHER-1 and JCALC-999.", date="2023-04-07T10:00:00Z")
    store = setup_szz(tmp_path, szz_repo)
    linking.link_commits_to_issues(store, PROJECT)
    commit = by_message(store)["Fixed OTHER-1 and JCALC-999."]
    assert store.query("commit_issue_link", {"commit_id": commit["id"]}) == []


def test_empty_message_yields_no_links(tmp_path, szz_repo):
    store = setup_szz(tmp_path, szz_repo)
    linking.link_commits_to_issues(store, PROJECT)
    for name in ("Add logging", "Note audit", "Spacing"):
        commit = by_message(store)[name]
        assert store.query("commit_issue_link", {"commit_id": commit["id"]}) == []


def github_issue_payloads():
    return [
        {"number": 12, "title": "crash when saving", "body": "boom",
         "state": "closed", "state_reason": "completed", "labels": [{"name": "bug"}],
         "user": {"login": "u1"}, "assignee": None,
         "created_at": "2021-01-01T00:00:00Z", "updated_at": "2021-06-01T00:00:00Z"},
        {"number": 34, "title": "polish docs", "body": "", "state": "open",
         "labels": [], "user": {"login": "u1"}, "assignee": None,
         "created_at": "2021-01-02T00:00:00Z", "updated_at": "2021-06-01T00:00:00Z"},
    ]


def github_store(tmp_path, messages):
    from conftest import GitRepo

    repo = GitRepo(tmp_path / "ghrepo")
    store = Store(tmp_path / "data")
    for i, message in enumerate(messages):
        repo.write(f"f{i}.txt", f"content {i}\n")
        repo.commit(message, date=f"2021-05-0{i + 1}T10:00:00Z")
    vcs.harvest_vcs(store, PROJECT, str(repo.path))
    fixture = tmp_path / "gh.ndjson"
    write_ndjson(fixture, github_issue_payloads())
    tracker.harvest_issues(store, PROJECT, "github", fixture=fixture)
    return store


def test_github_hash_reference(tmp_path):
    store = github_store(tmp_path, ["Fixes #12", "Unrelated work"])
    summary = linking.link_commits_to_issues(store, PROJECT)
    assert summary["links_created"] == 1
    link = store.query("commit_issue_link")[0]
    assert link["approach"] == "id_pattern"
    assert link["syntactic_confidence"] == 2
    issue = store.get("issue", link["issue_id"])
    assert issue["external_id"] == "12"


def test_bare_number_needs_bugfix_keyword(tmp_path):
    store = github_store(tmp_path, ["Fix 12 for good", "Update 12"])
    linking.link_commits_to_issues(store, PROJECT)
    linked = {
        store.get("commit", l["commit_id"])["message"].strip(): l
        for l in store.query("commit_issue_link")
    }
    assert set(linked) == {"Fix 12 for good"}
    assert linked["Fix 12 for good"]["approach"] == "szz_heuristic"


def test_semantic_scoring_components():
    commit = {
        "author_person_id": "p1",
        "committer_date": "2021-05-01T10:00:00Z",
        "message": "fix crash when saving profile",
    }
    issue = {
        "title": "crash when saving",
        "resolution": "Fixed",
        "assignee_person_id": "p1",
        "created_at": "2021-01-01T00:00:00Z",
        "updated_at": "2021-06-01T00:00:00Z",
    }
    assert linking.semantic_confidence(commit, issue, {}) == 4

    assert linking.semantic_confidence(commit, dict(issue, resolution=None), {}) == 3
    assert linking.semantic_confidence(commit, dict(issue, assignee_person_id="p2"), {}) == 3
    # identity merging can still grant the assignee point
    assert linking.semantic_confidence(
        commit, dict(issue, assignee_person_id="p2"), {"p1": 0, "p2": 0}
    ) == 4
    assert linking.semantic_confidence(commit, dict(issue, title="entirely different words"), {}) == 3
    late = dict(commit, committer_date="2021-07-01T00:00:00Z")  # > updated + 7d
    assert linking.semantic_confidence(late, issue, {}) == 3
    early = dict(commit, committer_date="2020-12-31T00:00:00Z")  # before created
    assert linking.semantic_confidence(early, issue, {}) == 3


def test_relink_preserves_validation(tmp_path, szz_repo):
    store = setup_szz(tmp_path, szz_repo)
    linking.link_commits_to_issues(store, PROJECT)
    link = store.query("commit_issue_link")[0]
    store.upsert("commit_issue_link", dict(
        link, verdict="valid", validator="vera", validated_at="2023-05-01T00:00:00Z",
    ), allow_protected=True)

    linking.link_commits_to_issues(store, PROJECT)
    again = store.get("commit_issue_link", link["id"])
    assert again["verdict"] == "valid"
    assert again["validator"] == "vera"


def test_linking_is_idempotent(tmp_path, szz_repo):
    store = setup_szz(tmp_path, szz_repo)
    linking.link_commits_to_issues(store, PROJECT)
    fp = store.domain_fingerprint()
    summary = linking.link_commits_to_issues(store, PROJECT)
    assert store.domain_fingerprint() == fp
    assert summary["links_created"] == store.count("commit_issue_link")


# --- inducing detection ------------------------------------------------------

def ancestors_of(repo, sha: str) -> set[str]:
    return set(repo.git("rev-list", sha).split())


@pytest.fixture
def induced(tmp_path, szz_repo):
    store = setup_szz(tmp_path, szz_repo)
    linking.link_commits_to_issues(store, PROJECT)
    summary = linking.detect_inducing(store, PROJECT)
    return store, szz_repo, summary


def test_one_candidate_of_each_label(induced):
    store, repo, summary = induced
    assert summary == {"inducing_links": 1, "suspects": 1, "filtered": 2}

    commits = {c["id"]: c for c in store.query("commit")}
    labels = {
        commits[l["inducing_commit_id"]]["message"].strip(): l["label"]
        for l in store.query("inducing_link")
    }
    assert labels == {
        "Add calculator": "inducing",
        "Add logging": "suspect",
        "Note audit": "filtered_comment",
        "Spacing": "filtered_whitespace",
    }


def test_blamed_lines_point_into_origin_versions(induced):
    store, repo, _ = induced
    commits = {c["id"]: c for c in store.query("commit")}
    by_label = {l["label"]: l for l in store.query("inducing_link")}
    # the faulty return sits on line 3 of the original calculator version
    assert by_label["inducing"]["blamed_lines"] == [3]
    assert by_label["suspect"]["blamed_lines"] == [3]
    assert by_label["filtered_comment"]["blamed_lines"] == [2]
    assert by_label["filtered_whitespace"]["blamed_lines"] == [2]
    for link in store.query("inducing_link"):
        assert commits[link["fix_commit_id"]]["message"].startswith("Fixed JCALC-7")


def test_ancestry_and_temporal_invariants(induced):
    store, repo, _ = induced
    commits = {c["id"]: c for c in store.query("commit")}
    for link in store.query("inducing_link"):
        fix = commits[link["fix_commit_id"]]
        inducing = commits[link["inducing_commit_id"]]
        assert inducing["revision_hash"] in ancestors_of(repo, fix["revision_hash"])
        assert inducing["committer_date"] <= fix["committer_date"]


def test_pure_addition_fix_has_no_candidates(induced):
    store, repo, _ = induced
    add_fix = by_message(store)["Fixed JCALC-8: guard input"]
    assert store.query("inducing_link", {"fix_commit_id": add_fix["id"]}) == []


def test_min_confidence_monotonicity(tmp_path, szz_repo):
    # reference without any bugfix keyword scores syntactic 1
    szz_repo.write("calc.java", "class Calc {\n    int total() {\n        return 3;\n    }\n}\n")
    szz_repo.commit("JCALC-7 adjustment", date="2023-04-09T10:00:00Z")
    store_low = setup_szz(tmp_path, szz_repo)
    linking.link_commits_to_issues(store_low, PROJECT)
    linking.detect_inducing(store_low, PROJECT, min_confidence=1)
    fixes_low = {l["fix_commit_id"] for l in store_low.query("inducing_link")}

    store_high = Store(tmp_path / "data_high")
    vcs.harvest_vcs(store_high, PROJECT, str(szz_repo.path))
    fixture = tmp_path / "issues2.ndjson"
    write_ndjson(fixture, SZZ_ISSUES)
    tracker.harvest_issues(store_high, PROJECT, "jira", fixture=fixture)
    linking.link_commits_to_issues(store_high, PROJECT)
    linking.detect_inducing(store_high, PROJECT, min_confidence=2)
    fixes_high = {l["fix_commit_id"] for l in store_high.query("inducing_link")}

    assert fixes_high <= fixes_low
    assert len(fixes_low) == 2 and len(fixes_high) == 1


def test_require_validated_gates_everything_unvalidated(tmp_path, szz_repo):
    store = setup_szz(tmp_path, szz_repo)
    linking.link_commits_to_issues(store, PROJECT)
    summary = linking.detect_inducing(store, PROJECT, require_validated=True)
    assert summary == {"inducing_links": 0, "suspects": 0, "filtered": 0}

    link = next(
        l for l in store.query("commit_issue_link")
        if store.get("issue", l["issue_id"])["external_id"] == "JCALC-7"
    )
    store.upsert("commit_issue_link", dict(
        link, verdict="valid", validator="vera", validated_at="2023-05-01T00:00:00Z",
    ), allow_protected=True)
    summary = linking.detect_inducing(store, PROJECT, require_validated=True)
    assert summary["inducing_links"] == 1


def test_validated_issue_type_dominates(tmp_path, szz_repo):
    issues = [
        jira_payload("JCALC-7", summary="total is wrong",
                     created="2023-01-20T00:00:00Z", updated="2023-04-02T00:00:00Z",
                     issue_type="Task"),
        SZZ_ISSUES[1],
    ]
    store = setup_szz(tmp_path, szz_repo, issues)
    linking.link_commits_to_issues(store, PROJECT)
    assert linking.detect_inducing(store, PROJECT)["inducing_links"] == 0

    issue = next(i for i in store.query("issue") if i["external_id"] == "JCALC-7")
    store.upsert("issue", dict(issue, issue_type_validated="bug"), allow_protected=True)
    assert linking.detect_inducing(store, PROJECT)["inducing_links"] == 1


def test_detect_inducing_is_idempotent(induced):
    store, repo, _ = induced
    fp = store.domain_fingerprint()
    linking.detect_inducing(store, PROJECT)
    assert store.domain_fingerprint() == fp
