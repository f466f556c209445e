"""Release-level defect prediction dataset export.

One row per measurable file present at a release commit. Feature columns
come from that commit's metric records plus history aggregates over a
trailing window; the bug label assigns an issue to a file when an
inducing change touched the file's lineage at or before the release and
the corresponding fix landed within the label window after it.
"""

from __future__ import annotations

import csv
from pathlib import Path

from . import gitio, metrics, vcs
from .errors import MinehubError, NotFoundError, StageFailedError, UnknownRevisionError
from .labels import REFACTORING_KEYWORDS, has_keyword
from .linking import _is_bug_issue
from .schema import doc_id
from .store import Store
from .times import shift_days

METRIC_FEATURES = ("blank", "cloc", "lloc", "total_lines")
HISTORY_FEATURES = (
    "authors_count",
    "commit_count",
    "lines_added_sum",
    "lines_deleted_sum",
    "refactoring_keyword_commit_count",
)
FEATURE_NAMES = tuple(sorted(METRIC_FEATURES + HISTORY_FEATURES))


def _find_release(store: Store, project_id: str, revision: str):
    """Resolve a hash or tag to a stored commit of one of the project's
    repositories."""
    systems = store.query("vcs_system", {"project_id": project_id})
    for system in systems:
        match = store.get_by_key("commit", vcs_system_id=system["id"],
                                 revision_hash=revision)
        if match is not None:
            return system, match
    # not a stored hash: maybe a tag or abbreviation the repo can resolve
    for system in systems:
        try:
            repo = vcs.repo_path_for(store, system["id"])
            resolved = gitio.resolve_revision(repo, revision)
        except MinehubError:
            continue
        match = store.get_by_key("commit", vcs_system_id=system["id"],
                                 revision_hash=resolved)
        if match is not None:
            return system, match
    raise UnknownRevisionError(f"release revision {revision!r} is not harvested")


def _ancestor_hashes(commits_by_hash: dict[str, dict], release_hash: str) -> set[str]:
    seen = set()
    frontier = [release_hash]
    while frontier:
        h = frontier.pop()
        if h in seen or h not in commits_by_hash:
            continue
        seen.add(h)
        frontier.extend(commits_by_hash[h]["parent_hashes"])
    return seen


def _identity_map(store: Store) -> dict[str, str]:
    rep = {}
    for component in store.query("identity"):
        ids = component["person_ids"]
        for pid in ids:
            rep[pid] = ids[0]
    return rep


def export_release(
    store: Store,
    project: str,
    release_revision: str,
    out_path: str | Path,
    *,
    history_window_days: int = 180,
    label_window_days: int = 180,
    validated_only: bool = False,
    clones_dir: Path | None = None,
) -> dict:
    project_doc = store.get_by_key("project", name=project)
    if project_doc is None:
        raise NotFoundError(f"no project named {project!r}")
    if store.count("commit_issue_link") == 0 and store.count("inducing_link") == 0:
        raise StageFailedError(
            "no links or inducing links stored; run the link and induce stages first")

    system, release = _find_release(store, project_doc["id"], release_revision)
    repo = vcs.repo_path_for(store, system["id"], clones_dir)
    release_date = release["committer_date"]
    history_start = shift_days(release_date, -history_window_days)
    label_end = shift_days(release_date, label_window_days)

    commits_by_hash = {c["revision_hash"]: c
                       for c in store.query("commit", {"vcs_system_id": system["id"]})}
    ancestors = _ancestor_hashes(commits_by_hash, release["revision_hash"])
    # newest first so rename lineage grows as the walk moves into the past
    ordered = sorted((commits_by_hash[h] for h in ancestors),
                     key=lambda c: (c["committer_date"], c["revision_hash"]),
                     reverse=True)
    actions_by_commit = {}
    for action in store.query("file_action"):
        actions_by_commit.setdefault(action["commit_id"], []).append(action)
    identity_of = _identity_map(store)

    inducing_entries = _inducing_index(store, validated_only)

    rows = []
    for path, _blob in metrics.eligible_tree_entries(repo, release["revision_hash"]):
        file_id = doc_id("file", {"vcs_system_id": system["id"], "path": path})
        lineage = {file_id}
        touches = []  # (commit, action) pairs, any age
        for commit in ordered:
            for action in actions_by_commit.get(commit["id"], ()):
                if action["file_id"] not in lineage:
                    continue
                touches.append((commit, action))
                if action["mode"] == "R" and action["old_file_id"]:
                    lineage.add(action["old_file_id"])

        features = dict.fromkeys(FEATURE_NAMES, 0)
        record = store.get_by_key("metric_record", commit_id=release["id"], file_id=file_id)
        if record is not None:
            for name in METRIC_FEATURES:
                features[name] = record["metrics"].get(name, 0)

        windowed = [(c, a) for c, a in touches
                    if history_start <= c["committer_date"] <= release_date]
        commits_seen = {c["revision_hash"] for c, _ in windowed}
        features["commit_count"] = len(commits_seen)
        features["authors_count"] = len({
            identity_of.get(c["author_person_id"], c["author_person_id"])
            for c, _ in windowed})
        features["lines_added_sum"] = sum(a["lines_added"] for _, a in windowed)
        features["lines_deleted_sum"] = sum(a["lines_deleted"] for _, a in windowed)
        features["refactoring_keyword_commit_count"] = len({
            c["revision_hash"] for c, _ in windowed
            if has_keyword(c["message"], REFACTORING_KEYWORDS)})

        issue_ids = set()
        for entry in inducing_entries:
            if entry["inducing_file_id"] not in lineage:
                continue
            if entry["inducing_hash"] not in ancestors:
                continue
            if entry["inducing_date"] > release_date:
                continue
            if not release_date < entry["fix_date"] <= label_end:
                continue
            issue_ids.update(entry["issue_external_ids"])

        rows.append({
            "path": path,
            "features": features,
            "bug_issue_ids": sorted(issue_ids),
        })

    rows.sort(key=lambda r: r["path"])
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    columns = ["path", *FEATURE_NAMES, "bug_count", "bug_issue_ids"]
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([
                row["path"],
                *[row["features"][name] for name in FEATURE_NAMES],
                len(row["bug_issue_ids"]),
                ";".join(row["bug_issue_ids"]),
            ])
    return {"path": str(out_path), "rows": len(rows), "columns": columns}


def _inducing_index(store: Store, validated_only: bool) -> list[dict]:
    """Flatten inducing links into the fields the row loop filters on.
    Only label=inducing entries participate; suspects and filtered
    candidates never produce bug labels."""
    issues = {i["id"]: i for i in store.query("issue")}
    links_by_commit: dict[str, list[dict]] = {}
    for link in store.query("commit_issue_link"):
        links_by_commit.setdefault(link["commit_id"], []).append(link)

    entries = []
    for ind in store.query("inducing_link", {"label": "inducing"}):
        fix_commit = store.get("commit", ind["fix_commit_id"])
        inducing_commit = store.get("commit", ind["inducing_commit_id"])
        inducing_action = store.get("file_action", ind["inducing_file_action_id"])
        if fix_commit is None or inducing_commit is None or inducing_action is None:
            continue
        external_ids = set()
        for link in links_by_commit.get(fix_commit["id"], ()):
            issue = issues.get(link["issue_id"])
            if issue is None:
                continue
            if validated_only:
                if link["verdict"] != "valid" or issue["issue_type_validated"] != "bug":
                    continue
            else:
                if link["verdict"] == "invalid" or not _is_bug_issue(issue):
                    continue
            external_ids.add(issue["external_id"])
        if not external_ids:
            continue
        entries.append({
            "inducing_file_id": inducing_action["file_id"],
            "inducing_hash": inducing_commit["revision_hash"],
            "inducing_date": inducing_commit["committer_date"],
            "fix_date": fix_commit["committer_date"],
            "issue_external_ids": sorted(external_ids),
        })
    return entries
