"""Commit-to-issue linking and bug-inducing change detection.

Linking finds issue references in commit messages (Jira keys gated on
the tracker's known project keys, GitHub #N references, and a guarded
bare-number heuristic) and scores each link twice: syntactically from
the message alone, semantically from agreement between commit and issue
metadata.

Inducing detection blames every line a qualifying bugfix deleted, at
the fix's first parent. A blamed commit whose lines are all whitespace
or all comments is filtered; one committed after the bug was reported
cannot have caused it and is only a suspect; the rest are inducing.
"""

from __future__ import annotations

import logging
import re
from pathlib import Path

from . import gitio
from .metrics import classify_lines, language_for
from .store import Store
from .times import shift_days
from .vcs import repo_path_for

log = logging.getLogger(__name__)

BUGFIX_KEYWORDS = ("fix", "fixes", "fixed", "bug", "defect", "fault", "patch")
REFERENCE_WINDOW_DAYS = 7

JIRA_KEY = re.compile(r"\b([A-Z][A-Z0-9]+-\d+)\b")
GITHUB_REF = re.compile(r"#(\d+)\b")
BARE_NUMBER = re.compile(r"(?<![#\w])(\d+)\b")


def has_bugfix_keyword(message: str, keywords=BUGFIX_KEYWORDS) -> bool:
    lowered = message.lower()
    return any(re.search(rf"\b{re.escape(k)}\b", lowered) for k in keywords)


def _tokens(text: str) -> set[str]:
    return set(re.findall(r"[a-z0-9]+", text.lower()))


def _identity_index(store: Store) -> dict[str, int]:
    """person_id -> identity component number (singletons absent)."""
    index = {}
    for i, identity in enumerate(store.query("identity")):
        for pid in identity["person_ids"]:
            index[pid] = i
    return index


def _project_id(store: Store, project: str) -> str:
    doc = store.get_by_key("project", name=project)
    if doc is None:
        from .errors import NotFoundError

        raise NotFoundError(f"no project named {project!r}")
    return doc["id"]


def semantic_confidence(commit: dict, issue: dict, identity_of: dict[str, int]) -> int:
    score = 0
    if (issue.get("resolution") or "").lower() == "fixed":
        score += 1
    author = commit["author_person_id"]
    assignee = issue.get("assignee_person_id")
    if assignee is not None:
        same_identity = (
            identity_of.get(author) is not None
            and identity_of.get(author) == identity_of.get(assignee)
        )
        if author == assignee or same_identity:
            score += 1
    title_tokens = _tokens(issue["title"])
    if title_tokens and title_tokens <= _tokens(commit["message"]):
        score += 1
    if issue["created_at"] <= commit["committer_date"] <= shift_days(
        issue["updated_at"], REFERENCE_WINDOW_DAYS
    ):
        score += 1
    return score


def _issue_lookup(store: Store, project_id: str):
    """Per tracker type: maps from reference token to issue doc, plus the
    set of Jira project keys actually present (gate for key matching)."""
    jira: dict[str, dict] = {}
    github: dict[str, dict] = {}
    jira_keys: set[str] = set()
    for system in store.query("issue_system", {"project_id": project_id}):
        for issue in store.query("issue", {"issue_system_id": system["id"]}):
            if system["tracker_type"] == "jira":
                jira[issue["external_id"]] = issue
                prefix = issue["external_id"].rsplit("-", 1)[0]
                jira_keys.add(prefix)
            else:
                github[issue["external_id"]] = issue
    return jira, github, jira_keys


def link_commits_to_issues(store: Store, project: str, *, keywords=BUGFIX_KEYWORDS) -> dict:
    project_id = _project_id(store, project)
    jira, github, jira_keys = _issue_lookup(store, project_id)
    identity_of = _identity_index(store)

    created = 0
    by_approach = {"id_pattern": 0, "szz_heuristic": 0}
    for vcs in store.query("vcs_system", {"project_id": project_id}):
        for commit in store.query("commit", {"vcs_system_id": vcs["id"]}):
            message = commit["message"]
            keyword_hit = has_bugfix_keyword(message, keywords)
            candidates: dict[str, tuple[dict, str]] = {}  # issue id -> (issue, approach)

            for key in JIRA_KEY.findall(message):
                prefix = key.rsplit("-", 1)[0]
                if prefix not in jira_keys:
                    continue
                issue = jira.get(key)
                if issue is None:
                    log.info("unresolvable issue reference %s in %s", key, commit["revision_hash"])
                    continue
                candidates[issue["id"]] = (issue, "id_pattern")

            for number in GITHUB_REF.findall(message):
                issue = github.get(number)
                if issue is None:
                    log.info("unresolvable issue reference #%s in %s", number, commit["revision_hash"])
                    continue
                candidates[issue["id"]] = (issue, "id_pattern")

            if keyword_hit:
                # bare numbers are weak evidence; only admitted alongside a
                # bugfix keyword, and only for number-keyed trackers
                for number in BARE_NUMBER.findall(message):
                    issue = github.get(number)
                    if issue is not None and issue["id"] not in candidates:
                        candidates[issue["id"]] = (issue, "szz_heuristic")

            for issue, approach in candidates.values():
                syntactic = 1 + (1 if keyword_hit else 0)
                store.upsert("commit_issue_link", {
                    "commit_id": commit["id"],
                    "issue_id": issue["id"],
                    "approach": approach,
                    "syntactic_confidence": syntactic,
                    "semantic_confidence": semantic_confidence(commit, issue, identity_of),
                    "verdict": "unvalidated",
                    "validator": None,
                    "validated_at": None,
                })
                created += 1
                by_approach[approach] += 1
    return {"links_created": created, "by_approach": by_approach}


def _is_bug_issue(issue: dict) -> bool:
    effective = issue.get("issue_type_validated") or issue.get("issue_type") or ""
    return effective.lower() == "bug"


def link_passes_gate(link: dict, *, min_confidence: int, require_validated: bool) -> bool:
    if link["verdict"] == "valid":
        return True
    if require_validated:
        return False
    return link["verdict"] == "unvalidated" and link["syntactic_confidence"] >= min_confidence


def _deleted_lines(hunk: dict):
    """(old line number, text) for every '-' line of the hunk."""
    old_no = hunk["old_start"]
    for line in hunk["content"].splitlines():
        if line.startswith("-"):
            yield old_no, line[1:]
            old_no += 1
        elif line.startswith("+") or line.startswith("\\"):
            continue
        else:
            old_no += 1


def detect_inducing(
    store: Store,
    project: str,
    *,
    min_confidence: int = 2,
    require_validated: bool = False,
    clones_dir: Path | None = None,
) -> dict:
    project_id = _project_id(store, project)
    issues = {i["id"]: i for i in store.query("issue")}
    links_by_commit: dict[str, list[dict]] = {}
    for link in store.query("commit_issue_link"):
        if link["verdict"] == "invalid":
            continue
        links_by_commit.setdefault(link["commit_id"], []).append(link)

    summary = {"inducing_links": 0, "suspects": 0, "filtered": 0}
    for vcs in store.query("vcs_system", {"project_id": project_id}):
        repo = repo_path_for(store, vcs["id"], clones_dir)
        for commit in store.query("commit", {"vcs_system_id": vcs["id"]}):
            bug_issues = [
                issues[link["issue_id"]]
                for link in links_by_commit.get(commit["id"], [])
                if link_passes_gate(link, min_confidence=min_confidence,
                                    require_validated=require_validated)
                and _is_bug_issue(issues[link["issue_id"]])
            ]
            if not bug_issues or not commit["parent_hashes"] or commit["is_merge"]:
                continue
            cutoff = min(issue["created_at"] for issue in bug_issues)
            _induce_for_fix(store, repo, vcs["id"], commit, cutoff, summary)
    return summary


def _induce_for_fix(store: Store, repo: Path, vcs_id: str, fix: dict,
                    cutoff: str, summary: dict):
    from .schema import doc_id

    parent = fix["parent_hashes"][0]
    # blamed line groups: (origin hash, origin path) -> [line numbers]
    # flags per origin hash: all whitespace / all whitespace-or-comment
    groups: dict[str, dict] = {}
    for action in store.query("file_action", {"commit_id": fix["id"]}):
        hunks = store.query("hunk", {"file_action_id": action["id"]})
        dels = [pair for hunk in hunks for pair in _deleted_lines(hunk)]
        if not dels:
            continue  # pure addition: nothing to blame
        old_file_id = action["old_file_id"] or action["file_id"]
        old_path = store.get("file", old_file_id)["path"]
        try:
            blame = gitio.blame_file(repo, parent, old_path)
            old_content = gitio.run_git(
                ["cat-file", "blob", f"{parent}:{old_path}"], repo
            ).decode("utf-8", errors="replace")
        except Exception as exc:
            log.warning("blame failed for %s at %s^: %s", old_path, fix["revision_hash"], exc)
            continue
        kinds = classify_lines(old_content, language_for(old_path))
        for line_no, text in dels:
            if line_no not in blame:
                log.warning("blame has no line %d for %s", line_no, old_path)
                continue
            origin_sha, origin_line, origin_path = blame[line_no]
            is_ws = not text.strip()
            is_comment = line_no - 1 < len(kinds) and kinds[line_no - 1] == "comment"
            group = groups.setdefault(origin_sha, {
                "paths": {}, "all_ws": True, "all_ws_or_comment": True,
            })
            group["paths"].setdefault((origin_path, action["id"]), []).append(origin_line)
            group["all_ws"] = group["all_ws"] and is_ws
            group["all_ws_or_comment"] = group["all_ws_or_comment"] and (is_ws or is_comment)

    for origin_sha, group in sorted(groups.items()):
        inducing = store.get_by_key("commit", vcs_system_id=vcs_id, revision_hash=origin_sha)
        if inducing is None:
            log.warning("blamed commit %s is not harvested; skipping", origin_sha)
            continue
        if inducing["committer_date"] > fix["committer_date"]:
            # clock skew would break the temporal invariant; drop the candidate
            log.warning("dropping candidate %s: committed after its fix", origin_sha)
            continue
        if group["all_ws"]:
            label = "filtered_whitespace"
        elif group["all_ws_or_comment"]:
            label = "filtered_comment"
        elif inducing["committer_date"] > cutoff:
            label = "suspect"
        else:
            label = "inducing"

        for (origin_path, fix_action_id), lines in sorted(group["paths"].items()):
            file_id = doc_id("file", {"vcs_system_id": vcs_id, "path": origin_path})
            inducing_action = store.get_by_key(
                "file_action", commit_id=inducing["id"], file_id=file_id
            )
            if inducing_action is None:
                log.warning("no stored action for %s in %s", origin_path, origin_sha)
                continue
            store.upsert("inducing_link", {
                "fix_commit_id": fix["id"],
                "inducing_commit_id": inducing["id"],
                "fix_file_action_id": fix_action_id,
                "inducing_file_action_id": inducing_action["id"],
                "blamed_lines": sorted(set(lines)),
                "label": label,
            })
            if label == "inducing":
                summary["inducing_links"] += 1
            elif label == "suspect":
                summary["suspects"] += 1
            else:
                summary["filtered"] += 1
