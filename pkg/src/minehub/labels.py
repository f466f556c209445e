"""Commit labeling: bugfix, refactoring keywords, documentation, SATD.

Labels derive from stored documents only (links, actions, hunks), never
from the repository, so labeling works on an archived store. Changed
lines are classified by running the line scanner over each hunk body;
block-comment state is tracked within a hunk, so a hunk that begins
inside an unseen block comment can under-report comment lines.
"""

from __future__ import annotations

import re

from .linking import link_passes_gate
from .metrics import classify_lines, language_for
from .store import Store

REFACTORING_KEYWORDS = ("refactor", "refactoring", "restructure", "cleanup", "clean up", "rename")
SATD_PATTERNS = ("TODO", "FIXME", "HACK", "XXX", "workaround", "temporary fix")
DOC_EXTENSIONS = (".md", ".txt", ".rst", ".adoc")
DOC_SEGMENTS = ("docs", "doc")

LABEL_NAMES = ("bugfix", "refactoring_keyword", "documentation", "satd_added", "satd_removed")


def has_keyword(message: str, keywords) -> bool:
    lowered = message.lower()
    return any(re.search(rf"\b{re.escape(k)}\b", lowered) for k in keywords)


def is_documentation_path(path: str) -> bool:
    lowered = path.lower()
    if lowered.endswith(DOC_EXTENSIONS):
        return True
    return any(segment in DOC_SEGMENTS for segment in lowered.split("/")[:-1])


def changed_line_kinds(hunk: dict, language: str) -> tuple[list[tuple[str, str]], list[tuple[str, str]]]:
    """(added, deleted) lists of (text, kind) for the hunk's changed lines.

    Each side of the hunk is reconstructed (context plus its own lines)
    and classified as a unit so multi-line comments inside the hunk keep
    their state."""
    old_side: list[str] = []
    new_side: list[str] = []
    deleted_pos: list[int] = []
    added_pos: list[int] = []
    for raw in hunk["content"].splitlines():
        if raw.startswith("-"):
            deleted_pos.append(len(old_side))
            old_side.append(raw[1:])
        elif raw.startswith("+"):
            added_pos.append(len(new_side))
            new_side.append(raw[1:])
        elif raw.startswith("\\"):
            continue
        else:
            old_side.append(raw[1:] if raw.startswith(" ") else raw)
            new_side.append(raw[1:] if raw.startswith(" ") else raw)
    old_kinds = classify_lines("\n".join(old_side), language)
    new_kinds = classify_lines("\n".join(new_side), language)
    added = [(new_side[i], new_kinds[i]) for i in added_pos]
    deleted = [(old_side[i], old_kinds[i]) for i in deleted_pos]
    return added, deleted


def _matches_satd(text: str, patterns) -> bool:
    for pattern in patterns:
        if re.search(rf"\b{re.escape(pattern)}\b", text, re.IGNORECASE):
            return True
    return False


def label_commits(
    store: Store,
    project: str,
    *,
    refactoring_keywords=REFACTORING_KEYWORDS,
    satd_patterns=SATD_PATTERNS,
    min_confidence: int = 2,
) -> dict:
    """Recompute the five managed labels for every commit of the project.

    bugfix: a gate-passing link to a bug-typed issue exists. documentation:
    every changed file is a documentation path or had only comment lines
    changed. satd_added/removed: an added/removed comment line matches an
    SATD pattern."""
    from .linking import _is_bug_issue, _project_id

    project_id = _project_id(store, project)
    issues = {i["id"]: i for i in store.query("issue")}
    bugfix_commits = set()
    for link in store.query("commit_issue_link"):
        if link_passes_gate(link, min_confidence=min_confidence, require_validated=False) \
                and _is_bug_issue(issues[link["issue_id"]]):
            bugfix_commits.add(link["commit_id"])

    counts = {name: 0 for name in LABEL_NAMES}
    for vcs in store.query("vcs_system", {"project_id": project_id}):
        for commit in store.query("commit", {"vcs_system_id": vcs["id"]}):
            actions = store.query("file_action", {"commit_id": commit["id"]})
            all_documentation = bool(actions)
            satd_added = satd_removed = False
            for action in actions:
                path = store.get("file", action["file_id"])["path"]
                language = language_for(path)
                hunks = store.query("hunk", {"file_action_id": action["id"]})
                action_all_comment = not action["is_binary"]
                saw_changed_line = False
                for hunk in hunks:
                    added, deleted = changed_line_kinds(hunk, language)
                    for text, kind in added + deleted:
                        saw_changed_line = True
                        if kind != "comment":
                            action_all_comment = False
                    for text, kind in added:
                        if kind == "comment" and _matches_satd(text, satd_patterns):
                            satd_added = True
                    for text, kind in deleted:
                        if kind == "comment" and _matches_satd(text, satd_patterns):
                            satd_removed = True
                if not is_documentation_path(path) and not (saw_changed_line and action_all_comment):
                    all_documentation = False

            labels = dict(commit["labels"])
            labels.update({
                "bugfix": commit["id"] in bugfix_commits,
                "refactoring_keyword": has_keyword(commit["message"], refactoring_keywords),
                "documentation": all_documentation,
                "satd_added": satd_added,
                "satd_removed": satd_removed,
            })
            if labels != commit["labels"]:
                store.update("commit", commit["id"], {"labels": labels})
            for name in LABEL_NAMES:
                if labels[name]:
                    counts[name] += 1
    return counts
