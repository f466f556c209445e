"""Issue tracker ingestion: Jira and GitHub, live REST or offline fixtures.

Everything is harmonized into the Jira-shaped issue schema. For GitHub
that means the first post's body becomes the description and follow-up
posts become comments. Fixture files are line-delimited tracker-native
payloads; GitHub fixtures may embed follow-up posts under a
"comments_data" key since the real API serves them from a separate
endpoint.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import (
    MalformedPayloadError,
    RateLimitExhaustedError,
    TrackerAuthError,
)
from .store import Store
from .times import canonical
from .vcs import ensure_project

log = logging.getLogger(__name__)

# label-name table for deriving a type from GitHub labels; unmatched -> "other"
GITHUB_LABEL_TYPES = {
    "bug": "bug",
    "enhancement": "improvement",
    "question": "question",
}

# closed GitHub issues get a Jira-shaped resolution
GITHUB_RESOLUTIONS = {
    "completed": "Fixed",
    "not_planned": "Won't Fix",
}

PAGE_SIZE = 100
MAX_ATTEMPTS = 5
BACKOFF_BASE_SECONDS = 2.0


@dataclass
class MappedComment:
    author: tuple[str, str]  # (name, email)
    created_at: str
    body: str


@dataclass
class MappedIssue:
    external_id: str
    title: str
    description: str
    issue_type: str
    priority: str | None
    status: str | None
    resolution: str | None
    reporter: tuple[str, str] | None
    assignee: tuple[str, str] | None
    created_at: str
    updated_at: str
    affected_versions: list[str] = field(default_factory=list)
    fixed_versions: list[str] = field(default_factory=list)
    comments: list[MappedComment] = field(default_factory=list)


def _jira_person(blob) -> tuple[str, str] | None:
    if not isinstance(blob, dict):
        return None
    name = blob.get("displayName") or blob.get("name") or blob.get("accountId")
    if not name:
        return None
    return (name, blob.get("emailAddress") or "")


def _github_person(blob) -> tuple[str, str] | None:
    if not isinstance(blob, dict):
        return None
    login = blob.get("login")
    return (login, "") if login else None


def _required(value, what: str):
    if value is None or value == "":
        raise MalformedPayloadError(f"payload missing {what}")
    return value


def map_issue(raw: dict, tracker_type: str) -> MappedIssue | None:
    """Pure payload-to-harmonized mapping. Returns None for payloads that
    are not issues (GitHub pull requests)."""
    if tracker_type == "jira":
        return _map_jira(raw)
    if tracker_type == "github":
        return _map_github(raw)
    raise MalformedPayloadError(f"unknown tracker type {tracker_type!r}")


def _map_jira(raw: dict) -> MappedIssue:
    fields = raw.get("fields")
    if not isinstance(fields, dict):
        raise MalformedPayloadError("jira payload has no fields object")
    key = _required(raw.get("key"), "issue key")
    title = _required(fields.get("summary"), "summary")
    created = canonical(_required(fields.get("created"), "created date"))
    updated = canonical(fields.get("updated") or fields.get("created"))

    def name_of(blob):
        return blob.get("name") if isinstance(blob, dict) else None

    comments = []
    for c in (fields.get("comment") or {}).get("comments", []):
        author = _jira_person(c.get("author")) or ("unknown", "")
        comments.append(MappedComment(
            author=author,
            created_at=canonical(c.get("created") or fields["created"]),
            body=c.get("body") or "",
        ))
    return MappedIssue(
        external_id=key,
        title=title,
        description=fields.get("description") or "",
        issue_type=name_of(fields.get("issuetype")) or "other",
        priority=name_of(fields.get("priority")),
        status=name_of(fields.get("status")),
        resolution=name_of(fields.get("resolution")),
        reporter=_jira_person(fields.get("reporter")),
        assignee=_jira_person(fields.get("assignee")),
        created_at=created,
        updated_at=max(updated, created),
        affected_versions=[v["name"] for v in fields.get("versions") or [] if "name" in v],
        fixed_versions=[v["name"] for v in fields.get("fixVersions") or [] if "name" in v],
        comments=comments,
    )


def _map_github(raw: dict) -> MappedIssue | None:
    if raw.get("pull_request") is not None:
        return None  # interleaved PR payload, not an issue
    number = _required(raw.get("number"), "issue number")
    title = _required(raw.get("title"), "title")
    created = canonical(_required(raw.get("created_at"), "created date"))
    updated = canonical(raw.get("updated_at") or raw["created_at"])

    issue_type = "other"
    for label in raw.get("labels") or []:
        name = label.get("name", "").lower() if isinstance(label, dict) else str(label).lower()
        if name in GITHUB_LABEL_TYPES:
            issue_type = GITHUB_LABEL_TYPES[name]
            break

    resolution = None
    if raw.get("state") == "closed":
        resolution = GITHUB_RESOLUTIONS.get(raw.get("state_reason") or "completed")

    comments = []
    for c in raw.get("comments_data") or []:
        author = _github_person(c.get("user")) or ("unknown", "")
        comments.append(MappedComment(
            author=author,
            created_at=canonical(c.get("created_at") or raw["created_at"]),
            body=c.get("body") or "",
        ))
    return MappedIssue(
        external_id=str(number),
        title=title,
        description=raw.get("body") or "",
        issue_type=issue_type,
        priority=None,  # GitHub has no priority field; absent, not ""
        status=raw.get("state"),
        resolution=resolution,
        reporter=_github_person(raw.get("user")),
        assignee=_github_person(raw.get("assignee")),
        created_at=created,
        updated_at=max(updated, created),
        comments=comments,
    )


def ensure_issue_system(store: Store, project_id: str, url: str, tracker_type: str) -> str:
    existing = store.get_by_key("issue_system", project_id=project_id, url=url)
    return store.upsert("issue_system", {
        "project_id": project_id,
        "url": url,
        "tracker_type": tracker_type,
        "watermark": existing["watermark"] if existing else None,
    })


def _store_mapped(store: Store, system_id: str, mapped: MappedIssue) -> int:
    def person_id(spec):
        if spec is None:
            return None
        return store.upsert("person", {"name": spec[0], "email": spec[1]})

    issue_id = store.upsert("issue", {
        "issue_system_id": system_id,
        "external_id": mapped.external_id,
        "title": mapped.title,
        "description": mapped.description,
        "issue_type": mapped.issue_type,
        "issue_type_validated": None,
        "priority": mapped.priority,
        "status": mapped.status,
        "resolution": mapped.resolution,
        "reporter_person_id": person_id(mapped.reporter),
        "assignee_person_id": person_id(mapped.assignee),
        "created_at": mapped.created_at,
        "updated_at": mapped.updated_at,
        "affected_versions": mapped.affected_versions,
        "fixed_versions": mapped.fixed_versions,
        "had_encoding_errors": False,
    })
    ordered = sorted(
        enumerate(mapped.comments), key=lambda pair: (pair[1].created_at, pair[0])
    )
    for ordinal, (_, comment) in enumerate(ordered):
        store.upsert("issue_comment", {
            "issue_id": issue_id,
            "ordinal": ordinal,
            "author_person_id": person_id(comment.author),
            "created_at": comment.created_at,
            "body": comment.body,
        })
    return len(ordered)


def harvest_issues(
    store: Store,
    project: str,
    tracker_type: str,
    *,
    url: str | None = None,
    fixture: str | Path | None = None,
    token: str | None = None,
    session: requests.Session | None = None,
) -> dict:
    """Ingest issues into the harmonized schema.

    Exactly one of url (live REST) or fixture (offline NDJSON) is the
    payload source. Live harvesting resumes from the stored watermark and
    leaves a resumable watermark behind if the rate limit runs out.
    """
    if (url is None) == (fixture is None):
        raise MalformedPayloadError("need exactly one of url or fixture")
    project_id = ensure_project(store, project)
    system_url = url if url is not None else f"fixture://{project}/{tracker_type}"
    system_id = ensure_issue_system(store, project_id, system_url, tracker_type)

    if fixture is not None:
        payloads = _iter_fixture(Path(fixture))
    else:
        watermark = store.get("issue_system", system_id)["watermark"]
        payloads = _iter_live(url, tracker_type, token, watermark, session or requests.Session())

    issues = comments = skipped = 0
    max_updated = store.get("issue_system", system_id)["watermark"]
    try:
        for raw in payloads:
            try:
                mapped = map_issue(raw, tracker_type)
            except MalformedPayloadError as exc:
                log.warning("skipping malformed payload: %s", exc)
                skipped += 1
                continue
            if mapped is None:
                continue
            comments += _store_mapped(store, system_id, mapped)
            issues += 1
            if max_updated is None or mapped.updated_at > max_updated:
                max_updated = mapped.updated_at
    except RateLimitExhaustedError as exc:
        _advance_watermark(store, system_id, max_updated)
        exc.watermark = max_updated
        raise
    _advance_watermark(store, system_id, max_updated)
    return {"issues_stored": issues, "comments_stored": comments, "skipped_malformed": skipped}


def _advance_watermark(store: Store, system_id: str, value: str | None):
    if value is not None and store.get("issue_system", system_id)["watermark"] != value:
        store.update("issue_system", system_id, {"watermark": value})


def _iter_fixture(path: Path):
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                parsed = json.loads(line)
            except json.JSONDecodeError as exc:
                log.warning("fixture line %d is not valid JSON: %s", line_no, exc)
                parsed = None
            # non-objects map as malformed and are counted by the caller
            yield parsed if isinstance(parsed, dict) else {}


def _iter_live(url: str, tracker_type: str, token: str | None,
               watermark: str | None, session: requests.Session):
    if tracker_type == "github":
        yield from _iter_github(url, token, watermark, session)
    elif tracker_type == "jira":
        yield from _iter_jira(url, token, watermark, session)
    else:
        raise MalformedPayloadError(f"unknown tracker type {tracker_type!r}")


def _request(session: requests.Session, url: str, params: dict, headers: dict):
    """GET with auth/rate-limit/backoff handling shared by both trackers."""
    for attempt in range(MAX_ATTEMPTS):
        resp = session.get(url, params=params, headers=headers, timeout=30)
        if resp.status_code == 401:
            raise TrackerAuthError(f"authentication rejected by {url}")
        if resp.status_code in (403, 429):
            remaining = resp.headers.get("X-RateLimit-Remaining")
            retry_after = resp.headers.get("Retry-After")
            if remaining == "0" or retry_after is not None:
                if attempt == MAX_ATTEMPTS - 1:
                    raise RateLimitExhaustedError(f"rate limit exhausted at {url}")
                delay = float(retry_after) if retry_after else _reset_delay(resp)
                time.sleep(min(delay, 60.0))
                continue
            raise TrackerAuthError(f"access forbidden by {url}")
        if resp.status_code >= 500:
            if attempt == MAX_ATTEMPTS - 1:
                resp.raise_for_status()
            time.sleep(BACKOFF_BASE_SECONDS * (2 ** attempt))
            continue
        resp.raise_for_status()
        return resp
    raise RateLimitExhaustedError(f"gave up after {MAX_ATTEMPTS} attempts at {url}")


def _reset_delay(resp) -> float:
    reset = resp.headers.get("X-RateLimit-Reset")
    if reset:
        return max(0.0, float(reset) - time.time())
    return BACKOFF_BASE_SECONDS


def _iter_github(base: str, token: str | None, watermark: str | None,
                 session: requests.Session):
    headers = {"Accept": "application/vnd.github+json"}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    page = 1
    while True:
        params = {"state": "all", "per_page": PAGE_SIZE, "page": page,
                  "sort": "updated", "direction": "asc"}
        if watermark:
            params["since"] = watermark
        batch = _request(session, f"{base.rstrip('/')}/issues", params, headers).json()
        if not batch:
            return
        for issue in batch:
            if issue.get("pull_request") is None and issue.get("comments", 0):
                issue["comments_data"] = _github_comments(base, issue, headers, session)
            yield issue
        if len(batch) < PAGE_SIZE:
            return
        page += 1


def _github_comments(base: str, issue: dict, headers: dict, session: requests.Session) -> list:
    out: list = []
    page = 1
    while True:
        batch = _request(
            session,
            f"{base.rstrip('/')}/issues/{issue['number']}/comments",
            {"per_page": PAGE_SIZE, "page": page},
            headers,
        ).json()
        out.extend(batch)
        if len(batch) < PAGE_SIZE:
            return out
        page += 1


def _iter_jira(base: str, token: str | None, watermark: str | None,
               session: requests.Session):
    headers = {"Accept": "application/json"}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    jql = "order by updated asc"
    if watermark:
        compact = watermark.replace("T", " ")[:16]  # minute precision per JQL
        jql = f'updated >= "{compact}" order by updated asc'
    start = 0
    while True:
        params = {"jql": jql, "startAt": start, "maxResults": PAGE_SIZE,
                  "fields": "*all"}
        data = _request(session, f"{base.rstrip('/')}/rest/api/2/search", params, headers).json()
        issues = data.get("issues", [])
        for issue in issues:
            yield issue
        start += len(issues)
        if start >= data.get("total", 0) or not issues:
            return
