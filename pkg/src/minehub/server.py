"""HTTP API for browsing collected data and recording manual validations.

Three kinds of human judgment are accepted: link verdicts, issue-type
reclassification, and per-line hunk labels. Every write appends a
validation record before touching the target document, so the record log
alone can rebuild all manually produced state (see replay_validations).
"""

from __future__ import annotations

import json
import logging
import mimetypes
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, unquote, urlparse

from .errors import (
    LineRangeError,
    MinehubError,
    NotFoundError,
    TaxonomyError,
    ValidatorRequiredError,
)
from .store import Store
from .times import now as now_ts

log = logging.getLogger(__name__)

ISSUE_TYPE_TAXONOMY = ("bug", "improvement", "feature", "task", "documentation", "other")
HUNK_LINE_LABELS = ("bugfix", "refactoring", "unrelated", "whitespace", "documentation")
LINK_VERDICTS = ("valid", "invalid")
GRAPH_FILTERS = ("all", "bugfix", "message", "message_query")


def _project_doc(store: Store, name: str) -> dict:
    doc = store.get_by_key("project", name=name)
    if doc is None:
        raise NotFoundError(f"no project named {name!r}")
    return doc


def _project_commits(store: Store, project_id: str) -> list[dict]:
    systems = {d["id"] for d in store.query("vcs_system", {"project_id": project_id})}
    return [c for c in store.query("commit") if c["vcs_system_id"] in systems]


def _project_issues(store: Store, project_id: str) -> list[dict]:
    systems = {d["id"] for d in store.query("issue_system", {"project_id": project_id})}
    return [i for i in store.query("issue") if i["issue_system_id"] in systems]


def _require_validator(validator) -> str:
    if not isinstance(validator, str) or not validator.strip():
        raise ValidatorRequiredError("every validation write needs a validator name")
    return validator.strip()


def _append_record(store: Store, target_kind: str, target_id: str,
                   value: str, validator: str, line_no: int | None = None) -> str:
    seq = store.count("validation_record", {
        "target_kind": target_kind, "target_id": target_id, "line_no": line_no,
    })
    return store.upsert("validation_record", {
        "target_kind": target_kind,
        "target_id": target_id,
        "line_no": line_no,
        "value": value,
        "validator": validator,
        "created_at": now_ts(),
        "seq": seq,
    })


# -- read operations -------------------------------------------------------

def get_stats(store: Store, project: str) -> dict:
    pdoc = _project_doc(store, project)
    commits = _project_commits(store, pdoc["id"])
    commit_ids = {c["id"] for c in commits}
    links = [l for l in store.query("commit_issue_link") if l["commit_id"] in commit_ids]
    vcs_ids = {d["id"] for d in store.query("vcs_system", {"project_id": pdoc["id"]})}
    return {
        "commits": len(commits),
        "issues": len(_project_issues(store, pdoc["id"])),
        "files": sum(1 for f in store.query("file") if f["vcs_system_id"] in vcs_ids),
        "links": len(links),
        "validated_links": sum(1 for l in links if l["verdict"] != "unvalidated"),
        "identities": store.count("identity"),
    }


def query_commit_graph(store: Store, project: str, filter: str = "all",
                       query: str | None = None) -> dict:
    if filter not in GRAPH_FILTERS:
        raise TaxonomyError(f"unknown graph filter {filter!r}")
    pdoc = _project_doc(store, project)
    commits = _project_commits(store, pdoc["id"])
    if filter == "bugfix":
        commits = [c for c in commits if c["labels"].get("bugfix") is True]
    elif filter in ("message", "message_query"):
        if not query:
            raise TaxonomyError("message filter needs a non-empty query")
        needle = query.lower()
        commits = [c for c in commits if needle in c["message"].lower()]

    commits.sort(key=lambda c: (c["committer_date"], c["revision_hash"]))
    surviving = {c["revision_hash"] for c in commits}
    nodes = [{
        "revision_hash": c["revision_hash"],
        "message": c["message"],
        "committer_date": c["committer_date"],
        "branches": c["branches"],
        "labels": c["labels"],
        "is_merge": c["is_merge"],
    } for c in commits]
    edges = [[c["revision_hash"], p] for c in commits
             for p in c["parent_hashes"] if p in surviving]
    return {"nodes": nodes, "edges": edges}


def _link_view(store: Store, link: dict) -> dict:
    commit = store.get("commit", link["commit_id"])
    issue = store.get("issue", link["issue_id"])
    view = dict(link)
    view["commit"] = None if commit is None else {
        "revision_hash": commit["revision_hash"],
        "message": commit["message"],
        "committer_date": commit["committer_date"],
    }
    view["issue"] = None if issue is None else {
        "external_id": issue["external_id"],
        "title": issue["title"],
        "issue_type": issue["issue_type"],
        "issue_type_validated": issue["issue_type_validated"],
    }
    return view


def list_links(store: Store, project: str, status: str | None = None) -> list[dict]:
    pdoc = _project_doc(store, project)
    commit_ids = {c["id"] for c in _project_commits(store, pdoc["id"])}
    links = [l for l in store.query("commit_issue_link") if l["commit_id"] in commit_ids]
    if status is not None:
        if status not in ("unvalidated", "valid", "invalid"):
            raise TaxonomyError(f"unknown link status {status!r}")
        links = [l for l in links if l["verdict"] == status]
    views = [_link_view(store, l) for l in links]
    views.sort(key=lambda v: ((v["commit"] or {}).get("revision_hash", ""),
                              (v["issue"] or {}).get("external_id", "")))
    return views


def _tracker_issue_url(system: dict, external_id: str) -> str | None:
    base = system["url"].rstrip("/")
    if base.startswith("fixture://"):
        return None
    if system["tracker_type"] == "github":
        return f"{base}/issues/{external_id}"
    return f"{base}/browse/{external_id}"


def get_issue(store: Store, issue_id: str) -> dict:
    issue = store.get("issue", issue_id)
    if issue is None:
        raise NotFoundError(f"no issue {issue_id}")
    system = store.get("issue_system", issue["issue_system_id"])
    comments = store.query("issue_comment", {"issue_id": issue_id}, order_by=("ordinal",))
    linked = []
    for link in store.query("commit_issue_link", {"issue_id": issue_id}):
        commit = store.get("commit", link["commit_id"])
        if commit is not None:
            linked.append({
                "revision_hash": commit["revision_hash"],
                "message": commit["message"],
                "link_id": link["id"],
                "verdict": link["verdict"],
            })
    linked.sort(key=lambda c: c["revision_hash"])
    view = dict(issue)
    view["comments"] = comments
    view["linked_commits"] = linked
    view["tracker_url"] = None if system is None else _tracker_issue_url(system, issue["external_id"])
    return view


def get_commit(store: Store, revision_hash: str) -> dict:
    matches = store.query("commit", {"revision_hash": revision_hash})
    if not matches:
        raise NotFoundError(f"no commit {revision_hash}")
    commit = matches[0]
    author = store.get("person", commit["author_person_id"])
    actions = []
    for action in store.query("file_action", {"commit_id": commit["id"]}):
        file_doc = store.get("file", action["file_id"])
        old_doc = store.get("file", action["old_file_id"]) if action["old_file_id"] else None
        actions.append({
            "id": action["id"],
            "mode": action["mode"],
            "path": file_doc["path"] if file_doc else None,
            "old_path": old_doc["path"] if old_doc else None,
            "lines_added": action["lines_added"],
            "lines_deleted": action["lines_deleted"],
            "is_binary": action["is_binary"],
        })
    actions.sort(key=lambda a: a["path"] or "")
    view = dict(commit)
    view["author"] = None if author is None else {"name": author["name"], "email": author["email"]}
    view["actions"] = actions
    return view


def get_commit_hunks(store: Store, revision_hash: str) -> list[dict]:
    commit_view = get_commit(store, revision_hash)
    hunks = []
    for action in commit_view["actions"]:
        for hunk in store.query("hunk", {"file_action_id": action["id"]}):
            view = dict(hunk)
            view["path"] = action["path"]
            view["mode"] = action["mode"]
            hunks.append(view)
    hunks.sort(key=lambda h: (h["path"] or "", h["new_start"], h["old_start"]))
    return hunks


# -- validation writes ------------------------------------------------------

def set_link_verdict(store: Store, link_id: str, value: str, validator: str) -> dict:
    validator = _require_validator(validator)
    link = store.get("commit_issue_link", link_id)
    if link is None:
        raise NotFoundError(f"no link {link_id}")
    if value not in LINK_VERDICTS:
        raise TaxonomyError(f"verdict must be one of {LINK_VERDICTS}, got {value!r}")
    _append_record(store, "link", link_id, value, validator)
    return store.update("commit_issue_link", link_id, {
        "verdict": value, "validator": validator, "validated_at": now_ts(),
    })


def set_issue_type(store: Store, issue_id: str, validated_type: str, validator: str) -> dict:
    validator = _require_validator(validator)
    issue = store.get("issue", issue_id)
    if issue is None:
        raise NotFoundError(f"no issue {issue_id}")
    if validated_type not in ISSUE_TYPE_TAXONOMY:
        raise TaxonomyError(
            f"type must be one of {ISSUE_TYPE_TAXONOMY}, got {validated_type!r}")
    _append_record(store, "issue_type", issue_id, validated_type, validator)
    return store.update("issue", issue_id, {"issue_type_validated": validated_type})


def set_hunk_line_label(store: Store, hunk_id: str, line_no: int, label: str,
                        validator: str) -> dict:
    validator = _require_validator(validator)
    hunk = store.get("hunk", hunk_id)
    if hunk is None:
        raise NotFoundError(f"no hunk {hunk_id}")
    if label not in HUNK_LINE_LABELS:
        raise TaxonomyError(f"label must be one of {HUNK_LINE_LABELS}, got {label!r}")
    if not isinstance(line_no, int) or isinstance(line_no, bool):
        raise LineRangeError(f"line_no must be an integer, got {line_no!r}")
    low, high = hunk["new_start"], hunk["new_start"] + hunk["new_lines"] - 1
    if hunk["new_lines"] == 0 or not low <= line_no <= high:
        raise LineRangeError(
            f"line {line_no} outside hunk's new-line range [{low}, {high}]")
    _append_record(store, "hunk_line", hunk_id, label, validator, line_no=line_no)
    labels = dict(hunk["line_labels"])
    labels[str(line_no)] = label
    return store.update("hunk", hunk_id, {"line_labels": labels})


def replay_validations(store: Store) -> dict:
    """Re-apply the validation record log in order. Records whose target no
    longer exists are skipped; the latest record per target wins, which is
    exactly the order the log was written in."""
    applied = 0
    skipped = 0
    records = store.query(
        "validation_record",
        order_by=("created_at", "target_kind", "target_id", "seq"))
    for rec in records:
        kind, target = rec["target_kind"], rec["target_id"]
        try:
            if kind == "link":
                link = store.get("commit_issue_link", target)
                if link is None:
                    skipped += 1
                    continue
                store.update("commit_issue_link", target, {
                    "verdict": rec["value"],
                    "validator": rec["validator"],
                    "validated_at": rec["created_at"],
                })
            elif kind == "issue_type":
                if store.get("issue", target) is None:
                    skipped += 1
                    continue
                store.update("issue", target, {"issue_type_validated": rec["value"]})
            elif kind == "hunk_line":
                hunk = store.get("hunk", target)
                if hunk is None:
                    skipped += 1
                    continue
                labels = dict(hunk["line_labels"])
                labels[str(rec["line_no"])] = rec["value"]
                store.update("hunk", target, {"line_labels": labels})
            applied += 1
        except MinehubError:
            skipped += 1
    return {"applied": applied, "skipped": skipped}


# -- HTTP layer --------------------------------------------------------------

def _error_status(exc: MinehubError) -> int:
    if isinstance(exc, NotFoundError):
        return 404
    if isinstance(exc, (TaxonomyError, LineRangeError, ValidatorRequiredError)):
        return 400
    return 500


class ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "minehub"

    # route table: (method, pattern, handler(store, match, params, body))
    ROUTES = [
        ("GET", re.compile(r"^/api/projects$"),
         lambda s, m, q, b: [{"id": p["id"], "name": p["name"]} for p in s.query("project")]),
        ("GET", re.compile(r"^/api/projects/([^/]+)/stats$"),
         lambda s, m, q, b: get_stats(s, unquote(m.group(1)))),
        ("GET", re.compile(r"^/api/projects/([^/]+)/commit-graph$"),
         lambda s, m, q, b: query_commit_graph(
             s, unquote(m.group(1)),
             filter=q.get("filter", ["all"])[0],
             query=q.get("q", [None])[0])),
        ("GET", re.compile(r"^/api/links$"),
         lambda s, m, q, b: list_links(
             s, _required_param(q, "project"), status=q.get("status", [None])[0])),
        ("POST", re.compile(r"^/api/links/([^/]+)/verdict$"),
         lambda s, m, q, b: set_link_verdict(
             s, m.group(1), _field(b, "value"), _field(b, "validator"))),
        ("GET", re.compile(r"^/api/issues/([^/]+)$"),
         lambda s, m, q, b: get_issue(s, m.group(1))),
        ("POST", re.compile(r"^/api/issues/([^/]+)/type$"),
         lambda s, m, q, b: set_issue_type(
             s, m.group(1), _field(b, "validated_type"), _field(b, "validator"))),
        ("GET", re.compile(r"^/api/commits/([^/]+)/hunks$"),
         lambda s, m, q, b: get_commit_hunks(s, m.group(1))),
        ("GET", re.compile(r"^/api/commits/([^/]+)$"),
         lambda s, m, q, b: get_commit(s, m.group(1))),
        ("POST", re.compile(r"^/api/hunks/([^/]+)/lines$"),
         lambda s, m, q, b: set_hunk_line_label(
             s, m.group(1), _field(b, "line_no"), _field(b, "label"),
             _field(b, "validator"))),
    ]

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _send_json(self, status: int, payload) -> None:
        body = json.dumps(payload, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self._cors()
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _cors(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def _read_body(self):
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise BadRequest("request body is not valid JSON")
        if not isinstance(doc, dict):
            raise BadRequest("request body must be a JSON object")
        return doc

    def _dispatch(self, method: str) -> None:
        parsed = urlparse(self.path)
        params = parse_qs(parsed.query)
        for verb, pattern, handler in self.ROUTES:
            match = pattern.match(parsed.path)
            if match is None:
                continue
            if verb != method:
                self._send_json(405, {"code": "method-not-allowed",
                                      "message": f"{method} not allowed here"})
                return
            try:
                body = self._read_body() if method == "POST" else {}
                result = handler(self.server.store, match, params, body)
                self._send_json(200, result)
            except BadRequest as exc:
                self._send_json(400, {"code": "bad-request", "message": str(exc)})
            except MinehubError as exc:
                self._send_json(_error_status(exc), exc.to_doc())
            except Exception:
                log.exception("unhandled error on %s %s", method, self.path)
                self._send_json(500, {"code": "internal", "message": "internal error"})
            return
        if method == "GET" and not parsed.path.startswith("/api/"):
            self._serve_static(parsed.path)
            return
        self._send_json(404, {"code": "not-found", "message": f"no route for {parsed.path}"})

    def _serve_static(self, path: str) -> None:
        ui_dir = self.server.ui_dir
        if ui_dir is None:
            self._send_json(404, {"code": "not-found", "message": "no UI bundle configured"})
            return
        rel = unquote(path).lstrip("/") or "index.html"
        target = (ui_dir / rel).resolve()
        if not str(target).startswith(str(ui_dir.resolve())):
            self._send_json(404, {"code": "not-found", "message": "outside UI root"})
            return
        if not target.is_file() and "." not in rel.rsplit("/", 1)[-1]:
            target = ui_dir / "index.html"  # client-side routing fallback
        if not target.is_file():
            self._send_json(404, {"code": "not-found", "message": f"no file {rel}"})
            return
        data = target.read_bytes()
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


class BadRequest(Exception):
    pass


def _required_param(params: dict, name: str) -> str:
    values = params.get(name)
    if not values or not values[0]:
        raise BadRequest(f"missing query parameter {name!r}")
    return values[0]


def _field(body: dict, name: str):
    if name not in body:
        raise BadRequest(f"missing body field {name!r}")
    return body[name]


class ValidationServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, store: Store, host: str = "127.0.0.1", port: int = 0,
                 ui_dir: str | Path | None = None):
        super().__init__((host, port), ApiHandler)
        self.store = store
        self.ui_dir = Path(ui_dir) if ui_dir else None

    @property
    def port(self) -> int:
        return self.server_address[1]

    def serve_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


def serve(store: Store, host: str = "127.0.0.1", port: int = 8765,
          ui_dir: str | Path | None = None) -> None:
    server = ValidationServer(store, host, port, ui_dir)
    log.info("listening on http://%s:%s/", host, server.port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
