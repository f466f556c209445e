"""Harmonized logical schema: collections, field types, natural keys.

The schema is the contract every harvester and enricher writes against.
Documents are plain dicts validated on upsert; opaque ids are
deterministic digests of natural keys so that re-harvesting the same
source is a byte-level no-op.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

from .errors import (
    MissingNaturalKeyError,
    SchemaViolationError,
    UnknownCollectionError,
    UnknownFieldError,
)
from .times import is_canonical

SCHEMA_VERSION = 1

HEX40 = re.compile(r"^[0-9a-f]{40}$")

COMMIT_LABELS = ("bugfix", "refactoring_keyword", "documentation", "satd_added", "satd_removed")
LINE_LABELS = ("bugfix", "refactoring", "unrelated", "whitespace", "documentation")
ISSUE_TYPE_TAXONOMY = ("bug", "improvement", "feature", "task", "documentation", "other")
JOB_KINDS = (
    "harvest_vcs",
    "harvest_issues",
    "metrics_commit",
    "link",
    "induce",
    "label",
    "identify",
    "export",
)


@dataclass(frozen=True)
class Field:
    type: str  # string | int | number | bool | timestamp | list[string] | list[int] | list | map | ref
    nullable: bool = False
    enum: tuple | None = None
    min: float | None = None
    max: float | None = None
    ref: str | None = None  # target collection for ref fields


@dataclass(frozen=True)
class Collection:
    name: str
    fields: dict[str, Field]
    natural_key: tuple[str, ...]
    protected: tuple[str, ...] = ()
    store: str = "domain"  # domain | ops
    append_only: bool = False
    check: object = None  # extra per-document validator, callable(doc) -> None

    def field_names(self) -> list[str]:
        return ["id"] + list(self.fields)


def _check_project(doc):
    if not doc["name"]:
        raise SchemaViolationError("project.name must be non-empty")


def _check_file(doc):
    if doc["path"].startswith("/"):
        raise SchemaViolationError(f"file.path must be repository-relative: {doc['path']!r}")


def _check_commit(doc):
    if not HEX40.match(doc["revision_hash"]):
        raise SchemaViolationError(f"revision_hash must be 40 lowercase hex: {doc['revision_hash']!r}")
    for parent in doc["parent_hashes"]:
        if not HEX40.match(parent):
            raise SchemaViolationError(f"parent hash must be 40 lowercase hex: {parent!r}")
    for name, flag in doc.get("labels", {}).items():
        if not isinstance(flag, bool):
            raise SchemaViolationError(f"commit.labels[{name}] must be bool")


def _check_file_action(doc):
    needs_old = doc["mode"] in ("R", "C")
    if needs_old and not doc.get("old_file_id"):
        raise SchemaViolationError("old_file_id required for rename/copy actions")
    if not needs_old and doc.get("old_file_id"):
        raise SchemaViolationError("old_file_id only allowed for rename/copy actions")
    if doc["mode"] == "D" and doc["lines_added"] != 0:
        raise SchemaViolationError("deleted file cannot add lines")


def _check_hunk(doc):
    removed = added = context = 0
    for line in doc["content"].splitlines():
        if line.startswith("-"):
            removed += 1
        elif line.startswith("+"):
            added += 1
        elif line.startswith("\\"):
            pass  # "\ No newline at end of file"
        else:
            context += 1
    if removed + context != doc["old_lines"] or added + context != doc["new_lines"]:
        raise SchemaViolationError(
            "hunk header inconsistent with content: "
            f"-{removed}/+{added}/ctx {context} vs spans {doc['old_lines']}/{doc['new_lines']}"
        )
    lo, hi = doc["new_start"], doc["new_start"] + doc["new_lines"]
    for key, value in doc.get("line_labels", {}).items():
        line_no = int(key)
        if not (lo <= line_no < hi):
            raise SchemaViolationError(f"line label {line_no} outside hunk range [{lo}, {hi})")
        if value not in LINE_LABELS:
            raise SchemaViolationError(f"unknown line label {value!r}")


def _check_issue(doc):
    if doc["created_at"] > doc["updated_at"]:
        raise SchemaViolationError("issue.created_at must be <= updated_at")


def _check_identity(doc):
    if not doc["person_ids"]:
        raise SchemaViolationError("identity.person_ids must be non-empty")
    if doc["person_ids"] != sorted(set(doc["person_ids"])):
        raise SchemaViolationError("identity.person_ids must be sorted and unique")


def _check_link(doc):
    validated = doc["verdict"] != "unvalidated"
    if validated and not (doc.get("validator") and doc.get("validated_at")):
        raise SchemaViolationError("validated link requires validator and validated_at")


_TS = Field("timestamp")
_TS_OPT = Field("timestamp", nullable=True)
_STR = Field("string")
_STR_OPT = Field("string", nullable=True)
_NONNEG = Field("int", min=0)


COLLECTIONS: dict[str, Collection] = {}


def _declare(coll: Collection):
    COLLECTIONS[coll.name] = coll


_declare(Collection(
    "project",
    fields={"name": _STR},
    natural_key=("name",),
    check=_check_project,
))

_declare(Collection(
    "vcs_system",
    fields={
        "project_id": Field("ref", ref="project"),
        "url": _STR,
        "vcs_type": Field("string", enum=("git",)),
        "archive_ref": _STR_OPT,
        "last_harvested": _TS_OPT,
    },
    natural_key=("project_id", "url"),
))

_declare(Collection(
    "file",
    fields={
        "vcs_system_id": Field("ref", ref="vcs_system"),
        "path": _STR,
    },
    natural_key=("vcs_system_id", "path"),
    check=_check_file,
))

_declare(Collection(
    "commit",
    fields={
        "vcs_system_id": Field("ref", ref="vcs_system"),
        "revision_hash": _STR,
        "parent_hashes": Field("list[string]"),
        "author_person_id": Field("ref", ref="person"),
        "committer_person_id": Field("ref", ref="person"),
        "author_date": _TS,
        "author_offset_minutes": Field("int"),
        "committer_date": _TS,
        "committer_offset_minutes": Field("int"),
        "message": _STR,
        "branches": Field("list[string]"),
        "labels": Field("map"),
        "is_merge": Field("bool"),
        "had_encoding_errors": Field("bool", nullable=True),
    },
    natural_key=("vcs_system_id", "revision_hash"),
    check=_check_commit,
))

_declare(Collection(
    "file_action",
    fields={
        "commit_id": Field("ref", ref="commit"),
        "file_id": Field("ref", ref="file"),
        "mode": Field("string", enum=("A", "M", "D", "R", "C")),
        "old_file_id": Field("ref", ref="file", nullable=True),
        "lines_added": _NONNEG,
        "lines_deleted": _NONNEG,
        "is_binary": Field("bool"),
    },
    natural_key=("commit_id", "file_id"),
    check=_check_file_action,
))

_declare(Collection(
    "hunk",
    fields={
        "file_action_id": Field("ref", ref="file_action"),
        "old_start": _NONNEG,
        "old_lines": _NONNEG,
        "new_start": _NONNEG,
        "new_lines": _NONNEG,
        "content": _STR,
        "line_labels": Field("map"),
    },
    natural_key=("file_action_id", "old_start", "new_start"),
    protected=("line_labels",),
    check=_check_hunk,
))

_declare(Collection(
    "issue_system",
    fields={
        "project_id": Field("ref", ref="project"),
        "url": _STR,
        "tracker_type": Field("string", enum=("jira", "github")),
        "watermark": _TS_OPT,
    },
    natural_key=("project_id", "url"),
))

_declare(Collection(
    "issue",
    fields={
        "issue_system_id": Field("ref", ref="issue_system"),
        "external_id": _STR,
        "title": _STR,
        "description": _STR,
        "issue_type": _STR,
        "issue_type_validated": _STR_OPT,
        "priority": _STR_OPT,
        "status": _STR_OPT,
        "resolution": _STR_OPT,
        "reporter_person_id": Field("ref", ref="person", nullable=True),
        "assignee_person_id": Field("ref", ref="person", nullable=True),
        "created_at": _TS,
        "updated_at": _TS,
        "affected_versions": Field("list[string]"),
        "fixed_versions": Field("list[string]"),
        "had_encoding_errors": Field("bool", nullable=True),
    },
    natural_key=("issue_system_id", "external_id"),
    protected=("issue_type_validated",),
    check=_check_issue,
))

_declare(Collection(
    "issue_comment",
    fields={
        "issue_id": Field("ref", ref="issue"),
        "ordinal": _NONNEG,
        "author_person_id": Field("ref", ref="person"),
        "created_at": _TS,
        "body": _STR,
    },
    natural_key=("issue_id", "ordinal"),
))

_declare(Collection(
    "person",
    fields={"name": _STR, "email": _STR},
    natural_key=("name", "email"),
))

_declare(Collection(
    "identity",
    fields={"person_ids": Field("list[string]")},
    natural_key=("person_ids",),
    check=_check_identity,
))

_declare(Collection(
    "commit_issue_link",
    fields={
        "commit_id": Field("ref", ref="commit"),
        "issue_id": Field("ref", ref="issue"),
        "approach": Field("string", enum=("id_pattern", "szz_heuristic")),
        "syntactic_confidence": Field("int", min=0, max=2),
        "semantic_confidence": Field("int", min=0, max=4),
        "verdict": Field("string", enum=("unvalidated", "valid", "invalid")),
        "validator": _STR_OPT,
        "validated_at": _TS_OPT,
    },
    natural_key=("commit_id", "issue_id"),
    protected=("verdict", "validator", "validated_at"),
    check=_check_link,
))

_declare(Collection(
    "inducing_link",
    fields={
        "fix_commit_id": Field("ref", ref="commit"),
        "inducing_commit_id": Field("ref", ref="commit"),
        "fix_file_action_id": Field("ref", ref="file_action"),
        "inducing_file_action_id": Field("ref", ref="file_action"),
        "blamed_lines": Field("list[int]"),
        "label": Field("string", enum=("inducing", "suspect", "filtered_whitespace", "filtered_comment")),
    },
    natural_key=("fix_file_action_id", "inducing_file_action_id"),
))

_declare(Collection(
    "metric_record",
    fields={
        "commit_id": Field("ref", ref="commit"),
        "file_id": Field("ref", ref="file"),
        "metrics": Field("map"),
        "imports": Field("list[string]"),
    },
    natural_key=("commit_id", "file_id"),
))

_declare(Collection(
    "validation_record",
    fields={
        "target_kind": Field("string", enum=("link", "issue_type", "hunk_line")),
        "target_id": _STR,
        "line_no": Field("int", nullable=True),
        "value": _STR,
        "validator": _STR,
        "created_at": _TS,
        "seq": _NONNEG,
    },
    natural_key=("target_kind", "target_id", "line_no", "seq"),
    append_only=True,
))

_declare(Collection(
    "job",
    fields={
        "run_id": _STR,
        "kind": Field("string", enum=JOB_KINDS),
        "target": _STR,
        "state": Field("string", enum=("queued", "running", "done", "failed", "vanished")),
        "attempts": _NONNEG,
        "log": _STR,
        "enqueued_at": _TS_OPT,
        "started_at": _TS_OPT,
        "finished_at": _TS_OPT,
        "heartbeat_at": _TS_OPT,
    },
    natural_key=("run_id", "kind", "target"),
    store="ops",
))

_declare(Collection(
    "consistency_report",
    fields={
        "project_id": Field("ref", ref="project"),
        "seq": _NONNEG,
        "created_at": _TS,
        "missing_metric_entries": Field("list"),
        "missing_commits": Field("list[string]"),
        "orphan_documents": Field("list"),
        "clean": Field("bool"),
    },
    natural_key=("project_id", "seq"),
    store="ops",
))


DOMAIN_COLLECTIONS = tuple(n for n, c in COLLECTIONS.items() if c.store == "domain")
OPS_COLLECTIONS = tuple(n for n, c in COLLECTIONS.items() if c.store == "ops")


def get_collection(name: str) -> Collection:
    try:
        return COLLECTIONS[name]
    except KeyError:
        raise UnknownCollectionError(f"unknown collection: {name}") from None


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def doc_id(collection: str, doc: dict) -> str:
    """Deterministic opaque id: digest of the collection name and natural key values."""
    coll = get_collection(collection)
    key = []
    for field_name in coll.natural_key:
        if field_name not in doc or doc[field_name] is None:
            if field_name == "line_no":  # nullable key member of validation_record
                key.append(None)
                continue
            raise MissingNaturalKeyError(f"{collection}: missing natural key field {field_name!r}")
        key.append(doc[field_name])
    payload = collection + "\x00" + canonical_json(key)
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()


def _type_ok(value, f: Field) -> bool:
    t = f.type
    if t in ("string", "ref", "timestamp"):
        return isinstance(value, str)
    if t == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if t == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if t == "bool":
        return isinstance(value, bool)
    if t == "list[string]":
        return isinstance(value, list) and all(isinstance(v, str) for v in value)
    if t == "list[int]":
        return isinstance(value, list) and all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        )
    if t == "list":
        return isinstance(value, list)
    if t == "map":
        return isinstance(value, dict) and all(isinstance(k, str) for k in value)
    raise AssertionError(f"unhandled field type {t}")


def validate(collection: str, doc: dict) -> dict:
    """Validate and normalize a document; returns a clean copy (without id)."""
    coll = get_collection(collection)
    clean = {}
    for name, f in coll.fields.items():
        value = doc.get(name)
        if value is None:
            if f.nullable:
                clean[name] = None
                continue
            if name in coll.natural_key:
                raise MissingNaturalKeyError(f"{collection}: missing natural key field {name!r}")
            raise SchemaViolationError(f"{collection}.{name} is required")
        if not _type_ok(value, f):
            raise SchemaViolationError(
                f"{collection}.{name}: expected {f.type}, got {type(value).__name__}"
            )
        if f.type == "timestamp" and not is_canonical(value):
            raise SchemaViolationError(f"{collection}.{name}: not a canonical UTC timestamp: {value!r}")
        if f.enum is not None and value not in f.enum:
            raise SchemaViolationError(f"{collection}.{name}: {value!r} not in {f.enum}")
        if f.min is not None and value < f.min:
            raise SchemaViolationError(f"{collection}.{name}: {value} below minimum {f.min}")
        if f.max is not None and value > f.max:
            raise SchemaViolationError(f"{collection}.{name}: {value} above maximum {f.max}")
        clean[name] = value
    extras = set(doc) - set(coll.fields) - {"id"}
    if extras:
        raise SchemaViolationError(f"{collection}: unknown fields {sorted(extras)}")
    if coll.check is not None:
        coll.check(clean)
    return clean


def merge_protected(collection: str, existing: dict, incoming: dict) -> dict:
    """Carry validation-protected fields from the stored doc into the incoming one.

    commit_issue_link verdicts protect as a group once validated;
    issue_type_validated protects once set; hunk line_labels protect once
    non-empty.
    """
    coll = get_collection(collection)
    if not coll.protected:
        return incoming
    merged = dict(incoming)
    if collection == "commit_issue_link":
        if existing.get("verdict", "unvalidated") != "unvalidated":
            for name in coll.protected:
                merged[name] = existing.get(name)
    elif collection == "issue":
        if existing.get("issue_type_validated") is not None:
            merged["issue_type_validated"] = existing["issue_type_validated"]
    elif collection == "hunk":
        if existing.get("line_labels"):
            merged["line_labels"] = existing["line_labels"]
    return merged


def export_schema() -> dict:
    """Machine-readable schema listing; stable across runs by construction."""
    collections = {}
    for name, coll in sorted(COLLECTIONS.items()):
        fields = {}
        for fname, f in coll.fields.items():
            entry: dict = {"type": f.type, "nullable": f.nullable}
            if f.enum is not None:
                entry["enum"] = list(f.enum)
            if f.min is not None:
                entry["min"] = f.min
            if f.max is not None:
                entry["max"] = f.max
            if f.ref is not None:
                entry["ref"] = f.ref
            fields[fname] = entry
        collections[name] = {
            "natural_key": list(coll.natural_key),
            "fields": fields,
            "protected": list(coll.protected),
            "append_only": coll.append_only,
            "store": coll.store,
        }
    return {"schema_version": SCHEMA_VERSION, "collections": collections}


def ref_fields(collection: str) -> dict[str, str]:
    """Map of ref field name -> target collection (validation_record excluded:
    its target_id is polymorphic by target_kind)."""
    coll = get_collection(collection)
    return {name: f.ref for name, f in coll.fields.items() if f.type == "ref" and f.ref}
