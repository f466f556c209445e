"""Embedded document store: one append-log per collection plus an
in-memory natural-key index, compacted on close.

Layout: `<datadir>/<collection>.ndjson` for domain collections,
`<datadir>/ops/<collection>.ndjson` for operational state (jobs,
consistency reports), `<datadir>/schema.json` for the exported schema.
Opaque ids are digests of natural keys, so identical content always
compacts to identical bytes regardless of write order or worker count.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path

from . import schema
from .errors import AppendOnlyViolationError, UnknownFieldError
from .schema import canonical_json, doc_id, get_collection, merge_protected, validate


@dataclass(frozen=True)
class Range:
    """Range predicate for query(); bounds are inclusive unless the
    exclusive variant is set."""

    gte: object = None
    lte: object = None
    gt: object = None
    lt: object = None

    def matches(self, value) -> bool:
        if value is None:
            return False
        if self.gte is not None and value < self.gte:
            return False
        if self.lte is not None and value > self.lte:
            return False
        if self.gt is not None and value <= self.gt:
            return False
        if self.lt is not None and value >= self.lt:
            return False
        return True


def _sort_token(value):
    # None sorts first; bools before their int look-alikes is irrelevant here
    if value is None:
        return (0, "")
    if isinstance(value, str):
        return (1, value)
    if isinstance(value, bool):
        return (1, str(value))
    if isinstance(value, (int, float)):
        return (2, float(value))
    return (3, canonical_json(value))


class Store:
    """Thread-safe document store. Writers are serialized per collection;
    a single upsert is atomic; queries see a consistent snapshot."""

    def __init__(self, datadir: str | Path):
        self.datadir = Path(datadir)
        self.datadir.mkdir(parents=True, exist_ok=True)
        (self.datadir / "ops").mkdir(exist_ok=True)
        self._docs: dict[str, dict[str, dict]] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._files: dict[str, object] = {}
        self._closed = False
        for name in schema.COLLECTIONS:
            self._locks[name] = threading.RLock()
            self._docs[name] = {}
            self._load(name)
        self.write_schema()

    # -- paths and persistence ------------------------------------------

    def path_for(self, collection: str) -> Path:
        coll = get_collection(collection)
        base = self.datadir if coll.store == "domain" else self.datadir / "ops"
        return base / f"{collection}.ndjson"

    def _load(self, collection: str):
        path = self.path_for(collection)
        docs = self._docs[collection]
        if path.exists():
            with open(path, encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    if record.get("_op") == "del":
                        docs.pop(record["id"], None)
                    else:
                        docs[record["id"]] = record
        else:
            path.touch()
        self._files[collection] = open(path, "a", encoding="utf-8")

    def _append(self, collection: str, record: dict):
        handle = self._files[collection]
        handle.write(canonical_json(record) + "\n")
        handle.flush()

    # -- operations ------------------------------------------------------

    def upsert(self, collection: str, doc: dict, *, allow_protected: bool = False) -> str:
        coll = get_collection(collection)
        clean = validate(collection, doc)
        oid = doc_id(collection, clean)
        with self._locks[collection]:
            existing = self._docs[collection].get(oid)
            if existing is not None:
                if coll.append_only:
                    stripped = {k: v for k, v in existing.items() if k != "id"}
                    if stripped != clean:
                        raise AppendOnlyViolationError(
                            f"{collection} is append-only; cannot rewrite {oid}"
                        )
                    return oid
                if not allow_protected:
                    clean = merge_protected(collection, existing, clean)
                    clean = validate(collection, clean)
            stored = dict(clean)
            stored["id"] = oid
            if existing == stored:
                return oid
            self._docs[collection][oid] = copy.deepcopy(stored)
            self._append(collection, stored)
        return oid

    def get(self, collection: str, oid: str) -> dict | None:
        with self._locks[collection]:
            found = self._docs[collection].get(oid)
            return copy.deepcopy(found) if found is not None else None

    def get_by_key(self, collection: str, **key_fields) -> dict | None:
        return self.get(collection, doc_id(collection, key_fields))

    def query(self, collection: str, where: dict | None = None, order_by=()) -> list[dict]:
        """Equality/range conjunction query with deterministic ordering
        (requested order, then natural key). Returns a snapshot list."""
        coll = get_collection(collection)
        known = set(coll.fields) | {"id"}
        where = where or {}
        for field_name in list(where) + list(order_by):
            if field_name not in known:
                raise UnknownFieldError(f"{collection} has no field {field_name!r}")
        with self._locks[collection]:
            snapshot = [copy.deepcopy(d) for d in self._docs[collection].values()]
        out = []
        for doc in snapshot:
            ok = True
            for field_name, expected in where.items():
                value = doc.get(field_name)
                if isinstance(expected, Range):
                    if not expected.matches(value):
                        ok = False
                        break
                elif value != expected:
                    ok = False
                    break
            if ok:
                out.append(doc)
        nk = coll.natural_key

        def sort_key(doc):
            ordered = tuple(_sort_token(doc.get(f)) for f in order_by)
            tiebreak = canonical_json([doc.get(f) for f in nk])
            return ordered + (tiebreak,)

        out.sort(key=sort_key)
        return out

    def count(self, collection: str, where: dict | None = None) -> int:
        if not where:
            with self._locks[collection]:
                get_collection(collection)
                return len(self._docs[collection])
        return len(self.query(collection, where))

    def delete(self, collection: str, oid: str) -> bool:
        coll = get_collection(collection)
        if coll.append_only:
            raise AppendOnlyViolationError(f"{collection} is append-only; delete refused")
        with self._locks[collection]:
            if oid not in self._docs[collection]:
                return False
            del self._docs[collection][oid]
            self._append(collection, {"_op": "del", "id": oid})
        return True

    def update(self, collection: str, oid: str, updates: dict, expect: dict | None = None) -> dict | None:
        """Atomic read-modify-write of one document. With `expect`, applies
        only if the named fields currently hold the given values (used for
        job claims); returns the new doc or None if the guard failed or the
        doc is missing. Bypasses protected-field merging (trusted path)."""
        coll = get_collection(collection)
        if coll.append_only:
            raise AppendOnlyViolationError(f"{collection} is append-only; update refused")
        with self._locks[collection]:
            existing = self._docs[collection].get(oid)
            if existing is None:
                return None
            if expect is not None:
                for field_name, value in expect.items():
                    if existing.get(field_name) != value:
                        return None
            merged = {k: v for k, v in existing.items() if k != "id"}
            merged.update(updates)
            clean = validate(collection, merged)
            new_id = doc_id(collection, clean)
            if new_id != oid:
                raise AppendOnlyViolationError(
                    f"{collection}.update may not change natural key fields"
                )
            stored = dict(clean)
            stored["id"] = oid
            if stored == existing:
                return copy.deepcopy(stored)
            self._docs[collection][oid] = copy.deepcopy(stored)
            self._append(collection, stored)
            return copy.deepcopy(stored)

    # -- schema and lifecycle ---------------------------------------------

    def export_schema(self) -> dict:
        return schema.export_schema()

    def write_schema(self) -> Path:
        path = self.datadir / "schema.json"
        text = json.dumps(self.export_schema(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
        if not path.exists() or path.read_text(encoding="utf-8") != text:
            path.write_text(text, encoding="utf-8")
        return path

    def compact(self):
        """Rewrite every collection file with one line per live document,
        sorted by natural key: the canonical byte representation."""
        for name in schema.COLLECTIONS:
            coll = get_collection(name)
            with self._locks[name]:
                docs = sorted(
                    self._docs[name].values(),
                    key=lambda d: canonical_json([d.get(f) for f in coll.natural_key]),
                )
                path = self.path_for(name)
                tmp = path.with_suffix(".ndjson.tmp")
                with open(tmp, "w", encoding="utf-8") as handle:
                    for doc in docs:
                        handle.write(canonical_json(doc) + "\n")
                self._files[name].close()
                os.replace(tmp, path)
                self._files[name] = open(path, "a", encoding="utf-8")

    def close(self):
        if self._closed:
            return
        self.compact()
        for handle in self._files.values():
            handle.close()
        self._files = {}
        self._closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- integrity helpers -------------------------------------------------

    def domain_bytes(self) -> bytes:
        """Concatenated compacted bytes of all domain collections, with
        collection-name framing. Used by the idempotence checks."""
        self.compact()
        chunks = []
        for name in sorted(schema.DOMAIN_COLLECTIONS):
            data = self.path_for(name).read_bytes()
            chunks.append(f"== {name} {len(data)}\n".encode())
            chunks.append(data)
        return b"".join(chunks)

    def domain_fingerprint(self) -> str:
        return hashlib.sha256(self.domain_bytes()).hexdigest()

    def referential_orphans(self) -> list[tuple[str, str]]:
        """Full-scan referential integrity audit: (collection, id) pairs
        whose ref fields point at missing documents."""
        orphans = []
        for name in schema.COLLECTIONS:
            refs = schema.ref_fields(name)
            if not refs:
                continue
            for doc in self.query(name):
                for field_name, target in refs.items():
                    value = doc.get(field_name)
                    if value is None:
                        continue
                    if self.get(target, value) is None:
                        orphans.append((name, doc["id"]))
                        break
        return orphans
