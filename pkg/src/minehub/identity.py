"""Developer identity merging.

Union-find over person records with three precision-leaning rules:
exact email, normalized full name (two or more tokens), and long email
local-part. The resulting components form a partition that covers every
person, including singletons, and is replaced wholesale on each run so
stale components never linger.
"""

from __future__ import annotations

import unicodedata

from .store import Store


def normalize_name(name: str) -> str:
    """Casefold, strip diacritics, collapse whitespace."""
    decomposed = unicodedata.normalize("NFKD", name)
    stripped = "".join(c for c in decomposed if not unicodedata.combining(c))
    return " ".join(stripped.casefold().split())


def _local_part(email: str) -> str:
    return email.split("@", 1)[0] if "@" in email else ""


class _UnionFind:
    def __init__(self, items):
        self.parent = {item: item for item in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:  # path compression
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # deterministic winner regardless of union order
            lo, hi = sorted((ra, rb))
            self.parent[hi] = lo


def merge_components(persons: list[dict]) -> list[list[str]]:
    """Pure partition of person ids into identity components.

    Rules: (R1) same non-empty email; (R2) same normalized name when the
    name has at least two tokens; (R3) same email local-part when it is
    at least 5 characters. Output is order-independent: sorted ids within
    components, components sorted by first member.
    """
    uf = _UnionFind([p["id"] for p in persons])
    buckets: dict[tuple[str, str], str] = {}

    def bucket(kind: str, value: str, pid: str):
        key = (kind, value)
        if key in buckets:
            uf.union(buckets[key], pid)
        else:
            buckets[key] = pid

    for p in sorted(persons, key=lambda d: d["id"]):
        pid = p["id"]
        email = p.get("email", "")
        name = p.get("name", "")
        if email:
            bucket("email", email, pid)
        normalized = normalize_name(name)
        if len(normalized.split()) >= 2:
            bucket("name", normalized, pid)
        local = _local_part(email)
        if len(local) >= 5:
            bucket("local", local, pid)

    components: dict[str, list[str]] = {}
    for p in persons:
        components.setdefault(uf.find(p["id"]), []).append(p["id"])
    return sorted(sorted(member) for member in components.values())


def merge_identities(store: Store, project: str) -> dict:
    """Recompute the identity partition and replace the stored one."""
    persons = store.query("person")
    components = merge_components(persons)

    from .schema import doc_id

    wanted_ids = set()
    for component in components:
        wanted_ids.add(doc_id("identity", {"person_ids": component}))
    for stale in store.query("identity"):
        if stale["id"] not in wanted_ids:
            store.delete("identity", stale["id"])
    for component in components:
        store.upsert("identity", {"person_ids": component})
    return {"persons": len(persons), "identities": len(components)}
