"""Git harvesting: commits, people, files, actions, hunks.

A repository is identified by its URL; the URL doubles as the default
source location. Local paths are harvested in place, anything else is
mirror-cloned under the data directory. Harvesting is incremental and
idempotent: already-stored commits are not re-diffed, and re-running
against an unchanged repository leaves the domain store byte-identical.
"""

from __future__ import annotations

from pathlib import Path

from . import gitio
from .errors import LineRangeError, MissingCloneError, NotFoundError
from .store import Store


def ensure_project(store: Store, name: str) -> str:
    return store.upsert("project", {"name": name})


def ensure_vcs_system(store: Store, project_id: str, url: str) -> str:
    existing = store.get_by_key("vcs_system", project_id=project_id, url=url)
    doc = {
        "project_id": project_id,
        "url": url,
        "vcs_type": "git",
        "archive_ref": existing["archive_ref"] if existing else None,
        "last_harvested": existing["last_harvested"] if existing else None,
    }
    return store.upsert("vcs_system", doc)


def _as_local_path(url: str) -> Path | None:
    raw = url[7:] if url.startswith("file://") else url
    path = Path(raw)
    return path if gitio.is_repository(path) else None


def clone_path(store: Store, vcs_id: str, clones_dir: Path | None = None) -> Path:
    base = clones_dir if clones_dir is not None else store.datadir / "clones"
    return base / f"{vcs_id}.git"


def repo_path_for(store: Store, vcs_id: str, clones_dir: Path | None = None) -> Path:
    """Locate a usable repository for a vcs_system: local mirror first, the
    URL itself when it points at a local repo, the archived tarball last."""
    vcs = store.get("vcs_system", vcs_id)
    if vcs is None:
        raise NotFoundError(f"no vcs_system {vcs_id}")
    mirror = clone_path(store, vcs_id, clones_dir)
    if gitio.is_repository(mirror):
        return mirror
    local = _as_local_path(vcs["url"])
    if local is not None:
        return local
    archive = vcs.get("archive_ref")
    if archive and Path(archive).exists():
        mirror.parent.mkdir(parents=True, exist_ok=True)
        extracted = gitio.extract_archive(Path(archive), mirror.parent / f"{vcs_id}.extract")
        extracted.rename(mirror)
        return mirror
    raise MissingCloneError(f"no clone or archive available for {vcs['url']}")


def _ensure_repo(store: Store, vcs_id: str, url: str, source: str | None, clones_dir: Path | None) -> Path:
    src = source if source is not None else url
    local = _as_local_path(src)
    if local is not None:
        return local
    mirror = clone_path(store, vcs_id, clones_dir)
    if not gitio.is_repository(mirror):
        gitio.mirror_clone(src, mirror)
    return mirror


def harvest_vcs(
    store: Store,
    project: str,
    url: str,
    *,
    source: str | None = None,
    clones_dir: Path | None = None,
) -> dict:
    """Harvest every commit reachable from any branch head.

    Per commit the write order is people, files, actions, hunks, then the
    commit document itself, so a commit's presence implies its change set
    is complete; an interrupted run repairs itself on re-run because all
    ids are deterministic.
    """
    project_id = ensure_project(store, project)
    vcs_id = ensure_vcs_system(store, project_id, url)
    repo = _ensure_repo(store, vcs_id, url, source, clones_dir)

    heads = gitio.list_heads(repo)
    hashes = gitio.rev_list(repo, [tip for _, tip in heads])
    membership: dict[str, list[str]] = {h: [] for h in hashes}
    for name, tip in heads:
        for h in gitio.reachable_set(repo, tip):
            membership[h].append(name)

    raw_commits = gitio.read_commits(repo, hashes)
    file_ids: dict[str, str] = {}

    def file_id(path: str) -> str:
        if path not in file_ids:
            file_ids[path] = store.upsert("file", {"vcs_system_id": vcs_id, "path": path})
        return file_ids[path]

    max_committer = None
    for h in reversed(hashes):  # parents before children
        raw = raw_commits[h]
        if max_committer is None or raw.committer.timestamp > max_committer:
            max_committer = raw.committer.timestamp
        author_id = store.upsert("person", {"name": raw.author.name, "email": raw.author.email})
        committer_id = store.upsert("person", {"name": raw.committer.name, "email": raw.committer.email})
        existing = store.get_by_key("commit", vcs_system_id=vcs_id, revision_hash=h)
        is_merge = len(raw.parents) > 1
        if existing is None and not is_merge:
            _store_changes(store, repo, vcs_id, h, raw.parents, file_id)
        store.upsert("commit", {
            "vcs_system_id": vcs_id,
            "revision_hash": h,
            "parent_hashes": raw.parents,
            "author_person_id": author_id,
            "committer_person_id": committer_id,
            "author_date": raw.author.timestamp,
            "author_offset_minutes": raw.author.offset_minutes,
            "committer_date": raw.committer.timestamp,
            "committer_offset_minutes": raw.committer.offset_minutes,
            "message": raw.message,
            "branches": sorted(membership[h]),
            "labels": existing["labels"] if existing else {},
            "is_merge": is_merge,
            "had_encoding_errors": raw.had_encoding_errors,
        })

    vcs = store.get("vcs_system", vcs_id)
    if max_committer is not None and vcs["last_harvested"] != max_committer:
        store.update("vcs_system", vcs_id, {"last_harvested": max_committer})

    commit_ids = {
        doc["id"] for doc in store.query("commit", {"vcs_system_id": vcs_id})
    }
    actions = sum(1 for a in store.query("file_action") if a["commit_id"] in commit_ids)
    return {
        "commits_stored": len(commit_ids),
        "files_stored": store.count("file", {"vcs_system_id": vcs_id}),
        "actions_stored": actions,
    }


def _store_changes(store: Store, repo: Path, vcs_id: str, commit_hash: str, parents: list[str], file_id):
    # commit doc not written yet; compute its id ahead so children can refer to it
    from .schema import doc_id

    commit_id = doc_id("commit", {"vcs_system_id": vcs_id, "revision_hash": commit_hash})
    parent = parents[0] if parents else None
    for change in gitio.diff_commit(repo, commit_hash, parent):
        fid = file_id(change.path)
        old_fid = None
        if change.status in ("R", "C"):
            old_fid = file_id(change.old_path)
        added = deleted = 0
        for hunk in change.hunks:
            for line in hunk.content.splitlines():
                if line.startswith("+"):
                    added += 1
                elif line.startswith("-"):
                    deleted += 1
        action_id = store.upsert("file_action", {
            "commit_id": commit_id,
            "file_id": fid,
            "mode": change.status,
            "old_file_id": old_fid,
            "lines_added": added,
            "lines_deleted": deleted,
            "is_binary": change.is_binary,
        })
        for hunk in change.hunks:
            store.upsert("hunk", {
                "file_action_id": action_id,
                "old_start": hunk.old_start,
                "old_lines": hunk.old_lines,
                "new_start": hunk.new_start,
                "new_lines": hunk.new_lines,
                "content": hunk.content,
                "line_labels": {},
            })


def archive_repository(
    store: Store,
    vcs_id: str,
    *,
    archives_dir: Path | None = None,
    clones_dir: Path | None = None,
) -> Path:
    """Pack a bare mirror of the repository into a gzip tarball and record
    it on the vcs_system so later operations can fall back to it."""
    repo = repo_path_for(store, vcs_id, clones_dir)
    base = archives_dir if archives_dir is not None else store.datadir / "archives"
    dest = base / f"{vcs_id}.tar.gz"
    gitio.archive_bare(repo, dest)
    vcs = store.get("vcs_system", vcs_id)
    if vcs["archive_ref"] != str(dest):
        store.update("vcs_system", vcs_id, {"archive_ref": str(dest)})
    return dest


def blame_lines(
    store: Store,
    vcs_id: str,
    revision: str,
    path: str,
    lines: list[int],
    *,
    clones_dir: Path | None = None,
) -> list[dict]:
    """Blame specific lines of path at revision, following renames.

    Returns one record per requested line with the origin revision, the
    line number it had there, and the path the file had there.
    """
    repo = repo_path_for(store, vcs_id, clones_dir)
    full = gitio.blame_file(repo, revision, path)
    out = []
    for n in lines:
        if n not in full:
            raise LineRangeError(f"line {n} out of range for {path} at {revision}")
        sha, orig_line, orig_path = full[n]
        out.append({
            "line": n,
            "origin_revision": sha,
            "origin_line": orig_line,
            "origin_path": orig_path,
        })
    return out
