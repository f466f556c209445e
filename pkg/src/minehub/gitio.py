"""Low-level git access via plumbing commands.

Everything the harvester, blame, metrics, and consistency audit need
from a repository goes through here: commit objects are read with
`cat-file --batch`, change sets with `diff-tree --raw -z` plus the patch
output for hunks, blame with `blame --porcelain`. Binary detection uses
the same first-8000-bytes NUL probe everywhere so harvest, metrics, and
audit always agree on which files are eligible.
"""

from __future__ import annotations

import re
import subprocess
import tarfile
from dataclasses import dataclass, field
from pathlib import Path

from .errors import PathMissingError, RepositoryError, UnknownRevisionError
from .times import from_epoch

_SIGNATURE = re.compile(r"^(.*) <(.*)> (\d+) ([+-])(\d{2})(\d{2})$")

BINARY_PROBE_BYTES = 8000


def run_git(args: list[str], cwd: str | Path, *, check: bool = True) -> bytes:
    proc = subprocess.run(
        ["git", *args],
        cwd=str(cwd),
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
    )
    if check and proc.returncode != 0:
        stderr = proc.stderr.decode("utf-8", errors="replace").strip()
        raise RepositoryError(f"git {' '.join(args)} failed: {stderr}")
    return proc.stdout


def run_git_text(args: list[str], cwd: str | Path, *, check: bool = True) -> str:
    return run_git(args, cwd, check=check).decode("utf-8", errors="replace")


def is_repository(path: str | Path) -> bool:
    p = Path(path)
    if not p.is_dir():
        return False
    proc = subprocess.run(
        ["git", "rev-parse", "--git-dir"],
        cwd=str(p), stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
    )
    return proc.returncode == 0


def mirror_clone(source: str, dest: Path):
    """Bare mirror clone: maps the source's refs/heads 1:1, which keeps
    branch listings identical between a harvested URL and a local repo."""
    dest.parent.mkdir(parents=True, exist_ok=True)
    proc = subprocess.run(
        ["git", "clone", "--mirror", "--quiet", source, str(dest)],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE,
    )
    if proc.returncode != 0:
        stderr = proc.stderr.decode("utf-8", errors="replace").strip()
        raise RepositoryError(f"clone of {source} failed: {stderr}")


def list_heads(repo: Path) -> list[tuple[str, str]]:
    """(branch name, tip hash) for every refs/heads ref."""
    out = run_git_text(
        ["for-each-ref", "--format=%(refname:short) %(objectname)", "refs/heads"],
        repo,
    )
    heads = []
    for line in out.splitlines():
        name, _, tip = line.rpartition(" ")
        if name:
            heads.append((name, tip))
    return heads


def rev_list(repo: Path, tips: list[str]) -> list[str]:
    if not tips:
        return []
    out = run_git_text(["rev-list", "--topo-order", *tips], repo)
    return out.split()


def reachable_set(repo: Path, tip: str) -> set[str]:
    return set(run_git_text(["rev-list", tip], repo).split())


@dataclass
class RawSignature:
    name: str
    email: str
    timestamp: str  # canonical UTC
    offset_minutes: int


@dataclass
class RawCommit:
    hash: str
    parents: list[str]
    author: RawSignature
    committer: RawSignature
    message: str
    had_encoding_errors: bool


def _parse_signature(line: str) -> RawSignature:
    m = _SIGNATURE.match(line)
    if not m:
        raise RepositoryError(f"unparseable signature line: {line!r}")
    name, email, epoch, sign, hh, mm = m.groups()
    offset = int(hh) * 60 + int(mm)
    if sign == "-":
        offset = -offset
    return RawSignature(name=name, email=email, timestamp=from_epoch(int(epoch)), offset_minutes=offset)


def _decode(raw: bytes) -> tuple[str, bool]:
    try:
        return raw.decode("utf-8"), False
    except UnicodeDecodeError:
        return raw.decode("utf-8", errors="replace"), True


def read_commits(repo: Path, hashes: list[str]) -> dict[str, RawCommit]:
    """Read commit objects in one cat-file --batch round trip."""
    if not hashes:
        return {}
    stdin = "\n".join(hashes).encode() + b"\n"
    proc = subprocess.run(
        ["git", "cat-file", "--batch"],
        cwd=str(repo), input=stdin,
        stdout=subprocess.PIPE, stderr=subprocess.PIPE,
    )
    if proc.returncode != 0:
        raise RepositoryError(f"cat-file --batch failed: {proc.stderr.decode(errors='replace')}")
    out = proc.stdout
    commits: dict[str, RawCommit] = {}
    pos = 0
    for expected in hashes:
        nl = out.index(b"\n", pos)
        header = out[pos:nl].decode()
        pos = nl + 1
        parts = header.split()
        if parts[-1] == "missing":
            raise UnknownRevisionError(f"unknown revision: {expected}")
        oid, otype, size = parts[0], parts[1], int(parts[2])
        body = out[pos : pos + size]
        pos = pos + size + 1  # trailing newline after each object
        if otype != "commit":
            raise RepositoryError(f"{oid} is a {otype}, expected commit")
        commits[oid] = _parse_commit_object(oid, body)
    return commits


def _parse_commit_object(oid: str, body: bytes) -> RawCommit:
    text, enc_errors = _decode(body)
    head, _, message = text.partition("\n\n")
    parents: list[str] = []
    author = committer = None
    last_key = None
    for line in head.split("\n"):
        if line.startswith(" "):  # continuation (gpgsig etc.)
            continue
        key, _, value = line.partition(" ")
        last_key = key
        if key == "parent":
            parents.append(value)
        elif key == "author":
            author = _parse_signature(value)
        elif key == "committer":
            committer = _parse_signature(value)
    if author is None or committer is None:
        raise RepositoryError(f"commit {oid} lacks author/committer")
    return RawCommit(
        hash=oid, parents=parents, author=author, committer=committer,
        message=message, had_encoding_errors=enc_errors,
    )


@dataclass
class RawHunk:
    old_start: int
    old_lines: int
    new_start: int
    new_lines: int
    content: str  # body lines incl. prefixes, no @@ header


@dataclass
class FileChange:
    status: str  # A M D R C
    old_path: str | None
    new_path: str | None
    old_blob: str | None
    new_blob: str | None
    is_binary: bool = False
    hunks: list[RawHunk] = field(default_factory=list)

    @property
    def path(self) -> str:
        return self.new_path if self.new_path is not None else self.old_path


_NULL_SHA_RE = re.compile(r"^0+$")
_HUNK_HEADER = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


def _clean_blob(sha: str) -> str | None:
    return None if _NULL_SHA_RE.match(sha) else sha


def diff_commit(repo: Path, commit: str, parent: str | None) -> list[FileChange]:
    """File-level changes of a commit vs. its (first) parent, rename and
    copy detection at 60% similarity; root commits diff against the empty
    tree. Returns binary files with no hunks and zero-able line counts."""
    base = ["diff-tree", "-r", "--root", "-M60%", "-C60%", "--no-color"]
    target = [parent, commit] if parent else [commit]
    raw = run_git(base + ["--raw", "-z"] + target, repo)
    changes = _parse_raw_z(raw)
    if not changes:
        return []
    patch = run_git_text(base + ["-p", "--full-index"] + target, repo)
    hunk_map = _parse_patch(patch)
    for change in changes:
        probe_blob = change.new_blob or change.old_blob
        change.is_binary = probe_blob is not None and blob_is_binary(repo, probe_blob)
        if not change.is_binary:
            change.hunks = hunk_map.get((change.old_path, change.new_path), [])
    return changes


def _parse_raw_z(raw: bytes) -> list[FileChange]:
    fields = raw.decode("utf-8", errors="replace").split("\0")
    changes = []
    i = 0
    while i < len(fields):
        meta = fields[i]
        if not meta:
            i += 1
            continue
        if not meta.startswith(":"):
            i += 1  # leading commit hash line from diff-tree
            continue
        old_mode, new_mode, old_blob, new_blob, status = meta[1:].split(" ")
        letter = status[0]
        if old_mode == "160000" or new_mode == "160000":
            # submodule pointer, out of scope
            i += 2 + (1 if letter in ("R", "C") else 0)
            continue
        if letter in ("R", "C"):
            old_path, new_path = fields[i + 1], fields[i + 2]
            i += 3
        else:
            path = fields[i + 1]
            i += 2
            if letter == "A":
                old_path, new_path = None, path
            elif letter == "D":
                old_path, new_path = path, None
            else:  # M, T
                letter = "M"
                old_path, new_path = path, path
        changes.append(FileChange(
            status=letter, old_path=old_path, new_path=new_path,
            old_blob=_clean_blob(old_blob), new_blob=_clean_blob(new_blob),
        ))
    return changes


def _unquote_path(token: str) -> str | None:
    if token == "/dev/null":
        return None
    if token.startswith('"') and token.endswith('"'):
        token = token[1:-1].encode("utf-8").decode("unicode_escape").encode("latin-1").decode("utf-8")
    # strip the a/ or b/ prefix
    return token[2:] if token[1:2] == "/" else token


def _parse_patch(patch: str) -> dict[tuple[str | None, str | None], list[RawHunk]]:
    hunks: dict[tuple[str | None, str | None], list[RawHunk]] = {}
    old_path = new_path = None
    current: list[RawHunk] | None = None
    lines = patch.split("\n")
    idx = 0
    while idx < len(lines):
        line = lines[idx]
        if line.startswith("diff --git "):
            old_path = new_path = None
            current = None
        elif line.startswith("--- "):
            old_path = _unquote_path(line[4:])
        elif line.startswith("+++ "):
            new_path = _unquote_path(line[4:])
            current = hunks.setdefault((old_path, new_path), [])
        elif line.startswith("@@") and current is not None:
            m = _HUNK_HEADER.match(line)
            if not m:
                raise RepositoryError(f"unparseable hunk header: {line!r}")
            old_start = int(m.group(1))
            old_count = int(m.group(2)) if m.group(2) is not None else 1
            new_start = int(m.group(3))
            new_count = int(m.group(4)) if m.group(4) is not None else 1
            body: list[str] = []
            idx += 1
            while idx < len(lines):
                peek = lines[idx]
                if peek.startswith(("diff --git ", "@@")) or (
                    not peek and idx == len(lines) - 1
                ):
                    break
                body.append(peek)
                idx += 1
            content = "\n".join(body)
            if content:
                content += "\n"
            current.append(RawHunk(
                old_start=old_start, old_lines=old_count,
                new_start=new_start, new_lines=new_count, content=content,
            ))
            continue
        idx += 1
    return hunks


def blob_is_binary(repo: Path, blob: str) -> bool:
    data = run_git(["cat-file", "blob", blob], repo)
    return b"\0" in data[:BINARY_PROBE_BYTES]


def cat_blob(repo: Path, blob: str) -> bytes:
    return run_git(["cat-file", "blob", blob], repo)


def ls_tree(repo: Path, rev: str) -> list[tuple[str, str]]:
    """(path, blob hash) for every blob in the tree at rev."""
    out = run_git(["ls-tree", "-r", "-z", rev], repo, check=False)
    if not out:
        probe = subprocess.run(
            ["git", "rev-parse", "--verify", f"{rev}^{{tree}}"],
            cwd=str(repo), stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
        )
        if probe.returncode != 0:
            raise UnknownRevisionError(f"unknown revision: {rev}")
        return []
    entries = []
    for record in out.decode("utf-8", errors="replace").split("\0"):
        if not record:
            continue
        meta, _, path = record.partition("\t")
        mode, otype, sha = meta.split(" ")
        if otype == "blob":
            entries.append((path, sha))
    return entries


def resolve_revision(repo: Path, rev: str) -> str:
    proc = subprocess.run(
        ["git", "rev-parse", "--verify", f"{rev}^{{commit}}"],
        cwd=str(repo), stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
    )
    if proc.returncode != 0:
        raise UnknownRevisionError(f"unknown revision: {rev}")
    return proc.stdout.decode().strip()


def blame_file(repo: Path, rev: str, path: str) -> dict[int, tuple[str, int, str]]:
    """Blame every line of path at rev following renames.

    Returns {line_no: (origin commit hash, original line no, original path)}.
    """
    resolve_revision(repo, rev)
    proc = subprocess.run(
        ["git", "blame", "--porcelain", rev, "--", path],
        cwd=str(repo), stdout=subprocess.PIPE, stderr=subprocess.PIPE,
    )
    if proc.returncode != 0:
        stderr = proc.stderr.decode("utf-8", errors="replace")
        if "no such path" in stderr or "does not exist" in stderr:
            raise PathMissingError(f"{path} absent at {rev}")
        raise RepositoryError(f"git blame failed: {stderr.strip()}")
    result: dict[int, tuple[str, int, str]] = {}
    filenames: dict[str, str] = {}
    pending: tuple[str, int, int] | None = None
    for line in proc.stdout.decode("utf-8", errors="replace").split("\n"):
        if pending is None:
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) >= 3 and re.match(r"^[0-9a-f]{40}$", parts[0]):
                pending = (parts[0], int(parts[1]), int(parts[2]))
            continue
        if line.startswith("\t"):
            sha, orig_line, final_line = pending
            result[final_line] = (sha, orig_line, filenames.get(sha, path))
            pending = None
        elif line.startswith("filename "):
            filenames[pending[0]] = line[len("filename "):]
    return result


def archive_bare(source_repo: Path, dest: Path) -> Path:
    """Write a gzip tarball of a bare mirror of source_repo. Entry metadata
    is normalized (uid/gid 0, mtime 0, sorted paths) so archives of equal
    repositories are equal."""
    import shutil
    import tempfile

    dest.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(prefix="minehub-archive-") as tmp:
        bare = Path(tmp) / "repo.git"
        mirror_clone(str(source_repo), bare)
        tmp_tar = dest.with_suffix(".tmp")
        with open(tmp_tar, "wb") as raw:
            import gzip

            with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as gz:
                with tarfile.open(fileobj=gz, mode="w", format=tarfile.PAX_FORMAT) as tar:
                    for member_path in sorted(bare.rglob("*")):
                        rel = "repo.git/" + str(member_path.relative_to(bare))
                        info = tar.gettarinfo(str(member_path), arcname=rel)
                        info.uid = info.gid = 0
                        info.uname = info.gname = ""
                        info.mtime = 0
                        if info.isreg():
                            with open(member_path, "rb") as fh:
                                tar.addfile(info, fh)
                        else:
                            tar.addfile(info)
        shutil.move(str(tmp_tar), dest)
    return dest


def extract_archive(archive: Path, dest_dir: Path) -> Path:
    with tarfile.open(archive, mode="r:gz") as tar:
        tar.extractall(dest_dir)
    return dest_dir / "repo.git"
