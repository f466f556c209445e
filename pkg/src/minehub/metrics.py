"""Per-file line metrics and import extraction for Java and Python.

The line classifier is a character scanner, not a parser: it tracks
string and comment state well enough to honor the code-precedence rule
(a line with any code counts as code) and never raises, because the
SZZ comment filter and the SATD detector both depend on it giving a
total classification for arbitrary repository content.
"""

from __future__ import annotations

import ast
import logging
import re
from pathlib import Path

from . import gitio
from .errors import NotFoundError
from .store import Store
from .vcs import repo_path_for

log = logging.getLogger(__name__)

EXTENSION_LANGUAGES = {".java": "java", ".py": "python"}


def language_for(path: str) -> str:
    return EXTENSION_LANGUAGES.get(Path(path).suffix.lower(), "unknown")


def classify_lines(content: str, language: str) -> list[str]:
    """Classify each line as code, comment, or blank.

    Mixed lines are code. Lines inside an open block comment (or inside a
    Python docstring, meaning a triple-quoted string with nothing before
    it on its opening line) are comments, including empty ones: the block
    spans them. Unknown languages have no comment syntax here.
    """
    lines = content.splitlines()
    if language == "java":
        return _classify_java(lines)
    if language == "python":
        return _classify_python(lines)
    return ["code" if line.strip() else "blank" for line in lines]


def _classify_java(lines: list[str]) -> list[str]:
    out = []
    in_block = False
    for line in lines:
        has_code = False
        has_comment = in_block
        in_str = in_char = False
        i, n = 0, len(line)
        while i < n:
            c = line[i]
            nxt = line[i + 1] if i + 1 < n else ""
            if in_block:
                if c == "*" and nxt == "/":
                    in_block = False
                    i += 2
                    continue
                i += 1
                continue
            if in_str or in_char:
                has_code = True
                quote = '"' if in_str else "'"
                if c == "\\":
                    i += 2
                    continue
                if c == quote:
                    in_str = in_char = False
                i += 1
                continue
            if c == "/" and nxt == "/":
                has_comment = True
                break  # rest of line is comment
            if c == "/" and nxt == "*":
                in_block = True
                has_comment = True
                i += 2
                continue
            if c == '"':
                in_str = True
                has_code = True
            elif c == "'":
                in_char = True
                has_code = True
            elif not c.isspace():
                has_code = True
            i += 1
        out.append("code" if has_code else "comment" if has_comment else "blank")
    return out


def _classify_python(lines: list[str]) -> list[str]:
    out = []
    in_triple: str | None = None
    triple_is_doc = False
    for line in lines:
        has_code = in_triple is not None and not triple_is_doc
        has_comment = in_triple is not None and triple_is_doc
        in_short: str | None = None
        i, n = 0, len(line)
        while i < n:
            c = line[i]
            if in_triple is not None:
                if line.startswith(in_triple, i):
                    i += 3
                    in_triple = None
                    continue
                if c == "\\":
                    i += 2
                    continue
                i += 1
                continue
            if in_short is not None:
                has_code = True
                if c == "\\":
                    i += 2
                    continue
                if c == in_short:
                    in_short = None
                i += 1
                continue
            if c == "#":
                has_comment = True
                break
            if line.startswith('"""', i) or line.startswith("'''", i):
                in_triple = line[i : i + 3]
                triple_is_doc = not has_code and not line[:i].strip()
                if triple_is_doc:
                    has_comment = True
                else:
                    has_code = True
                i += 3
                continue
            if c in ("'", '"'):
                in_short = c
                has_code = True
            elif not c.isspace():
                has_code = True
            i += 1
        out.append("code" if has_code else "comment" if has_comment else "blank")
    return out


_JAVA_IMPORT = re.compile(r"^\s*import\s+(?:static\s+)?([A-Za-z_][\w.]*(?:\.\*)?)\s*;")
_PY_IMPORT = re.compile(r"^\s*import\s+([A-Za-z_][\w.]*)")
_PY_FROM = re.compile(r"^\s*from\s+([.\w]+)\s+import\s+(.+)$")


def extract_imports(content: str, language: str) -> list[str]:
    """Imports in one dotted form per entry, sorted and de-duplicated.

    Java keeps the dotted path as written (without the semicolon); Python
    renders `from A import B` as "A.B" and `import A as X` as "A", with
    leading dots kept for relative imports.
    """
    if language == "java":
        found = set()
        for line, kind in zip(content.splitlines(), classify_lines(content, "java")):
            if kind != "code":
                continue
            m = _JAVA_IMPORT.match(line)
            if m:
                found.add(m.group(1))
        return sorted(found)
    if language == "python":
        return sorted(_python_imports(content))
    return []


def _python_imports(content: str) -> set[str]:
    try:
        tree = ast.parse(content)
    except (SyntaxError, ValueError):
        return _python_imports_fallback(content)
    found: set[str] = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            for alias in node.names:
                found.add(alias.name)
        elif isinstance(node, ast.ImportFrom):
            base = "." * node.level + (node.module or "")
            for alias in node.names:
                joiner = "" if base.endswith(".") or not base else "."
                found.add(f"{base}{joiner}{alias.name}")
    return found


def _python_imports_fallback(content: str) -> set[str]:
    """Line-based salvage for files the parser rejects (broken or ancient
    syntax). Parenthesized from-imports spanning lines are not chased."""
    found: set[str] = set()
    for line in content.splitlines():
        m = _PY_IMPORT.match(line)
        if m:
            found.add(m.group(1))
            continue
        m = _PY_FROM.match(line)
        if m:
            base = m.group(1)
            names = m.group(2).split("#")[0].strip().strip("()")
            for piece in names.split(","):
                name = piece.strip().split(" as ")[0].strip()
                if name and re.match(r"^[\w.*]+$", name):
                    joiner = "" if base.endswith(".") else "."
                    found.add(f"{base}{joiner}{name}")
    return found


def measure(content: str, language: str) -> dict:
    """Metrics map for one file version. Supported languages get the full
    additive breakdown (lloc + cloc + blank = total_lines); anything else
    gets total_lines only."""
    lines = content.splitlines()
    if language not in ("java", "python"):
        return {"total_lines": len(lines)}
    kinds = classify_lines(content, language)
    return {
        "lloc": kinds.count("code"),
        "cloc": kinds.count("comment"),
        "blank": kinds.count("blank"),
        "total_lines": len(lines),
    }


def eligible_tree_entries(repo: Path, revision: str) -> list[tuple[str, str]]:
    """Non-binary blobs in the tree at revision: the exact scope both this
    module measures and the consistency audit checks."""
    return [
        (path, blob)
        for path, blob in gitio.ls_tree(repo, revision)
        if not gitio.blob_is_binary(repo, blob)
    ]


def compute_metrics(store: Store, commit_id: str, *, clones_dir: Path | None = None) -> dict:
    commit = store.get("commit", commit_id)
    if commit is None:
        raise NotFoundError(f"no commit {commit_id}")
    repo = repo_path_for(store, commit["vcs_system_id"], clones_dir)
    measured = 0
    for path, blob in eligible_tree_entries(repo, commit["revision_hash"]):
        try:
            content = gitio.cat_blob(repo, blob).decode("utf-8", errors="replace")
        except Exception as exc:  # unreadable blob: record and move on
            log.warning("skipping unreadable %s at %s: %s", path, commit["revision_hash"], exc)
            continue
        language = language_for(path)
        file_id = store.upsert("file", {"vcs_system_id": commit["vcs_system_id"], "path": path})
        store.upsert("metric_record", {
            "commit_id": commit_id,
            "file_id": file_id,
            "metrics": measure(content, language),
            "imports": extract_imports(content, language),
        })
        measured += 1
    return {"files_measured": measured}
