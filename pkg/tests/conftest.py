"""Shared fixtures: scripted git repositories with pinned dates and
identities so every derived value (hashes, counts, blame) is stable."""

from __future__ import annotations

import subprocess
from pathlib import Path

import pytest

from minehub.times import to_datetime


def _epoch(canonical: str, offset: str = "+0000") -> str:
    return f"{int(to_datetime(canonical).timestamp())} {offset}"


class GitRepo:
    """Thin scripting harness over a real git working repository."""

    def __init__(self, path: Path, default_branch: str = "master"):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.git("init", "-q", "-b", default_branch)
        self.git("config", "user.name", "Fixture")
        self.git("config", "user.email", "fixture@example.org")
        self.git("config", "commit.gpgsign", "false")

    def git(self, *args: str, env: dict | None = None, check: bool = True,
            input: bytes | None = None) -> str:
        import os

        full_env = dict(os.environ)
        if env:
            full_env.update(env)
        proc = subprocess.run(
            ["git", *args], cwd=str(self.path), input=input,
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, env=full_env,
        )
        if check and proc.returncode != 0:
            raise AssertionError(
                f"git {' '.join(args)} failed: {proc.stderr.decode(errors='replace')}"
            )
        return proc.stdout.decode("utf-8", errors="replace")

    def write(self, rel: str, content: str | bytes):
        target = self.path / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(content, bytes):
            target.write_bytes(content)
        else:
            target.write_text(content)

    def remove(self, rel: str):
        self.git("rm", "-q", rel)

    def move(self, src: str, dst: str):
        (self.path / dst).parent.mkdir(parents=True, exist_ok=True)
        self.git("mv", src, dst)

    def commit(
        self,
        message: str,
        *,
        date: str,
        author: tuple[str, str] = ("Ada Lovelace", "ada@example.org"),
        committer: tuple[str, str] | None = None,
        offset: str = "+0000",
        message_bytes: bytes | None = None,
    ) -> str:
        committer = committer or author
        self.git("add", "-A")
        env = {
            "GIT_AUTHOR_NAME": author[0],
            "GIT_AUTHOR_EMAIL": author[1],
            "GIT_AUTHOR_DATE": _epoch(date, offset),
            "GIT_COMMITTER_NAME": committer[0],
            "GIT_COMMITTER_EMAIL": committer[1],
            "GIT_COMMITTER_DATE": _epoch(date, offset),
        }
        if message_bytes is not None:
            # porcelain `commit` and even commit-tree transcode to UTF-8 here;
            # hash-object stores the object verbatim
            tree = self.git("write-tree").strip()
            epoch = _epoch(date, offset)
            header = f"tree {tree}\n"
            if self.git("rev-parse", "--verify", "-q", "HEAD", check=False).strip():
                header += f"parent {self.head()}\n"
            header += f"author {author[0]} <{author[1]}> {epoch}\n"
            header += f"committer {committer[0]} <{committer[1]}> {epoch}\n\n"
            raw = header.encode("utf-8") + message_bytes
            sha = self.git("hash-object", "-t", "commit", "-w", "--stdin",
                           "--literally", input=raw).strip()
            branch = self.git("symbolic-ref", "--short", "HEAD").strip()
            self.git("update-ref", f"refs/heads/{branch}", sha)
        else:
            self.git("commit", "-q", "--allow-empty", "-m", message, env=env)
        return self.head()

    def head(self) -> str:
        return self.git("rev-parse", "HEAD").strip()

    def branch(self, name: str, at: str | None = None):
        self.git("branch", name, *( [at] if at else [] ))

    def checkout(self, name: str):
        self.git("checkout", "-q", name)

    def merge(
        self,
        other: str,
        message: str,
        *,
        date: str,
        author: tuple[str, str] = ("Ada Lovelace", "ada@example.org"),
    ) -> str:
        env = {
            "GIT_AUTHOR_NAME": author[0],
            "GIT_AUTHOR_EMAIL": author[1],
            "GIT_AUTHOR_DATE": _epoch(date),
            "GIT_COMMITTER_NAME": author[0],
            "GIT_COMMITTER_EMAIL": author[1],
            "GIT_COMMITTER_DATE": _epoch(date),
        }
        self.git("merge", "-q", "--no-ff", "-m", message, other, env=env)
        return self.head()


@pytest.fixture
def linear_repo(tmp_path: Path) -> GitRepo:
    """Three commits on master: adds, a modify, a delete."""
    repo = GitRepo(tmp_path / "linear")
    repo.write("src/app.py", "def main():\n    return 1\n\n\ndef helper():\n    return 2\n")
    repo.write("README.md", "# demo\n\na small fixture project\n")
    repo.commit("Initial import", date="2020-01-05T10:00:00Z")
    repo.write("src/app.py", "def main():\n    return 42\n\n\ndef helper():\n    return 2\n\n\ndef extra():\n    return 3\n")
    repo.write("src/util.py", "VALUE = 7\n")
    repo.commit("Rework main and add util", date="2020-01-06T11:30:00Z",
                author=("Grace Hopper", "grace@example.org"))
    repo.remove("README.md")
    repo.write("src/util.py", "VALUE = 7\nLIMIT = 9\n")
    repo.commit("Drop readme, add limit", date="2020-01-07T09:15:00Z")
    return repo


@pytest.fixture
def branch_merge_repo(tmp_path: Path) -> GitRepo:
    """master and feature diverge then merge; merge commit has two parents."""
    repo = GitRepo(tmp_path / "branchy")
    repo.write("core.java", "class Core {\n    int size() {\n        return 0;\n    }\n}\n")
    repo.commit("Add core", date="2021-03-01T08:00:00Z")
    repo.branch("feature")
    repo.checkout("feature")
    repo.write("feat.java", "class Feat {\n}\n")
    repo.write("core.java", "class Core {\n    int size() {\n        return 1;\n    }\n}\n")
    repo.commit("Grow feature", date="2021-03-02T08:00:00Z",
                author=("Grace Hopper", "grace@example.org"))
    repo.checkout("master")
    repo.write("notes.txt", "independent mainline work\n")
    repo.commit("Mainline notes", date="2021-03-03T08:00:00Z")
    repo.merge("feature", "Merge feature into master", date="2021-03-04T08:00:00Z")
    return repo


def jira_payload(
    key: str,
    *,
    summary: str,
    created: str,
    updated: str,
    issue_type: str = "Bug",
    resolution: str | None = "Fixed",
    assignee: tuple[str, str] | None = None,
    description: str = "",
) -> dict:
    fields = {
        "summary": summary,
        "description": description,
        "issuetype": {"name": issue_type},
        "status": {"name": "Closed" if resolution else "Open"},
        "resolution": {"name": resolution} if resolution else None,
        "reporter": {"displayName": "Rita Reporter", "emailAddress": "rita@example.org"},
        "created": created,
        "updated": updated,
    }
    if assignee:
        fields["assignee"] = {"displayName": assignee[0], "emailAddress": assignee[1]}
    return {"key": key, "fields": fields}


CALC_V1 = "class Calc {\n    int total() {\n        return 1 + 1;\n    }\n}\n"
CALC_V2 = 'class Calc {\n    int total() {\n        log("t");\n        return 1 + 1;\n    }\n}\n'
CALC_V3 = ('class Calc {\n    // audit note\n    int total() {\n        log("t");\n'
           "        return 1 + 1;\n    }\n}\n")
CALC_V4 = ('class Calc {\n\n    // audit note\n    int total() {\n        log("t");\n'
           "        return 1 + 1;\n    }\n}\n")
CALC_V5 = "class Calc {\n    int total() {\n        return 2;\n    }\n}\n"


@pytest.fixture
def szz_repo(tmp_path: Path) -> GitRepo:
    """Timeline for inducing-change detection.

    K1 (faulty line) precedes the bug report; K2, Kc, Kw follow it and add
    a code line, a comment line, and a blank line. The fix deletes all
    four, so blame yields one candidate of each label. The second fix
    only adds a line (nothing to blame).
    """
    repo = GitRepo(tmp_path / "szz")
    repo.write("calc.java", CALC_V1)
    repo.commit("Add calculator", date="2023-01-10T10:00:00Z")                      # K1
    repo.write("calc.java", CALC_V2)
    repo.commit("Add logging", date="2023-02-10T10:00:00Z",
                author=("Grace Hopper", "grace@example.org"))                        # K2
    repo.write("calc.java", CALC_V3)
    repo.commit("Note audit", date="2023-02-20T10:00:00Z")                           # Kc
    repo.write("calc.java", CALC_V4)
    repo.commit("Spacing", date="2023-03-01T10:00:00Z")                              # Kw
    repo.write("calc.java", CALC_V5)
    repo.commit("Fixed JCALC-7: correct total", date="2023-04-01T10:00:00Z")         # FIX
    repo.write("guard.java", "class Guard {\n    void check() {\n    }\n}\n")
    repo.commit("Fixed JCALC-8: guard input", date="2023-04-05T10:00:00Z")           # ADD-ONLY FIX
    return repo


SZZ_ISSUES = [
    jira_payload("JCALC-7", summary="total is wrong",
                 created="2023-01-20T00:00:00Z", updated="2023-04-02T00:00:00Z"),
    jira_payload("JCALC-8", summary="missing input guard",
                 created="2023-01-25T00:00:00Z", updated="2023-04-06T00:00:00Z"),
]


@pytest.fixture
def rename_chain_repo(tmp_path: Path) -> GitRepo:
    """alpha.txt renamed to beta.txt, edited, then renamed again with an edit."""
    repo = GitRepo(tmp_path / "renames")
    repo.write("alpha.txt", "first line\nsecond line\nthird line\nfourth line\n")
    repo.commit("Create alpha", date="2022-06-01T12:00:00Z")
    repo.move("alpha.txt", "beta.txt")
    repo.commit("Rename alpha to beta", date="2022-06-02T12:00:00Z")
    repo.write("beta.txt", "first line\nsecond line\nthird line\nfourth line\nfifth line\n")
    repo.commit("Append fifth line", date="2022-06-03T12:00:00Z",
                author=("Grace Hopper", "grace@example.org"))
    repo.move("beta.txt", "gamma/delta.txt")
    repo.write("gamma/delta.txt", "first line\nsecond line\nthird line (edited)\nfourth line\nfifth line\n")
    repo.commit("Move into gamma and edit", date="2022-06-04T12:00:00Z")
    return repo
