"""Command line entry point.

Every subcommand prints exactly one JSON summary line on stdout and logs
on stderr. Exit codes: 0 success, 1 domain error, 2 usage error.
Data directory resolution: --datadir flag, then MINEHUB_DATADIR, then a
`datadir` key in ./minehub.toml, then ./minehub-data.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import dataset, gitio, identity, labels, linking, metrics, pipeline, server, tracker, vcs
from .errors import MinehubError
from .store import Store

log = logging.getLogger("minehub")

DEFAULT_DATADIR = "minehub-data"


def _read_flat_config(path: Path) -> dict:
    """Parse the flat `key = value` subset of a TOML file: quoted strings,
    integers, floats, and true/false. Tables and arrays are ignored."""
    values: dict = {}
    if not path.is_file():
        return values
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("["):
            continue
        if "=" not in line:
            continue
        key, _, rest = line.partition("=")
        key = key.strip()
        rest = rest.strip()
        if rest.startswith('"') and '"' in rest[1:]:
            values[key] = rest[1:rest.index('"', 1)]
        elif rest in ("true", "false"):
            values[key] = rest == "true"
        else:
            token = rest.split("#")[0].strip()
            try:
                values[key] = int(token)
            except ValueError:
                try:
                    values[key] = float(token)
                except ValueError:
                    continue
    return values


def resolve_datadir(flag_value: str | None) -> Path:
    if flag_value:
        return Path(flag_value)
    env = os.environ.get("MINEHUB_DATADIR")
    if env:
        return Path(env)
    config = _read_flat_config(Path("minehub.toml"))
    if isinstance(config.get("datadir"), str):
        return Path(config["datadir"])
    return Path(DEFAULT_DATADIR)


def _emit(doc) -> None:
    print(json.dumps(doc, sort_keys=True), flush=True)


def _patterns_from(path: str | None, default: tuple) -> tuple:
    if path is None:
        return default
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    patterns = tuple(line.strip() for line in lines if line.strip())
    return patterns or default


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minehub",
        description="Mine git and issue-tracker history into an embedded "
                    "document store and enrich it for defect research.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, help_text, **kwargs):
        p = sub.add_parser(name, help=help_text, **kwargs)
        p.add_argument("--datadir", help="store directory (default: resolved from "
                                         "MINEHUB_DATADIR or minehub.toml)")
        return p

    p = add("harvest-vcs", "clone or read a git repository and store its history")
    p.add_argument("--project", required=True)
    p.add_argument("--url", required=True, help="git URL or local path")

    p = add("harvest-issues", "fetch issues from a tracker or an offline fixture")
    p.add_argument("--project", required=True)
    p.add_argument("--tracker", required=True, choices=("jira", "github"))
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--url", help="tracker API base URL")
    source.add_argument("--fixture", help="line-delimited payload file")
    p.add_argument("--auth-token-env", metavar="VAR",
                   help="environment variable holding the API token")

    p = add("link", "connect commits to the issues their messages reference")
    p.add_argument("--project", required=True)

    p = add("induce", "trace fixed lines back to the changes that introduced them")
    p.add_argument("--project", required=True)
    p.add_argument("--min-confidence", type=int, default=2)
    p.add_argument("--validated-only", action="store_true",
                   help="only follow links a human marked valid")

    p = add("label", "derive commit labels from messages, paths, and diffs")
    p.add_argument("--project", required=True)
    p.add_argument("--refactoring-keywords", metavar="FILE",
                   help="override keyword list, one per line")
    p.add_argument("--satd-patterns", metavar="FILE",
                   help="override self-admitted debt patterns, one per line")

    p = add("identify", "merge author identities across name and email variants")
    p.add_argument("--project", required=True)

    p = add("metrics", "compute per-file size metrics and imports")
    p.add_argument("--project", required=True)
    p.add_argument("--revisions", default="all",
                   help="'all' or a git revision expression (hash, tag, A..B)")

    p = add("run", "run stages as retried jobs on a worker pool")
    p.add_argument("--project", required=True)
    p.add_argument("--stages", required=True,
                   help="comma-separated stage kinds, run in order")
    p.add_argument("--workers", type=int, default=4)

    p = add("check-consistency", "audit the store against its repositories")
    p.add_argument("--project", required=True)

    p = add("estimate", "estimate compute time for a per-commit analysis")
    p.add_argument("--commits", type=int, required=True)
    p.add_argument("--minutes-per-commit", type=float, required=True)
    p.add_argument("--workers", type=int, default=1)

    p = add("export-dataset", "write a release-level defect dataset")
    p.add_argument("--project", required=True)
    p.add_argument("--release", required=True, help="revision hash or tag")
    p.add_argument("--history-days", type=int, required=True)
    p.add_argument("--label-days", type=int, required=True)
    p.add_argument("--validated-only", action="store_true")
    p.add_argument("--out", required=True)

    p = add("serve", "serve the validation API and optional UI bundle")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--ui-dir", help="directory of built UI assets to serve")

    return parser


def _open_store(args) -> Store:
    return Store(resolve_datadir(args.datadir))


def cmd_harvest_vcs(args) -> dict:
    return vcs.harvest_vcs(_open_store(args), args.project, args.url)


def cmd_harvest_issues(args) -> dict:
    token = None
    if args.auth_token_env:
        token = os.environ.get(args.auth_token_env)
        if not token:
            raise MinehubError(f"environment variable {args.auth_token_env} is empty")
    return tracker.harvest_issues(
        _open_store(args), args.project, args.tracker,
        url=args.url, fixture=args.fixture, token=token)


def cmd_link(args) -> dict:
    return linking.link_commits_to_issues(_open_store(args), args.project)


def cmd_induce(args) -> dict:
    return linking.detect_inducing(
        _open_store(args), args.project,
        min_confidence=args.min_confidence,
        require_validated=args.validated_only)


def cmd_label(args) -> dict:
    return labels.label_commits(
        _open_store(args), args.project,
        refactoring_keywords=_patterns_from(args.refactoring_keywords,
                                            labels.REFACTORING_KEYWORDS),
        satd_patterns=_patterns_from(args.satd_patterns, labels.SATD_PATTERNS))


def cmd_identify(args) -> dict:
    return identity.merge_identities(_open_store(args), args.project)


def _metric_targets(store: Store, project: str, expression: str) -> list[dict]:
    project_doc = store.get_by_key("project", name=project)
    if project_doc is None:
        raise MinehubError(f"no project named {project!r}")
    systems = store.query("vcs_system", {"project_id": project_doc["id"]})
    commits = [c for c in store.query("commit")
               if c["vcs_system_id"] in {s["id"] for s in systems}]
    if expression == "all":
        return commits
    wanted: set[str] = set()
    for system in systems:
        try:
            repo = vcs.repo_path_for(store, system["id"])
            if ".." in expression:
                wanted.update(gitio.rev_list(repo, [expression]))
            else:
                wanted.add(gitio.resolve_revision(repo, expression))
        except MinehubError:
            continue
    matched = [c for c in commits if c["revision_hash"] in wanted]
    if not matched:
        raise MinehubError(f"revision expression {expression!r} matches no stored commits")
    return matched


def cmd_metrics(args) -> dict:
    store = _open_store(args)
    targets = _metric_targets(store, args.project, args.revisions)
    files_measured = 0
    for commit in targets:
        files_measured += metrics.compute_metrics(store, commit["id"])["files_measured"]
    return {"commits_measured": len(targets), "files_measured": files_measured}


def cmd_run(args) -> dict:
    stages = [s.strip() for s in args.stages.split(",") if s.strip()]
    return pipeline.run_pipeline(_open_store(args), args.project, stages,
                                 workers=args.workers)


def cmd_check_consistency(args) -> dict:
    return pipeline.check_consistency(_open_store(args), args.project)


def cmd_estimate(args) -> dict:
    return pipeline.estimate_runtime(args.commits, args.minutes_per_commit, args.workers)


def cmd_export_dataset(args) -> dict:
    return dataset.export_release(
        _open_store(args), args.project, args.release, args.out,
        history_window_days=args.history_days,
        label_window_days=args.label_days,
        validated_only=args.validated_only)


def cmd_serve(args) -> dict:
    store = _open_store(args)
    srv = server.ValidationServer(store, args.host, args.port, ui_dir=args.ui_dir)
    _emit({"listening": f"http://{args.host}:{srv.port}", "datadir": str(store.datadir)})
    try:
        srv.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        srv.server_close()
    return {"stopped": True}


COMMANDS = {
    "harvest-vcs": cmd_harvest_vcs,
    "harvest-issues": cmd_harvest_issues,
    "link": cmd_link,
    "induce": cmd_induce,
    "label": cmd_label,
    "identify": cmd_identify,
    "metrics": cmd_metrics,
    "run": cmd_run,
    "check-consistency": cmd_check_consistency,
    "estimate": cmd_estimate,
    "export-dataset": cmd_export_dataset,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        summary = COMMANDS[args.command](args)
    except MinehubError as exc:
        log.error("%s", exc.message)
        _emit({"error": exc.to_doc()})
        partial = getattr(exc, "summary", None)
        if partial is not None:
            _emit(partial)
        return 1
    except ValueError as exc:
        print(f"minehub: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        log.error("%s", exc)
        _emit({"error": {"code": "io-error", "message": str(exc)}})
        return 1
    if args.command != "serve":
        _emit(summary)
    return 0
