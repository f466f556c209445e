"""Job orchestration on a local worker pool.

Stages expand into Job documents in the ops store; a thread pool claims
them through atomic queued->running transitions, so the store is the only
shared state and any executor that honors the same transitions could be
swapped in (remote batch backends stay an interface, not an implementation).
Also home to the log-based failure sweep, the repository-vs-store
consistency audit, and the runtime estimator.
"""

from __future__ import annotations

import json
import logging
import re
import time
import traceback
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass
from pathlib import Path

from . import gitio, identity, labels, linking, metrics, tracker, vcs
from .errors import NotFoundError, StageFailedError
from .schema import JOB_KINDS, doc_id
from .store import Store
from .times import now as now_ts
from .times import parse_iso

log = logging.getLogger(__name__)

MAX_RETRIES = 2
FAILURE_THRESHOLD = 0.2
BACKOFF_BASE = 5.0
HEARTBEAT_INTERVAL = 10.0
VANISH_TIMEOUT = 120.0

# Markers a finished attempt leaves in its log. The sweep treats a nonzero
# exit or a panic/abort word as failure regardless of recorded job state.
ATTEMPT_MARKER = "-- attempt "
FAILURE_SIGNATURES = re.compile(
    r"exited with code [1-9]\d*|\bpanic\b|\babort(?:ed)?\b", re.IGNORECASE
)


@dataclass
class PipelineConfig:
    workers: int = 4
    max_retries: int = MAX_RETRIES
    failure_threshold: float = FAILURE_THRESHOLD
    backoff_base: float = BACKOFF_BASE
    heartbeat_interval: float = HEARTBEAT_INTERVAL
    vanish_timeout: float = VANISH_TIMEOUT
    clones_dir: Path | None = None
    export_revision: str | None = None


def _project_doc(store: Store, project: str) -> dict:
    doc = store.get_by_key("project", name=project)
    if doc is None:
        raise NotFoundError(f"no project named {project!r}")
    return doc


# -- job handlers --------------------------------------------------------
# Each handler takes (store, project_name, target, config) and returns a
# JSON-able summary. Exceptions mark the attempt failed.

def _run_harvest_vcs(store: Store, project: str, target: str, cfg: PipelineConfig) -> dict:
    system = store.get("vcs_system", target)
    if system is None:
        raise NotFoundError(f"no vcs system {target}")
    return vcs.harvest_vcs(store, project, system["url"], clones_dir=cfg.clones_dir)


def _run_harvest_issues(store: Store, project: str, target: str, cfg: PipelineConfig) -> dict:
    system = store.get("issue_system", target)
    if system is None:
        raise NotFoundError(f"no issue system {target}")
    if system["url"].startswith("fixture://"):
        # offline snapshot already ingested; nothing to fetch again
        return {"issues_stored": 0, "comments_stored": 0, "skipped_malformed": 0}
    return tracker.harvest_issues(store, project, system["tracker_type"], url=system["url"])


def _run_metrics(store: Store, project: str, target: str, cfg: PipelineConfig) -> dict:
    return metrics.compute_metrics(store, target, clones_dir=cfg.clones_dir)


def _run_link(store: Store, project: str, target: str, cfg: PipelineConfig) -> dict:
    return linking.link_commits_to_issues(store, project)


def _run_induce(store: Store, project: str, target: str, cfg: PipelineConfig) -> dict:
    return linking.detect_inducing(store, project, clones_dir=cfg.clones_dir)


def _run_label(store: Store, project: str, target: str, cfg: PipelineConfig) -> dict:
    return labels.label_commits(store, project)


def _run_identify(store: Store, project: str, target: str, cfg: PipelineConfig) -> dict:
    return identity.merge_identities(store, project)


def _run_export(store: Store, project: str, target: str, cfg: PipelineConfig) -> dict:
    from . import dataset

    out_dir = store.datadir / "exports"
    out_dir.mkdir(exist_ok=True)
    out = out_dir / f"{project}-{target[:12]}.csv"
    return dataset.export_release(store, project, target, out)


HANDLERS = {
    "harvest_vcs": _run_harvest_vcs,
    "harvest_issues": _run_harvest_issues,
    "metrics_commit": _run_metrics,
    "link": _run_link,
    "induce": _run_induce,
    "label": _run_label,
    "identify": _run_identify,
    "export": _run_export,
}


def expand_targets(store: Store, project_doc: dict, kind: str, cfg: PipelineConfig) -> list[str]:
    """One target per job: systems for harvests, commits for metrics,
    the project itself for whole-store enrichment passes."""
    pid = project_doc["id"]
    if kind == "harvest_vcs":
        return [d["id"] for d in store.query("vcs_system", {"project_id": pid})]
    if kind == "harvest_issues":
        return [d["id"] for d in store.query("issue_system", {"project_id": pid})]
    if kind == "metrics_commit":
        systems = {d["id"] for d in store.query("vcs_system", {"project_id": pid})}
        return [c["id"] for c in store.query("commit") if c["vcs_system_id"] in systems]
    if kind == "export":
        if cfg.export_revision is None:
            raise StageFailedError("export stage needs an export revision")
        return [cfg.export_revision]
    return [pid]


def _execute(store: Store, project: str, job: dict, cfg: PipelineConfig) -> tuple[bool, str]:
    """Run one attempt in a worker thread; returns (ok, log_text)."""
    lines = [f"{ATTEMPT_MARKER}{job['attempts']} --",
             f"[{now_ts()}] start {job['kind']} target={job['target']}"]
    try:
        result = HANDLERS[job["kind"]](store, project, job["target"], cfg)
        lines.append("result " + json.dumps(result, sort_keys=True))
        lines.append("exited with code 0")
        ok = True
    except Exception:
        lines.append(traceback.format_exc().rstrip())
        lines.append("exited with code 1")
        ok = False
    text = "\n".join(lines)
    log_dir = store.datadir / "logs"
    log_dir.mkdir(exist_ok=True)
    with open(log_dir / f"{job['id']}.log", "a", encoding="utf-8") as fh:
        fh.write(text + "\n")
    return ok, text


def _append_log(job: dict, text: str) -> str:
    return (job["log"] + "\n" + text) if job["log"] else text


def _run_stage(store: Store, project: str, job_ids: list[str], cfg: PipelineConfig) -> None:
    retry_at: dict[str, float] = {}
    futures: dict[str, object] = {}
    pool = ThreadPoolExecutor(max_workers=max(cfg.workers, 1))
    last_beat = time.monotonic()
    try:
        while True:
            # claim whatever is eligible; the expect guard makes this safe
            # even if another scheduler raced us to the same document
            now_m = time.monotonic()
            for jid in job_ids:
                if jid in futures or retry_at.get(jid, 0.0) > now_m:
                    continue
                job = store.get("job", jid)
                if job["state"] != "queued":
                    continue
                claimed = store.update("job", jid, {
                    "state": "running",
                    "attempts": job["attempts"] + 1,
                    "started_at": now_ts(),
                    "heartbeat_at": now_ts(),
                }, expect={"state": "queued", "attempts": job["attempts"]})
                if claimed is not None:
                    futures[jid] = pool.submit(_execute, store, project, claimed, cfg)

            if futures:
                wait(list(futures.values()), timeout=cfg.heartbeat_interval,
                     return_when=FIRST_COMPLETED)
            elif retry_at:
                wake = min(retry_at.values()) - time.monotonic()
                if wake > 0:
                    time.sleep(min(wake, cfg.heartbeat_interval))
            else:
                states = {store.get("job", jid)["state"] for jid in job_ids}
                if "queued" not in states and "running" not in states:
                    break
                continue

            if time.monotonic() - last_beat >= cfg.heartbeat_interval:
                for jid, fut in futures.items():
                    if not fut.done():
                        store.update("job", jid, {"heartbeat_at": now_ts()},
                                     expect={"state": "running"})
                last_beat = time.monotonic()

            for jid in [j for j, f in futures.items() if f.done()]:
                ok, text = futures.pop(jid).result()
                job = store.get("job", jid)
                new_log = _append_log(job, text)
                if ok:
                    store.update("job", jid, {
                        "state": "done", "log": new_log, "finished_at": now_ts(),
                    })
                    retry_at.pop(jid, None)
                elif job["attempts"] <= cfg.max_retries:
                    store.update("job", jid, {"state": "queued", "log": new_log})
                    retry_at[jid] = time.monotonic() + cfg.backoff_base * (2 ** (job["attempts"] - 1))
                else:
                    store.update("job", jid, {
                        "state": "failed", "log": new_log, "finished_at": now_ts(),
                    })
                    retry_at.pop(jid, None)
    finally:
        pool.shutdown(wait=True)


def run_pipeline(
    store: Store,
    project: str,
    stages: list[str],
    *,
    workers: int = 4,
    run_id: str | None = None,
    config: PipelineConfig | None = None,
) -> dict:
    """Run the given stage kinds in order; every job of a stage reaches a
    terminal state before the next stage starts. Aborts when more than
    failure_threshold of a stage ends failed or vanished."""
    cfg = config or PipelineConfig()
    cfg.workers = workers
    for kind in stages:
        if kind not in JOB_KINDS:
            raise StageFailedError(f"unknown stage kind {kind!r}")
    project_doc = _project_doc(store, project)
    if run_id is None:
        run_id = f"run-{int(time.time())}-{project}"
    summary = {"run_id": run_id, "project": project, "stages": [], "jobs": 0}

    for kind in stages:
        targets = expand_targets(store, project_doc, kind, cfg)
        job_ids = []
        for target in targets:
            job_ids.append(store.upsert("job", {
                "run_id": run_id, "kind": kind, "target": target,
                "state": "queued", "attempts": 0, "log": "",
                "enqueued_at": now_ts(), "started_at": None,
                "finished_at": None, "heartbeat_at": None,
            }))
        _run_stage(store, project, job_ids, cfg)
        detect_failures(store, run_id,
                        vanish_timeout=cfg.vanish_timeout,
                        max_retries=cfg.max_retries)

        counts = {"done": 0, "failed": 0, "vanished": 0}
        for jid in job_ids:
            state = store.get("job", jid)["state"]
            counts[state] = counts.get(state, 0) + 1
        stage_row = {"kind": kind, "jobs": len(job_ids), **counts}
        summary["stages"].append(stage_row)
        summary["jobs"] += len(job_ids)
        bad = counts["failed"] + counts["vanished"]
        if job_ids and bad / len(job_ids) > cfg.failure_threshold:
            exc = StageFailedError(
                f"stage {kind}: {bad}/{len(job_ids)} jobs failed or vanished"
            )
            exc.summary = summary
            raise exc
    return summary


def _last_attempt(text: str) -> str:
    # only the most recent attempt counts: earlier ones may have legitimately
    # failed and been retried to success
    return text.rsplit(ATTEMPT_MARKER, 1)[-1]


def detect_failures(
    store: Store,
    run_id: str,
    *,
    vanish_timeout: float = VANISH_TIMEOUT,
    max_retries: int = MAX_RETRIES,
    now: str | None = None,
) -> dict:
    """Sweep a run's jobs: logs with failure signatures flip the job to
    failed even when its recorded state says otherwise; running jobs whose
    heartbeat went stale become vanished and are re-enqueued while
    attempts remain."""
    now_dt = parse_iso(now or now_ts())
    swept = {"failed": [], "vanished": [], "requeued": []}
    for job in store.query("job", {"run_id": run_id}):
        state = job["state"]
        if state in ("done", "running") and FAILURE_SIGNATURES.search(_last_attempt(job["log"] or "")):
            store.update("job", job["id"], {
                "state": "failed",
                "finished_at": job["finished_at"] or (now or now_ts()),
            })
            swept["failed"].append(job["id"])
            continue
        if state == "running":
            beat = job["heartbeat_at"] or job["started_at"] or job["enqueued_at"]
            if beat is None:
                continue
            age = (now_dt - parse_iso(beat)).total_seconds()
            if age > vanish_timeout:
                note = f"no heartbeat for {int(age)}s; presumed vanished"
                store.update("job", job["id"], {
                    "state": "vanished",
                    "log": _append_log(job, note),
                })
                swept["vanished"].append(job["id"])
                if job["attempts"] <= max_retries:
                    store.update("job", job["id"], {"state": "queued"})
                    swept["requeued"].append(job["id"])
    return swept


def resume_vanished(store: Store, project: str, run_id: str, *,
                    config: PipelineConfig | None = None) -> dict:
    """Re-run a swept run's re-enqueued jobs to a terminal state."""
    cfg = config or PipelineConfig()
    job_ids = [j["id"] for j in store.query("job", {"run_id": run_id})
               if j["state"] == "queued"]
    _run_stage(store, project, job_ids, cfg)
    return {"resumed": len(job_ids)}


def check_consistency(store: Store, project: str, *, clones_dir: Path | None = None) -> dict:
    """Audit the store against the repositories it claims to describe.

    Walks every commit reachable in each clone and checks it is stored;
    walks every stored commit's tree and checks a metric record exists for
    each measurable file; scans all documents for dangling refs. Orphan
    scanning is store-wide, which is exact for single-project stores.
    """
    project_doc = _project_doc(store, project)
    pid = project_doc["id"]
    missing_metrics: list[list[str]] = []
    missing_commits: list[str] = []

    for system in store.query("vcs_system", {"project_id": pid}):
        repo = vcs.repo_path_for(store, system["id"], clones_dir)
        heads = gitio.list_heads(repo)
        reachable = gitio.rev_list(repo, [tip for _, tip in heads])
        stored = {c["revision_hash"]: c
                  for c in store.query("commit", {"vcs_system_id": system["id"]})}
        missing_commits.extend(sorted(h for h in reachable if h not in stored))
        for rev in sorted(stored):
            commit = stored[rev]
            for path, _blob in metrics.eligible_tree_entries(repo, rev):
                fid = doc_id("file", {"vcs_system_id": system["id"], "path": path})
                if store.get_by_key("metric_record", commit_id=commit["id"], file_id=fid) is None:
                    missing_metrics.append([rev, path])

    orphans = [[coll, oid] for coll, oid in store.referential_orphans()]
    missing_metrics.sort()
    missing_commits.sort()
    orphans.sort()
    seq = store.count("consistency_report", {"project_id": pid})
    rid = store.upsert("consistency_report", {
        "project_id": pid,
        "seq": seq,
        "created_at": now_ts(),
        "missing_metric_entries": missing_metrics,
        "missing_commits": missing_commits,
        "orphan_documents": orphans,
        "clean": not (missing_metrics or missing_commits or orphans),
    })
    return store.get("consistency_report", rid)


def estimate_runtime(commit_count: int, minutes_per_commit: float, workers: int) -> dict:
    """Days of compute for a full per-commit analysis pass."""
    if commit_count < 0 or minutes_per_commit < 0 or workers < 0:
        raise ValueError("estimate inputs must be non-negative")
    serial_days = commit_count * minutes_per_commit / 1440
    return {
        "serial_days": serial_days,
        "wall_clock_days": serial_days / max(workers, 1),
    }
