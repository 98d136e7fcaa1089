"""Append-only journal of job state transitions, one JSON object per line.

Events:
  batch    {"event": "batch", "batch_id", "jobs": [job dicts]}
  assign   {"event": "assign", "batch_id", "job_id", "worker_id"}
  complete {"event": "complete", "batch_id", "job_id"}
  fail     {"event": "fail", "batch_id", "job_id", "attempt", "permanent"}
  requeue  {"event": "requeue", "batch_id", "job_id", "attempt", "reason"}

Replaying any prefix of a journal yields a consistent batch snapshot: every
event moves exactly one job between states, so PENDING + RUNNING +
COMPLETED + FAILED_PERMANENT always equals the batch size.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .jobs import FarmError, JobState, RenderJob

__all__ = ["BatchSnapshot", "read_journal", "replay_events"]


@dataclass
class BatchSnapshot:
    """State of one batch reconstructed from journal events."""

    batch_id: str
    jobs: dict = field(default_factory=dict)        # job_id -> RenderJob
    states: dict = field(default_factory=dict)      # job_id -> JobState
    owners: dict = field(default_factory=dict)      # job_id -> worker or None
    pending: list = field(default_factory=list)     # FIFO job_id order
    retried: int = 0
    complete_events: Counter = field(default_factory=Counter)

    def state_counts(self) -> dict:
        counts = {state: 0 for state in JobState}
        for state in self.states.values():
            counts[state] += 1
        return counts


def read_journal(path: str | Path) -> list[dict]:
    events = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8")
                                  .splitlines(), start=1):
        if not line.strip():
            continue
        try:
            events.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise FarmError(f"{path}:{lineno}: corrupt journal line: {exc}")
    return events


def replay_events(events: list[dict]) -> dict[str, BatchSnapshot]:
    """Fold journal events into per-batch snapshots."""
    batches: dict[str, BatchSnapshot] = {}
    for event in events:
        kind = event.get("event")
        if kind == "batch":
            snap = BatchSnapshot(batch_id=event["batch_id"])
            for raw in event["jobs"]:
                job = RenderJob.from_dict(raw)
                snap.jobs[job.job_id] = job
                snap.states[job.job_id] = JobState.PENDING
                snap.owners[job.job_id] = None
                snap.pending.append(job.job_id)
            batches[event["batch_id"]] = snap
            continue

        snap = batches.get(event.get("batch_id"))
        if snap is None:
            raise FarmError(f"journal references unknown batch: {event}")
        job_id = event["job_id"]
        if job_id not in snap.jobs:
            raise FarmError(f"journal references unknown job: {event}")

        if kind == "assign":
            if snap.states[job_id] is not JobState.PENDING:
                raise FarmError(f"assign of non-pending job in journal: {event}")
            snap.pending.remove(job_id)
            snap.states[job_id] = JobState.RUNNING
            snap.owners[job_id] = event["worker_id"]
        elif kind == "complete":
            snap.states[job_id] = JobState.COMPLETED
            snap.owners[job_id] = None
            snap.complete_events[job_id] += 1
        elif kind in ("fail", "requeue"):
            snap.jobs[job_id].attempt = int(event["attempt"])
            snap.owners[job_id] = None
            if event.get("permanent"):
                snap.states[job_id] = JobState.FAILED_PERMANENT
            else:
                snap.states[job_id] = JobState.PENDING
                snap.pending.append(job_id)
                snap.retried += 1
        else:
            raise FarmError(f"unknown journal event: {event}")
    return batches
