"""Single-writer job coordinator with leases, retries, and a journal.

All public methods serialize through one lock, so any number of protocol
threads can call in concurrently.  Workers pull: they register with
``hello``, take work with ``assign``, and report with ``complete``; any
message refreshes the worker's lease.  Jobs on workers silent longer than
the lease timeout are requeued by ``reap_stale``.
"""
from __future__ import annotations

import itertools
import json
import logging
import threading
import time
from dataclasses import replace
from pathlib import Path
from typing import Callable, Sequence

from .jobs import (
    BatchReport,
    FarmConfig,
    FarmError,
    JobState,
    JobView,
    ProtocolError,
    RenderJob,
    WorkerState,
)
from .journal import read_journal, replay_events

__all__ = ["Coordinator"]

logger = logging.getLogger(__name__)


class _Batch:
    def __init__(self, batch_id: str, jobs: Sequence[RenderJob], now: float):
        self.batch_id = batch_id
        self.jobs: dict[str, RenderJob] = {j.job_id: j for j in jobs}
        self.states: dict[str, JobState] = {
            j.job_id: JobState.PENDING for j in jobs}
        self.owners: dict[str, str | None] = {j.job_id: None for j in jobs}
        self.pending: list[str] = [j.job_id for j in jobs]
        self.retried = 0
        self.start_time = now
        self.finish_time: float | None = None

    def counts(self) -> dict[JobState, int]:
        counts = {state: 0 for state in JobState}
        for state in self.states.values():
            counts[state] += 1
        return counts

    def is_done(self) -> bool:
        return all(state in (JobState.COMPLETED, JobState.FAILED_PERMANENT)
                   for state in self.states.values())


class Coordinator:
    def __init__(self, journal_path: str | Path | None = None,
                 config: FarmConfig | None = None,
                 clock: Callable[[], float] = time.monotonic):
        self.config = config or FarmConfig()
        self.clock = clock
        self._lock = threading.RLock()
        self._batches: dict[str, _Batch] = {}
        self._workers: dict[str, WorkerState] = {}
        self._job_index: dict[str, str] = {}   # job_id -> batch_id
        self._batch_seq = itertools.count(1)
        self._journal = None
        if journal_path is not None:
            journal_path = Path(journal_path)
            if journal_path.exists() and journal_path.stat().st_size > 0:
                raise FarmError(
                    f"{journal_path} already holds a journal; use "
                    f"Coordinator.restore to resume it")
            journal_path.parent.mkdir(parents=True, exist_ok=True)
            self._journal = journal_path.open("a", encoding="utf-8")

    @classmethod
    def restore(cls, journal_path: str | Path,
                config: FarmConfig | None = None,
                clock: Callable[[], float] = time.monotonic) -> "Coordinator":
        """Rebuild state from a journal and requeue orphaned running jobs.

        Requeueing on restart does not consume a retry attempt: the restart
        is the coordinator's fault, not the job's.  Wall-clock accounting
        restarts from the moment of restore.
        """
        events = read_journal(journal_path)
        snapshots = replay_events(events)
        coord = cls(journal_path=None, config=config, clock=clock)
        coord._journal = Path(journal_path).open("a", encoding="utf-8")
        now = coord.clock()
        for batch_id, snap in snapshots.items():
            batch = _Batch(batch_id, list(snap.jobs.values()), now)
            batch.states = dict(snap.states)
            batch.owners = dict(snap.owners)
            batch.pending = list(snap.pending)
            batch.retried = snap.retried
            if batch.is_done():
                batch.finish_time = now
            coord._batches[batch_id] = batch
            for job_id in snap.jobs:
                coord._job_index[job_id] = batch_id
            for job_id, state in snap.states.items():
                if state is JobState.RUNNING:
                    batch.states[job_id] = JobState.PENDING
                    batch.owners[job_id] = None
                    batch.pending.append(job_id)
                    coord._write_event({
                        "event": "requeue", "batch_id": batch_id,
                        "job_id": job_id,
                        "attempt": batch.jobs[job_id].attempt,
                        "permanent": False, "reason": "restart"})
        return coord

    # ------------------------------------------------------------ journal

    def _write_event(self, event: dict) -> None:
        if self._journal is not None:
            self._journal.write(json.dumps(event, separators=(",", ":"))
                                + "\n")
            self._journal.flush()

    def close(self) -> None:
        with self._lock:
            if self._journal is not None:
                self._journal.close()
                self._journal = None

    # ------------------------------------------------------------ batches

    def enqueue_batch(self, jobs: Sequence[RenderJob],
                      batch_id: str | None = None) -> str:
        with self._lock:
            if not jobs:
                raise FarmError("cannot enqueue an empty batch")
            seen: set[str] = set()
            duplicates = []
            for job in jobs:
                if job.job_id in seen or job.job_id in self._job_index:
                    duplicates.append(job.job_id)
                seen.add(job.job_id)
            if duplicates:
                raise FarmError(
                    f"duplicate job ids: {', '.join(sorted(set(duplicates)))}")
            if batch_id is None:
                batch_id = f"batch-{next(self._batch_seq):04d}"
            if batch_id in self._batches:
                raise FarmError(f"batch id already exists: {batch_id}")
            batch = _Batch(batch_id, [replace(j) for j in jobs], self.clock())
            self._batches[batch_id] = batch
            for job_id in batch.jobs:
                self._job_index[job_id] = batch_id
            self._write_event({"event": "batch", "batch_id": batch_id,
                               "jobs": [j.as_dict() for j in batch.jobs.values()]})
            return batch_id

    def batch_ids(self) -> list[str]:
        with self._lock:
            return list(self._batches)

    # ------------------------------------------------------------ workers

    def hello(self, worker_id: str, capacity: int) -> None:
        if capacity < 1:
            raise ProtocolError(f"{worker_id}: capacity must be at least 1")
        with self._lock:
            known = self._workers.get(worker_id)
            in_flight = known.in_flight if known else set()
            self._workers[worker_id] = WorkerState(
                worker_id=worker_id, capacity=capacity, in_flight=in_flight,
                last_heartbeat=self.clock())

    def heartbeat(self, worker_id: str) -> None:
        with self._lock:
            worker = self._workers.get(worker_id)
            if worker is not None:
                worker.last_heartbeat = self.clock()

    def assign(self, worker_id: str) -> list[RenderJob]:
        with self._lock:
            worker = self._workers.get(worker_id)
            if worker is None:
                raise ProtocolError(f"unknown worker: {worker_id}")
            worker.last_heartbeat = self.clock()
            granted: list[RenderJob] = []
            for batch in self._batches.values():
                while worker.free_slots() > 0 and batch.pending:
                    job_id = batch.pending.pop(0)
                    batch.states[job_id] = JobState.RUNNING
                    batch.owners[job_id] = worker_id
                    worker.in_flight.add(job_id)
                    granted.append(replace(batch.jobs[job_id]))
                    self._write_event({"event": "assign",
                                       "batch_id": batch.batch_id,
                                       "job_id": job_id,
                                       "worker_id": worker_id})
                if worker.free_slots() == 0:
                    break
            return granted

    def complete(self, worker_id: str, job_id: str, status: str,
                 detail: str = "") -> bool:
        """Record a job result; returns False when the report is stale."""
        if status not in ("done", "fail"):
            raise ProtocolError(f"unknown completion status: {status!r}")
        with self._lock:
            worker = self._workers.get(worker_id)
            if worker is None:
                raise ProtocolError(f"unknown worker: {worker_id}")
            worker.last_heartbeat = self.clock()
            batch_id = self._job_index.get(job_id)
            if batch_id is None:
                raise ProtocolError(f"unknown job: {job_id}")
            batch = self._batches[batch_id]
            if batch.states[job_id] is not JobState.RUNNING \
                    or batch.owners[job_id] != worker_id:
                logger.warning("ignoring stale completion of %s from %s "
                               "(state=%s owner=%s)", job_id, worker_id,
                               batch.states[job_id].value,
                               batch.owners[job_id])
                return False
            worker.in_flight.discard(job_id)
            batch.owners[job_id] = None
            if status == "done":
                batch.states[job_id] = JobState.COMPLETED
                self._write_event({"event": "complete", "batch_id": batch_id,
                                   "job_id": job_id})
            else:
                self._register_failure(batch, job_id, detail)
            if batch.is_done() and batch.finish_time is None:
                batch.finish_time = self.clock()
            return True

    def _register_failure(self, batch: _Batch, job_id: str,
                          detail: str) -> None:
        job = batch.jobs[job_id]
        job.attempt += 1
        permanent = job.attempt >= self.config.max_retries
        if permanent:
            batch.states[job_id] = JobState.FAILED_PERMANENT
            logger.warning("%s failed permanently after %d attempts: %s",
                           job_id, job.attempt, detail)
        else:
            batch.states[job_id] = JobState.PENDING
            batch.pending.append(job_id)
            batch.retried += 1
        self._write_event({"event": "fail", "batch_id": batch.batch_id,
                           "job_id": job_id, "attempt": job.attempt,
                           "permanent": permanent})

    def reap_stale(self) -> list[str]:
        """Requeue jobs held by workers whose lease expired."""
        with self._lock:
            now = self.clock()
            requeued: list[str] = []
            for worker in self._workers.values():
                if now - worker.last_heartbeat <= self.config.lease_timeout:
                    continue
                for job_id in sorted(worker.in_flight):
                    batch = self._batches[self._job_index[job_id]]
                    job = batch.jobs[job_id]
                    job.attempt += 1
                    batch.owners[job_id] = None
                    permanent = job.attempt >= self.config.max_retries
                    if permanent:
                        batch.states[job_id] = JobState.FAILED_PERMANENT
                    else:
                        batch.states[job_id] = JobState.PENDING
                        batch.pending.append(job_id)
                        batch.retried += 1
                    self._write_event({
                        "event": "requeue", "batch_id": batch.batch_id,
                        "job_id": job_id, "attempt": job.attempt,
                        "permanent": permanent, "reason": "lease"})
                    requeued.append(job_id)
                    if batch.is_done() and batch.finish_time is None:
                        batch.finish_time = now
                worker.in_flight.clear()
            return requeued

    # ------------------------------------------------------------ queries

    def _get_batch(self, batch_id: str) -> _Batch:
        batch = self._batches.get(batch_id)
        if batch is None:
            raise FarmError(f"unknown batch: {batch_id}")
        return batch

    def counts(self, batch_id: str) -> dict[JobState, int]:
        with self._lock:
            return self._get_batch(batch_id).counts()

    def snapshot(self, batch_id: str) -> dict[str, JobView]:
        with self._lock:
            batch = self._get_batch(batch_id)
            return {job_id: JobView(state=batch.states[job_id],
                                    attempt=batch.jobs[job_id].attempt,
                                    owner=batch.owners[job_id])
                    for job_id in batch.jobs}

    def batch_report(self, batch_id: str) -> BatchReport:
        with self._lock:
            batch = self._get_batch(batch_id)
            counts = batch.counts()
            end = batch.finish_time if batch.finish_time is not None \
                else self.clock()
            return BatchReport.compute(
                batch_id=batch_id,
                total_jobs=len(batch.jobs),
                completed=counts[JobState.COMPLETED],
                failed_permanently=counts[JobState.FAILED_PERMANENT],
                retried=batch.retried,
                wall_time=max(0.0, end - batch.start_time))
