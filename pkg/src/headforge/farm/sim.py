"""Deterministic discrete-event simulation of a worker fleet.

The simulation drives a real ``Coordinator`` (including its journal and
lease bookkeeping) on a virtual clock, so scheduling behavior under
failure injection, worker death, and retries can be tested exactly and
instantly.  Simulated output files model the temp-plus-rename discipline:
a successful render claims the output path only if nobody holds it yet.
"""
from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass, field
from pathlib import Path

from .coordinator import Coordinator
from .jobs import BatchReport, FarmConfig, FarmError, JobState, RenderJob

__all__ = ["SimResult", "run_simulation"]


class _VirtualClock:
    def __init__(self):
        self.now = 0.0

    def __call__(self) -> float:
        return self.now


@dataclass
class SimResult:
    batch_id: str
    wall_time: float
    report: BatchReport
    states: dict = field(default_factory=dict)    # job_id -> JobState
    outputs: dict = field(default_factory=dict)   # job_id -> files on "disk"
    write_attempts: dict = field(default_factory=dict)
    journal_path: Path | None = None


def _fake_jobs(n: int) -> list[RenderJob]:
    return [RenderJob(job_id=f"sim-{i:04d}", patient_id=f"p{i % 10:02d}",
                      clip_id=f"c{i:04d}", texture_id=None, view_name="front",
                      sequence_uri="sim://seq", texture_uri=None,
                      output_uri=f"sim://out/{i:04d}")
            for i in range(n)]


def run_simulation(n_jobs: int = 200, n_workers: int = 4, capacity: int = 1,
                   service_time: float = 1.0, failure_rate: float = 0.0,
                   seed: int = 0, lease_timeout: float = 5.0,
                   max_retries: int = 3, kill: dict | None = None,
                   journal_path: str | Path | None = None) -> SimResult:
    """Run one batch to termination and return the outcome.

    ``kill`` maps worker ids (``w0`` .. ``w{n-1}``) to the virtual time at
    which they die silently: their in-flight work never completes and only
    the lease reaper can recover it.
    """
    clock = _VirtualClock()
    config = FarmConfig(lease_timeout=lease_timeout, max_retries=max_retries)
    coord = Coordinator(journal_path=journal_path, config=config, clock=clock)
    batch_id = coord.enqueue_batch(_fake_jobs(n_jobs))
    rng = random.Random(seed)
    kill = dict(kill or {})

    alive = {f"w{k}": True for k in range(n_workers)}
    for worker_id in alive:
        coord.hello(worker_id, capacity)

    outputs: dict[str, int] = {}
    write_attempts: dict[str, int] = {}
    seq = itertools.count()
    events: list = []   # (time, tiebreak, kind, worker_id, job_id)
    for worker_id, at in kill.items():
        if worker_id not in alive:
            raise FarmError(f"kill target {worker_id} is not a sim worker")
        heapq.heappush(events, (float(at), next(seq), "kill", worker_id, None))

    def poll_all() -> None:
        for worker_id, ok in alive.items():
            if not ok:
                continue
            for job in coord.assign(worker_id):
                heapq.heappush(events, (clock.now + service_time, next(seq),
                                        "finish", worker_id, job.job_id))

    poll_all()
    stall_rounds = 0
    while True:
        counts = coord.counts(batch_id)
        if counts[JobState.PENDING] + counts[JobState.RUNNING] == 0:
            break

        if not events:
            # nothing scheduled: only lease expiry can make progress
            clock.now += config.lease_timeout + 1e-6
            for worker_id, ok in alive.items():
                if ok:
                    coord.heartbeat(worker_id)
            requeued = coord.reap_stale()
            poll_all()
            stall_rounds = 0 if requeued else stall_rounds + 1
            if stall_rounds > 3:
                break  # genuinely stalled (e.g. every worker is dead)
            continue

        at, _, kind, worker_id, job_id = heapq.heappop(events)
        clock.now = max(clock.now, at)
        for w, ok in alive.items():
            if ok:
                coord.heartbeat(w)
        coord.reap_stale()

        if kind == "kill":
            alive[worker_id] = False
        elif kind == "finish" and alive[worker_id]:
            if rng.random() < failure_rate:
                coord.complete(worker_id, job_id, "fail", "injected fault")
            else:
                write_attempts[job_id] = write_attempts.get(job_id, 0) + 1
                if job_id not in outputs:   # rename claims the path once
                    outputs[job_id] = 1
                coord.complete(worker_id, job_id, "done")
        poll_all()

    report = coord.batch_report(batch_id)
    states = {job_id: view.state
              for job_id, view in coord.snapshot(batch_id).items()}
    coord.close()
    return SimResult(batch_id=batch_id, wall_time=clock.now, report=report,
                     states=states, outputs=outputs,
                     write_attempts=write_attempts,
                     journal_path=Path(journal_path) if journal_path else None)
