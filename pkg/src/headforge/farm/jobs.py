"""Domain types for the render job distribution farm."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum


class FarmError(Exception):
    pass


class ProtocolError(FarmError):
    """A request the coordinator cannot honor (unknown worker, bad message)."""


class JobState(str, Enum):
    PENDING = "PENDING"
    RUNNING = "RUNNING"
    COMPLETED = "COMPLETED"
    FAILED_PERMANENT = "FAILED_PERMANENT"


@dataclass
class RenderJob:
    """One (patient, clip, texture, view) rendering unit."""

    job_id: str
    patient_id: str
    clip_id: str
    texture_id: str | None
    view_name: str
    sequence_uri: str
    texture_uri: str | None
    output_uri: str
    attempt: int = 0

    def __post_init__(self) -> None:
        if not self.job_id:
            raise ValueError("job_id must be non-empty")
        if not self.sequence_uri or not self.output_uri:
            raise ValueError(f"{self.job_id}: sequence and output URIs required")
        if self.attempt < 0:
            raise ValueError(f"{self.job_id}: attempt must be >= 0")

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "RenderJob":
        return cls(**{f.name: raw[f.name] for f in dataclasses.fields(cls)
                      if f.name in raw})


@dataclass
class WorkerState:
    """Coordinator-side view of one connected worker."""

    worker_id: str
    capacity: int
    in_flight: set = field(default_factory=set)
    last_heartbeat: float = 0.0

    def free_slots(self) -> int:
        return max(0, self.capacity - len(self.in_flight))


@dataclass(frozen=True)
class JobView:
    """Read-only (state, attempt, owner) snapshot of a job."""

    state: JobState
    attempt: int
    owner: str | None


@dataclass(frozen=True)
class FarmConfig:
    lease_timeout: float = 120.0
    max_retries: int = 3

    def __post_init__(self) -> None:
        if self.lease_timeout <= 0:
            raise ValueError("lease_timeout must be positive")
        if self.max_retries < 1:
            raise ValueError("max_retries must be at least 1")


@dataclass(frozen=True)
class BatchReport:
    """Aggregate counters for one batch plus derived rates."""

    batch_id: str
    total_jobs: int
    completed: int
    failed_permanently: int
    retried: int
    wall_time: float
    throughput: float  # completed jobs per minute

    @classmethod
    def compute(cls, batch_id: str, total_jobs: int, completed: int,
                failed_permanently: int, retried: int,
                wall_time: float) -> "BatchReport":
        if wall_time > 0 and completed > 0:
            throughput = completed / (wall_time / 60.0)
        else:
            throughput = 0.0
        return cls(batch_id=batch_id, total_jobs=total_jobs, completed=completed,
                   failed_permanently=failed_permanently, retried=retried,
                   wall_time=wall_time, throughput=throughput)

    @property
    def is_final(self) -> bool:
        return self.completed + self.failed_permanently == self.total_jobs

    def mean_slot_minutes(self, slots: int) -> float:
        """Mean per-job service time assuming ``slots`` always-busy slots."""
        if self.completed == 0:
            return 0.0
        return slots * (self.wall_time / 60.0) / self.completed

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)
