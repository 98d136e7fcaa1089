"""Coordinator/worker distribution of render jobs with leases and a journal."""
from .coordinator import Coordinator
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
from .journal import BatchSnapshot, read_journal, replay_events
from .protocol import (
    CoordinatorClient,
    CoordinatorServer,
    recv_message,
    send_message,
    start_server,
)
from .sim import SimResult, run_simulation
from .worker import FarmWorker, make_render_runner

__all__ = [
    "BatchReport",
    "BatchSnapshot",
    "Coordinator",
    "CoordinatorClient",
    "CoordinatorServer",
    "FarmConfig",
    "FarmError",
    "FarmWorker",
    "JobState",
    "JobView",
    "ProtocolError",
    "RenderJob",
    "SimResult",
    "WorkerState",
    "read_journal",
    "recv_message",
    "replay_events",
    "run_simulation",
    "send_message",
    "start_server",
]
