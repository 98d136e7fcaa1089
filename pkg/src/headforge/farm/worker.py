"""Worker process loop and the render-job runner it executes.

Output idempotence: a job renders into a hidden temp directory next to its
final output and renames it into place at the end.  A rerun (retry, stale
lease, restart) that finds the final directory simply skips the work, so a
finished output can never be corrupted or duplicated.
"""
from __future__ import annotations

import logging
import os
import shutil
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable

from ..mesh import load_sequence
from ..render import RenderError, RenderSettings, default_cameras, render_clip_variant
from ..texture import load_texture
from .jobs import RenderJob
from .protocol import CoordinatorClient

__all__ = ["FarmWorker", "make_render_runner"]

logger = logging.getLogger(__name__)


def make_render_runner(width: int = 224, height: int = 224,
                       fov_deg: float = 30.0,
                       settings: RenderSettings | None = None,
                       frame_workers: int = 1) -> Callable[[RenderJob], None]:
    """Build a job runner that renders one (clip, view, texture) variant.

    The camera is derived from the first frame's bounding box via the
    standard front/side rig; ``job.view_name`` selects which one.
    """
    settings = settings or RenderSettings()

    def run(job: RenderJob) -> None:
        out_dir = Path(job.output_uri)
        if out_dir.exists():
            logger.info("%s: output already present, skipping", job.job_id)
            return
        sequence = load_sequence(job.sequence_uri, patient_id=job.patient_id,
                                 clip_id=job.clip_id)
        atlas = None
        if job.texture_id is not None:
            if not job.texture_uri:
                raise RenderError(f"{job.job_id}: texture id without URI")
            atlas = load_texture(job.texture_uri, job.texture_id)
        verts = sequence.frames[0].vertices
        rig = default_cameras(verts.min(axis=0), verts.max(axis=0),
                              width=width, height=height, fov_deg=fov_deg)
        cameras = {camera.view_name: camera for camera in rig}
        if job.view_name not in cameras:
            raise RenderError(
                f"{job.job_id}: unknown view {job.view_name!r}; "
                f"expected one of {sorted(cameras)}")

        out_dir.parent.mkdir(parents=True, exist_ok=True)
        tmp_dir = out_dir.parent / \
            f".{out_dir.name}.tmp-{os.getpid()}-{uuid.uuid4().hex[:8]}"
        try:
            render_clip_variant(sequence, atlas, cameras[job.view_name],
                                settings, tmp_dir, workers=frame_workers)
            tmp_dir.rename(out_dir)
        except OSError:
            if out_dir.exists():
                logger.info("%s: lost the rename race, output exists",
                            job.job_id)
            else:
                raise
        finally:
            shutil.rmtree(tmp_dir, ignore_errors=True)

    return run


class FarmWorker:
    """Polls a coordinator and runs jobs on a bounded thread pool."""

    def __init__(self, host: str, port: int, worker_id: str, capacity: int,
                 runner: Callable[[RenderJob], None],
                 poll_interval: float = 0.5,
                 heartbeat_interval: float = 10.0):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.host = host
        self.port = port
        self.worker_id = worker_id
        self.capacity = capacity
        self.runner = runner
        self.poll_interval = poll_interval
        self.heartbeat_interval = heartbeat_interval

    def run(self, stop: threading.Event | None = None) -> None:
        """Work until ``stop`` is set; safe to run in a daemon thread."""
        stop = stop if stop is not None else threading.Event()
        with CoordinatorClient(self.host, self.port) as client:
            client.hello(self.worker_id, self.capacity)
            pool = ThreadPoolExecutor(max_workers=self.capacity,
                                      thread_name_prefix=self.worker_id)
            in_flight: dict = {}
            last_heartbeat = time.monotonic()
            try:
                while not stop.is_set():
                    progressed = False
                    for future in [f for f in in_flight if f.done()]:
                        job_id = in_flight.pop(future)
                        error = future.exception()
                        if error is None:
                            client.complete(self.worker_id, job_id, "done")
                        else:
                            logger.warning("%s failed: %s", job_id, error)
                            client.complete(self.worker_id, job_id, "fail",
                                            detail=str(error))
                        progressed = True
                    if len(in_flight) < self.capacity:
                        for job in client.poll(self.worker_id):
                            in_flight[pool.submit(self.runner, job)] = \
                                job.job_id
                            progressed = True
                    now = time.monotonic()
                    if now - last_heartbeat >= self.heartbeat_interval:
                        client.heartbeat(self.worker_id)
                        last_heartbeat = now
                    if not progressed:
                        stop.wait(self.poll_interval)
            finally:
                pool.shutdown(wait=True, cancel_futures=True)
