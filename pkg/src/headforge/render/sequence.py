"""Render mesh sequences to per-frame PNG directories with clip metadata.

Layout: ``<out_root>/<clip_id>/<view_name>/<texture_id or "none">/`` holding
``frame_0000.png ...`` plus a ``clip.json`` describing the variant.
"""
from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from ..mesh import MeshSequence
from ..texture import TextureAtlas
from .camera import Camera
from .raster import RenderError, RenderSettings, rasterize_frame

__all__ = ["RenderedClip", "render_clip_variant", "render_sequence"]

ONLY_MESH_DIR = "none"
FRAME_NAME = "frame_{:04d}.png"


@dataclass(frozen=True)
class RenderedClip:
    """One rendered (clip, view, texture) variant on disk."""

    clip_id: str
    patient_id: str
    view_name: str
    texture_id: str | None
    frame_count: int
    frame_rate: float
    width: int
    height: int
    uri: str

    @property
    def duration_s(self) -> float:
        return self.frame_count / self.frame_rate

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["duration_s"] = self.duration_s
        return d


def render_clip_variant(sequence: MeshSequence, atlas: TextureAtlas | None,
                        camera: Camera, settings: RenderSettings,
                        out_dir: Path, workers: int = 1) -> RenderedClip:
    """Render every frame of one variant into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def render_one(i_frame):
        i, frame = i_frame
        fb = rasterize_frame(frame, atlas, camera, settings)
        fb.to_image().save(out_dir / FRAME_NAME.format(i))

    jobs = list(enumerate(sequence.frames))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(render_one, jobs))
    else:
        for job in jobs:
            render_one(job)

    record = RenderedClip(
        clip_id=sequence.clip_id,
        patient_id=sequence.patient_id,
        view_name=camera.view_name,
        texture_id=atlas.texture_id if atlas is not None else None,
        frame_count=len(sequence.frames),
        frame_rate=sequence.frame_rate,
        width=camera.width,
        height=camera.height,
        uri=str(out_dir),
    )
    meta = record.as_dict()
    meta["camera"] = dataclasses.asdict(camera)
    (out_dir / "clip.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return record


def render_sequence(sequence: MeshSequence, texture_ids: Sequence[str],
                    cameras: Sequence[Camera], settings: RenderSettings,
                    out_root: Path,
                    atlas_resolver: Callable[[str], TextureAtlas | None],
                    workers: int = 1) -> list[RenderedClip]:
    """Render a clip under every (texture, camera) combination.

    With no texture ids the clip is rendered once per camera in untextured
    (only-mesh) form.  ``atlas_resolver`` maps a texture id to its atlas;
    returning None is treated as an unresolvable id and fails the job.
    """
    if not cameras:
        raise RenderError("at least one camera is required")
    atlases: list[TextureAtlas | None]
    if texture_ids:
        atlases = []
        for tid in texture_ids:
            atlas = atlas_resolver(tid)
            if atlas is None:
                raise RenderError(f"cannot resolve texture '{tid}'")
            atlases.append(atlas)
    else:
        atlases = [None]

    out_root = Path(out_root)
    records = []
    for atlas in atlases:
        tex_dir = atlas.texture_id if atlas is not None else ONLY_MESH_DIR
        for camera in cameras:
            out_dir = out_root / sequence.clip_id / camera.view_name / tex_dir
            records.append(render_clip_variant(
                sequence, atlas, camera, settings, out_dir, workers=workers))
    return records
