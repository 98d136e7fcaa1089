"""Ablation planning: expand clips x textures x views into render jobs."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..farm.jobs import RenderJob
from ..texture import TextureAssignment
from .records import DatasetError

__all__ = [
    "AblationPlan",
    "SourceClip",
    "TEXTURE_COUNT_CONDITIONS",
    "VIEW_CONDITIONS",
    "plan_jobs",
]

# Texture counts and view sets exercised by the ablation grid.  A texture
# count of zero means untextured geometry (constant albedo).
TEXTURE_COUNT_CONDITIONS = (0, 1, 2, 3, 5, 10)
VIEW_NAMES = ("front", "side")
VIEW_CONDITIONS = (("front",), ("side",), ("front", "side"))

ONLY_MESH_TEXTURE = "none"


@dataclass(frozen=True)
class SourceClip:
    """A captured mesh sequence that render jobs are derived from."""

    clip_id: str
    patient_id: str
    sequence_uri: str

    def __post_init__(self) -> None:
        if not self.clip_id or not self.patient_id or not self.sequence_uri:
            raise DatasetError("source clips need clip_id, patient_id, and "
                               "sequence_uri")


@dataclass(frozen=True)
class AblationPlan:
    """One cell of the ablation grid: how many textures, which views."""

    textures_per_patient: int
    views: tuple[str, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        if self.textures_per_patient not in TEXTURE_COUNT_CONDITIONS:
            raise DatasetError(
                f"textures_per_patient must be one of "
                f"{TEXTURE_COUNT_CONDITIONS}, got {self.textures_per_patient}")
        object.__setattr__(self, "views", tuple(self.views))
        if not self.views:
            raise DatasetError("plan needs at least one view")
        unknown = [v for v in self.views if v not in VIEW_NAMES]
        if unknown:
            raise DatasetError(f"unknown views: {', '.join(unknown)}; "
                               f"expected a subset of {VIEW_NAMES}")
        if len(set(self.views)) != len(self.views):
            raise DatasetError("duplicate views in plan")

    @property
    def variants_per_clip(self) -> int:
        return max(1, self.textures_per_patient) * len(self.views)


def plan_jobs(clips: Sequence[SourceClip],
              assignments: Mapping[str, TextureAssignment]
              | Iterable[TextureAssignment],
              plan: AblationPlan,
              out_root: str | Path,
              texture_uris: Mapping[str, str] | None = None,
              ) -> list[RenderJob]:
    """Expand every clip into one render job per (texture, view) variant.

    Produces exactly ``len(clips) * max(1, textures_per_patient) *
    len(views)`` jobs in a deterministic order: clips as given, then the
    patient's assigned textures in assignment order, then views in plan
    order.  When ``texture_uris`` is provided, every referenced texture id
    must resolve through it.
    """
    if not isinstance(assignments, Mapping):
        by_patient: dict[str, TextureAssignment] = {}
        for assignment in assignments:
            if assignment.patient_id in by_patient:
                raise DatasetError(
                    f"duplicate assignment for patient "
                    f"{assignment.patient_id}")
            by_patient[assignment.patient_id] = assignment
        assignments = by_patient

    ids = [c.clip_id for c in clips]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise DatasetError(f"duplicate clip ids: {', '.join(dupes)}")

    out_root = Path(out_root)
    jobs: list[RenderJob] = []
    for clip in clips:
        if plan.textures_per_patient == 0:
            textures: list[str | None] = [None]
        else:
            assignment = assignments.get(clip.patient_id)
            if assignment is None:
                raise DatasetError(
                    f"{clip.clip_id}: no texture assignment for patient "
                    f"{clip.patient_id}")
            if len(assignment.texture_ids) != plan.textures_per_patient:
                raise DatasetError(
                    f"{clip.clip_id}: patient {clip.patient_id} has "
                    f"{len(assignment.texture_ids)} assigned textures, "
                    f"plan wants {plan.textures_per_patient}")
            textures = list(assignment.texture_ids)
        for texture_id in textures:
            texture_uri = None
            if texture_id is not None and texture_uris is not None:
                if texture_id not in texture_uris:
                    raise DatasetError(
                        f"{clip.clip_id}: unknown texture id "
                        f"{texture_id!r}")
                texture_uri = str(texture_uris[texture_id])
            tex_dir = texture_id if texture_id is not None \
                else ONLY_MESH_TEXTURE
            for view in plan.views:
                jobs.append(RenderJob(
                    job_id=f"{clip.clip_id}|{view}|{tex_dir}",
                    patient_id=clip.patient_id,
                    clip_id=clip.clip_id,
                    texture_id=texture_id,
                    view_name=view,
                    sequence_uri=clip.sequence_uri,
                    texture_uri=texture_uri,
                    output_uri=str(out_root / clip.clip_id / view / tex_dir),
                ))
    return jobs
