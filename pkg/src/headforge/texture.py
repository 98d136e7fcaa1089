"""Facial UV texture atlases: loading, bilinear sampling, patient assignment.

Atlases are immutable after load and sampling is pure, so render threads can
share them freely. Texture-to-patient assignment is a pure function of its
arguments so job plans are reproducible across machines.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

# textures-per-patient conditions supported by the ablation grid
TEXTURES_PER_PATIENT_CHOICES = (0, 1, 2, 3, 5, 10)


class TextureError(Exception):
    pass


class CapacityError(TextureError):
    pass


@dataclass(frozen=True, eq=False)
class TextureAtlas:
    texture_id: str
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8, row-major
    demographic_tags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("atlas must be at least 1x1")
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValueError(
                f"pixel array shape {self.pixels.shape} does not match "
                f"{self.height}x{self.width}x3")


@dataclass(frozen=True)
class TextureAssignment:
    patient_id: str
    texture_ids: tuple[str, ...]
    seed: int

    def __post_init__(self):
        if len(set(self.texture_ids)) != len(self.texture_ids):
            raise ValueError("assigned texture ids must be distinct")
        if len(self.texture_ids) not in TEXTURES_PER_PATIENT_CHOICES:
            raise ValueError(
                f"textures per patient must be one of {TEXTURES_PER_PATIENT_CHOICES}")

    @property
    def only_mesh(self) -> bool:
        return not self.texture_ids


@dataclass(frozen=True)
class PoolEntry:
    texture_id: str
    path: Path
    tags: tuple[str, ...] = ()


def load_texture(path: str | Path, texture_id: str,
                 overlay_path: str | Path | None = None,
                 tags: Sequence[str] = ()) -> TextureAtlas:
    """Load a PNG into an RGB atlas.

    RGBA input drops alpha; grayscale is expanded to triplicated RGB. An
    optional pre-composited RGBA overlay (e.g. an eye-region fixup mask) is
    alpha-blended over the base at load time.
    """
    try:
        with Image.open(path) as img:
            img.load()
            base = img.convert("RGB")
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise TextureError(f"cannot read texture {path}: {exc}") from exc
    if base.width < 1 or base.height < 1:
        raise TextureError(f"texture {path} has zero size")

    if overlay_path is not None:
        try:
            with Image.open(overlay_path) as ov:
                ov.load()
                overlay = ov.convert("RGBA")
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            raise TextureError(f"cannot read overlay {overlay_path}: {exc}") from exc
        if overlay.size != base.size:
            raise TextureError(
                f"overlay size {overlay.size} does not match texture size {base.size}")
        base = Image.alpha_composite(base.convert("RGBA"), overlay).convert("RGB")

    pixels = np.asarray(base, dtype=np.uint8)
    return TextureAtlas(texture_id=texture_id, width=base.width, height=base.height,
                        pixels=pixels, demographic_tags=tuple(tags))


def sample_bilinear(atlas: TextureAtlas, uv) -> np.ndarray:
    """Bilinear sample with repeat wrap; texel centers sit at (i+0.5)/size.

    Returns RGB in [0, 1].
    """
    u, v = float(uv[0]), float(uv[1])
    u -= np.floor(u)
    v -= np.floor(v)
    w, h = atlas.width, atlas.height
    x = u * w - 0.5
    y = v * h - 0.5
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    i0 = int(x0) % w
    i1 = (i0 + 1) % w
    j0 = int(y0) % h
    j1 = (j0 + 1) % h
    p = atlas.pixels
    top = (1.0 - fx) * p[j0, i0] + fx * p[j0, i1]
    bottom = (1.0 - fx) * p[j1, i0] + fx * p[j1, i1]
    return ((1.0 - fy) * top + fy * bottom) / 255.0


def _patient_rng(seed: int, patient_id: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}|{patient_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def assign_textures(patients: Sequence[str], pool: Sequence[str], n: int,
                    seed: int) -> list[TextureAssignment]:
    """Assign n distinct texture ids to each patient, seeded and repeatable.

    Each patient gets an independent seeded shuffle of the pool, so two
    patients may share textures; n == 0 encodes the only-mesh condition.
    """
    pool = list(pool)
    if len(set(pool)) != len(pool):
        raise ValueError("texture pool contains duplicate ids")
    if n not in TEXTURES_PER_PATIENT_CHOICES:
        raise ValueError(
            f"textures per patient must be one of {TEXTURES_PER_PATIENT_CHOICES}, got {n}")
    if n > len(pool):
        raise CapacityError(f"requested {n} textures per patient, pool has {len(pool)}")
    assignments = []
    for patient_id in patients:
        rng = _patient_rng(seed, patient_id)
        order = rng.sample(range(len(pool)), len(pool))
        assignments.append(TextureAssignment(
            patient_id=patient_id,
            texture_ids=tuple(pool[i] for i in order[:n]),
            seed=seed))
    return assignments


def read_pool_manifest(path: str | Path) -> list[PoolEntry]:
    """Parse a texture pool manifest: one tab-separated line per texture
    (id, path, optional tags); relative paths resolve against the manifest."""
    path = Path(path)
    entries: list[PoolEntry] = []
    seen: set[str] = set()
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) < 2:
            raise ValueError(f"{path}:{lineno}: expected id<TAB>path, got {line!r}")
        texture_id = fields[0].strip()
        if texture_id in seen:
            raise ValueError(f"{path}:{lineno}: duplicate texture id {texture_id!r}")
        seen.add(texture_id)
        tex_path = Path(fields[1].strip())
        if not tex_path.is_absolute():
            tex_path = path.parent / tex_path
        tags = tuple(t.strip() for t in fields[2:] if t.strip())
        entries.append(PoolEntry(texture_id=texture_id, path=tex_path, tags=tags))
    return entries
