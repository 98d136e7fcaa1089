"""Manifest reading, frame-directory decoding, and clip preprocessing.

The harness talks to the dataset pipeline purely through its file formats:
newline-delimited-JSON manifests (one header object, then one record per
line, each carrying its split) and per-clip directories of
``frame_0000.png``-style images.  This module re-reads those formats from
scratch so the two packages stay decoupled.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image
from torch.utils.data import Dataset

from .config import AugmentConfig, HarnessError

__all__ = [
    "ClipDataset",
    "Manifest",
    "ManifestClip",
    "augment_clip",
    "load_frames",
    "preprocess_clip",
    "read_manifest",
    "subsample_indices",
    "training_clips",
]

MANIFEST_KIND = "headforge-manifest"
SPLITS = ("train", "val", "test")
ORIGINS = ("real", "synthetic")
FRAME_GLOB = "frame_*.png"


@dataclass(frozen=True)
class ManifestClip:
    """One labelled clip: an id, its patient, where its frames live."""

    clip_id: str
    patient_id: str
    origin: str
    label: int
    uri: str
    split: str

    def __post_init__(self) -> None:
        if self.origin not in ORIGINS:
            raise HarnessError(f"{self.clip_id}: bad origin {self.origin!r}")
        if self.label not in (0, 1):
            raise HarnessError(f"{self.clip_id}: label must be 0 or 1")
        if self.split not in SPLITS:
            raise HarnessError(f"{self.clip_id}: bad split {self.split!r}")


@dataclass(frozen=True)
class Manifest:
    regime: str
    val_equals_test: bool
    clips: tuple[ManifestClip, ...]

    def split(self, name: str) -> tuple[ManifestClip, ...]:
        """Clips of one split; when the manifest flags its validation set as
        identical to the test set, selecting ``val`` yields the test clips."""
        if name not in SPLITS:
            raise HarnessError(f"unknown split {name!r}")
        if name == "val" and self.val_equals_test:
            name = "test"
        return tuple(c for c in self.clips if c.split == name)


def read_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise HarnessError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise HarnessError(f"{path}:1: bad header: {exc}")
    if not isinstance(header, dict) or header.get("kind") != MANIFEST_KIND:
        raise HarnessError(f"{path}: not a manifest file")
    clips = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise HarnessError(f"{path}:{lineno}: bad record: {exc}")
        try:
            clips.append(ManifestClip(
                clip_id=raw["clip_id"], patient_id=raw["patient_id"],
                origin=raw["origin"], label=int(raw["label"]),
                uri=raw["uri"], split=raw["split"]))
        except KeyError as exc:
            raise HarnessError(f"{path}:{lineno}: record missing {exc}")
    declared = header.get("count")
    if declared is not None and declared != len(clips):
        raise HarnessError(f"{path}: header declares {declared} records, "
                           f"found {len(clips)}")
    return Manifest(regime=header.get("regime", "mixed"),
                    val_equals_test=bool(header.get("val_equals_test")),
                    clips=tuple(clips))


def training_clips(manifest: Manifest, regime: str) -> tuple[ManifestClip, ...]:
    """The train split, checked against the requested regime.

    The composition rules live upstream in the manifest builder; this is the
    loader-level guard that a mislabelled manifest cannot smuggle clips of
    the wrong origin into training.
    """
    if manifest.regime != regime:
        raise HarnessError(f"manifest regime {manifest.regime!r} does not "
                           f"match configured regime {regime!r}")
    clips = manifest.split("train")
    if not clips:
        raise HarnessError("train split is empty")
    forbidden = {"real": "synthetic", "synth": "real"}.get(regime)
    if forbidden:
        bad = sorted(c.clip_id for c in clips if c.origin == forbidden)
        if bad:
            raise HarnessError(
                f"{regime} training loader must not contain {forbidden} "
                f"clips, found: {', '.join(bad)}")
    return clips


def subsample_indices(n_frames: int, n_out: int) -> np.ndarray:
    """Evenly spaced frame indices; short clips repeat frames."""
    if n_frames <= 0 or n_out <= 0:
        raise HarnessError("frame counts must be positive")
    return np.linspace(0, n_frames - 1, num=n_out).round().astype(int)


def load_frames(clip_dir: str | Path) -> np.ndarray:
    """Decode a clip directory into a (T, H, W, 3) uint8 array."""
    clip_dir = Path(clip_dir)
    paths = sorted(clip_dir.glob(FRAME_GLOB))
    if not paths:
        raise HarnessError(f"no frames found under {clip_dir}")
    frames = [np.asarray(Image.open(p).convert("RGB"), dtype=np.uint8)
              for p in paths]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise HarnessError(f"{clip_dir}: frames disagree on size: "
                           f"{sorted(shapes)}")
    return np.stack(frames)


def _short_side_scale(video: torch.Tensor, size: int) -> torch.Tensor:
    """Resize (3, T, H, W) so min(H, W) == size, keeping aspect ratio."""
    _, _, h, w = video.shape
    if h <= w:
        nh, nw = size, max(1, round(w * size / h))
    else:
        nh, nw = max(1, round(h * size / w)), size
    frames = video.permute(1, 0, 2, 3)
    frames = F.interpolate(frames, size=(nh, nw), mode="bilinear",
                           align_corners=False)
    return frames.permute(1, 0, 2, 3)


def _crop(video: torch.Tensor, top: int, left: int, size: int) -> torch.Tensor:
    return video[:, :, top:top + size, left:left + size]


def augment_clip(video: torch.Tensor, cfg: AugmentConfig,
                 gen: torch.Generator) -> torch.Tensor:
    """Training-time transform: random short-side scale, random crop,
    random horizontal flip."""
    lo, hi = cfg.scale_range
    size = int(torch.randint(lo, hi + 1, (1,), generator=gen))
    video = _short_side_scale(video, size)
    _, _, h, w = video.shape
    top = int(torch.randint(0, h - cfg.crop_size + 1, (1,), generator=gen))
    left = int(torch.randint(0, w - cfg.crop_size + 1, (1,), generator=gen))
    video = _crop(video, top, left, cfg.crop_size)
    if float(torch.rand((), generator=gen)) < cfg.hflip_prob:
        video = torch.flip(video, dims=(-1,))
    return video


def preprocess_clip(video: torch.Tensor, cfg: AugmentConfig) -> torch.Tensor:
    """Evaluation-time transform: short-side scale, center crop."""
    video = _short_side_scale(video, cfg.scale_range[0])
    _, _, h, w = video.shape
    top = (h - cfg.crop_size) // 2
    left = (w - cfg.crop_size) // 2
    return _crop(video, top, left, cfg.crop_size)


class ClipDataset(Dataset):
    """Clips as (video, label) tensors.

    ``training=True`` applies the random augmentations using a generator
    seeded at construction, so a run is reproducible end to end with
    single-process loading.  Frame directories are checked eagerly; every
    clip whose directory holds no frames is reported in one error.
    """

    def __init__(self, clips: tuple[ManifestClip, ...], cfg: AugmentConfig,
                 training: bool, seed: int = 0, cache: bool = True):
        self.clips = tuple(clips)
        self.cfg = cfg
        self.training = training
        self._gen = torch.Generator().manual_seed(seed)
        self._cache: dict[int, np.ndarray] | None = {} if cache else None
        missing = [c.clip_id for c in self.clips
                   if not any(Path(c.uri).glob(FRAME_GLOB))]
        if missing:
            raise HarnessError(
                f"missing frames for clips: {', '.join(sorted(missing))}")

    def __len__(self) -> int:
        return len(self.clips)

    def _frames(self, index: int) -> np.ndarray:
        if self._cache is not None and index in self._cache:
            return self._cache[index]
        frames = load_frames(self.clips[index].uri)
        if self._cache is not None:
            self._cache[index] = frames
        return frames

    def __getitem__(self, index: int) -> tuple[torch.Tensor, torch.Tensor]:
        clip = self.clips[index]
        frames = self._frames(index)
        picked = frames[subsample_indices(len(frames),
                                          self.cfg.frames_per_clip)]
        video = torch.from_numpy(picked).float().div_(255.0)
        video = video.permute(3, 0, 1, 2)  # (T, H, W, 3) -> (3, T, H, W)
        if self.training:
            video = augment_clip(video, self.cfg, self._gen)
        else:
            video = preprocess_clip(video, self.cfg)
        return video, torch.tensor(float(clip.label), dtype=torch.float32)
