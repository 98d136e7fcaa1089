"""Scoring clips with a trained checkpoint and writing prediction CSVs.

The CSV (header ``clip_id,label,score``, sigmoid scores in [0, 1]) is the
hand-off format the metrics CLI consumes.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import torch
from torch.utils.data import DataLoader

from .config import HarnessError, TrainConfig
from .data import ClipDataset, Manifest, ManifestClip, read_manifest
from .model import TwoPathwayClassifier

__all__ = [
    "CSV_HEADER",
    "load_checkpoint",
    "predict_manifest",
    "score_clips",
    "write_predictions",
]

CSV_HEADER = ("clip_id", "label", "score")
CHECKPOINT_KIND = "harness-checkpoint"


def save_checkpoint(path: str | Path, model: TwoPathwayClassifier,
                    config: TrainConfig) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({"kind": CHECKPOINT_KIND, "version": 1,
                "config": config.as_dict(),
                "model_state": model.state_dict()}, path)


def load_checkpoint(path: str | Path) -> tuple[TwoPathwayClassifier,
                                               TrainConfig]:
    path = Path(path)
    try:
        raw = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise HarnessError(f"{path}: cannot load checkpoint: {exc}")
    if not isinstance(raw, dict) or raw.get("kind") != CHECKPOINT_KIND:
        raise HarnessError(f"{path}: not a harness checkpoint")
    config = TrainConfig.from_dict(raw["config"])
    model = TwoPathwayClassifier()
    model.load_state_dict(raw["model_state"])
    model.eval()
    return model, config


def score_clips(model: TwoPathwayClassifier, clips: Sequence[ManifestClip],
                config: TrainConfig) -> list[float]:
    """Sigmoid scores for ``clips`` under evaluation preprocessing, in clip
    order."""
    dataset = ClipDataset(tuple(clips), config.augment, training=False)
    loader = DataLoader(dataset, batch_size=config.batch_size, shuffle=False)
    model.eval()
    scores: list[float] = []
    with torch.no_grad():
        for videos, _ in loader:
            scores.extend(torch.sigmoid(model(videos)).tolist())
    return scores


def write_predictions(path: str | Path, clips: Sequence[ManifestClip],
                      scores: Sequence[float]) -> Path:
    if len(clips) != len(scores):
        raise HarnessError(f"{len(clips)} clips but {len(scores)} scores")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for clip, score in zip(clips, scores):
            writer.writerow([clip.clip_id, clip.label, f"{score:.6f}"])
    return path


def predict_split(model: TwoPathwayClassifier, config: TrainConfig,
                  manifest: Manifest, split: str,
                  out_csv: str | Path) -> Path:
    clips = manifest.split(split)
    if not clips:
        raise HarnessError(f"split {split!r} is empty")
    scores = score_clips(model, clips, config)
    return write_predictions(out_csv, clips, scores)


def predict_manifest(checkpoint_path: str | Path, manifest_path: str | Path,
                     split: str, out_csv: str | Path) -> Path:
    """CLI entry: load a checkpoint, score one split, write the CSV."""
    model, config = load_checkpoint(checkpoint_path)
    manifest = read_manifest(manifest_path)
    return predict_split(model, config, manifest, split, out_csv)
