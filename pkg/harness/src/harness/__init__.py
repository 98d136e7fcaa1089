"""Toy video-classification harness over headforge clip manifests."""
from .config import AugmentConfig, HarnessError, REGIMES, TrainConfig, load_config
from .data import (
    ClipDataset,
    Manifest,
    ManifestClip,
    augment_clip,
    load_frames,
    preprocess_clip,
    read_manifest,
    subsample_indices,
    training_clips,
)
from .model import TwoPathwayClassifier
from .predict import (
    CSV_HEADER,
    load_checkpoint,
    predict_manifest,
    score_clips,
    write_predictions,
)
from .train import TrainResult, train

__all__ = [
    "AugmentConfig",
    "CSV_HEADER",
    "ClipDataset",
    "HarnessError",
    "Manifest",
    "ManifestClip",
    "REGIMES",
    "TrainConfig",
    "TrainResult",
    "TwoPathwayClassifier",
    "augment_clip",
    "load_checkpoint",
    "load_config",
    "load_frames",
    "predict_manifest",
    "preprocess_clip",
    "read_manifest",
    "score_clips",
    "subsample_indices",
    "train",
    "training_clips",
    "write_predictions",
]
