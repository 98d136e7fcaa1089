"""Training-run configuration.

Full-scale defaults (100 epochs, batch 64, SGD at lr 0.01 with weight decay
1e-5 and momentum 0.9, progress assessed every 10 epochs) describe the
reference setup; :meth:`TrainConfig.toy` shrinks the budget to something a
laptop CPU finishes in seconds.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping

__all__ = [
    "AugmentConfig",
    "HarnessError",
    "REGIMES",
    "TrainConfig",
    "load_config",
]

REGIMES = ("real", "synth", "mixed")


class HarnessError(ValueError):
    """Configuration, manifest, or data problem the caller must fix."""


@dataclass(frozen=True)
class AugmentConfig:
    """Clip preprocessing knobs.

    Training draws a random short-side target from ``scale_range``, crops a
    random ``crop_size`` square, and flips horizontally with probability
    ``hflip_prob``.  Evaluation scales the short side to ``scale_range[0]``
    and center-crops.  Both paths first subsample each clip to
    ``frames_per_clip`` evenly spaced frames.
    """

    frames_per_clip: int = 16
    scale_range: tuple[int, int] = (64, 80)
    crop_size: int = 56
    hflip_prob: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "scale_range", tuple(self.scale_range))
        if self.frames_per_clip <= 0:
            raise HarnessError("frames_per_clip must be positive")
        lo, hi = self.scale_range
        if not (0 < lo <= hi):
            raise HarnessError(f"bad scale_range {self.scale_range!r}")
        if not 0 < self.crop_size <= lo:
            raise HarnessError(
                "crop_size must be positive and no larger than the smallest "
                f"short-side scale, got crop {self.crop_size} for range "
                f"{self.scale_range}")
        if not 0.0 <= self.hflip_prob <= 1.0:
            raise HarnessError("hflip_prob must lie in [0, 1]")


@dataclass(frozen=True)
class TrainConfig:
    regime: str
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 0.01
    weight_decay: float = 1e-5
    momentum: float = 0.9
    eval_interval: int = 10
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.regime not in REGIMES:
            raise HarnessError(f"unknown regime {self.regime!r}; "
                               f"expected one of {REGIMES}")
        for name in ("epochs", "batch_size", "learning_rate", "weight_decay",
                     "momentum", "eval_interval"):
            if getattr(self, name) <= 0:
                raise HarnessError(f"{name} must be positive, "
                                   f"got {getattr(self, name)!r}")

    @classmethod
    def toy(cls, regime: str, **overrides) -> "TrainConfig":
        """CPU-sized budget: 10 epochs, batches of 8."""
        defaults = {"epochs": 10, "batch_size": 8}
        defaults.update(overrides)
        return cls(regime=regime, **defaults)

    def eval_epochs(self) -> tuple[int, ...]:
        """Epochs after which the model is scored on the validation split.

        Every ``eval_interval`` epochs; if the interval does not divide the
        budget, a final evaluation at the last epoch is forced.
        """
        marks = list(range(self.eval_interval, self.epochs + 1,
                           self.eval_interval))
        if not marks or marks[-1] != self.epochs:
            marks.append(self.epochs)
        return tuple(marks)

    def as_dict(self) -> dict:
        raw = asdict(self)
        raw["augment"]["scale_range"] = list(self.augment.scale_range)
        return raw

    @classmethod
    def from_dict(cls, raw: Mapping) -> "TrainConfig":
        raw = dict(raw)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise HarnessError(
                f"unknown config keys: {', '.join(sorted(unknown))}")
        augment = raw.pop("augment", None)
        if augment is not None:
            if not isinstance(augment, AugmentConfig):
                extra = set(augment) - set(AugmentConfig.__dataclass_fields__)
                if extra:
                    raise HarnessError(
                        f"unknown augment keys: {', '.join(sorted(extra))}")
                augment = AugmentConfig(**augment)
            raw["augment"] = augment
        return cls(**raw)

    def replace(self, **changes) -> "TrainConfig":
        return replace(self, **changes)


def load_config(path: str | Path) -> tuple[TrainConfig, dict]:
    """Read a JSON config file.

    Returns the parsed :class:`TrainConfig` plus a dict of run-level extras
    the file may carry alongside the hyperparameters (``manifest`` and
    ``out_dir`` paths), so ``harness train --config run.json`` is a complete
    invocation.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise HarnessError(f"{path}: not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise HarnessError(f"{path}: config must be a JSON object")
    extras = {key: raw.pop(key)
              for key in ("manifest", "out_dir") if key in raw}
    return TrainConfig.from_dict(raw), extras
