"""Shared toy corpus and oracles for the harness tests.

Everything here is written against the dataset pipeline's *file formats*
only: manifests are hand-assembled NDJSON objects and clips are hand-written
``frame_0000.png`` directories, so these tests double as a contract check.

Clips carry a label-correlated signal: positive clips are brighter and show
a striped texture patch.  Real-domain clips have a wide class gap with
per-clip jitter; synthetic-domain clips are channel-tinted with a narrower
gap, emulating an imperfect-but-useful proxy of the real data.  Training on
either learns the same polarity, but only real data matches the test
distribution — which is what the regime-comparison tests probe.
"""
from __future__ import annotations

import json
import shutil
import subprocess
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest
from PIL import Image

FRAME_SIZE = 64
FRAMES_PER_CLIP = 16
REAL_MEANS = (40.0, 200.0)    # label 0 / label 1 mean gray level
SYNTH_MEANS = (80.0, 160.0)
REAL_JITTER = 18.0            # per-clip drift of that mean
SYNTH_JITTER = 15.0
REAL_STRIPE = 70.0            # texture-patch amplitude on positive clips
SYNTH_STRIPE = 35.0
SYNTH_TINT = (0.80, 0.90, 1.15)
PIXEL_NOISE = 10.0


def pairwise_auroc(labels, scores) -> float:
    """O(n^2) probability-of-correct-ranking oracle, half credit for ties."""
    pos = [s for y, s in zip(labels, scores) if y == 1]
    neg = [s for y, s in zip(labels, scores) if y == 0]
    if not pos or not neg:
        raise ValueError("need both classes")
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0
               for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def clip_frames(rng: np.random.Generator, label: int, domain: str,
                frames: int = FRAMES_PER_CLIP,
                size: int = FRAME_SIZE) -> np.ndarray:
    """A (T, H, W, 3) uint8 clip whose brightness and texture encode the
    label: positive clips are brighter and carry a striped center patch."""
    if domain == "real":
        mean = REAL_MEANS[label] + rng.normal(0.0, REAL_JITTER)
        stripe_amp, tint = REAL_STRIPE, (1.0, 1.0, 1.0)
    else:
        mean = SYNTH_MEANS[label] + rng.normal(0.0, SYNTH_JITTER)
        stripe_amp, tint = SYNTH_STRIPE, SYNTH_TINT
    patch = size // 4
    lo = (size - patch) // 2
    jy, jx = (rng.integers(-2, 3, size=2) if lo >= 2 else (0, 0))
    stripes = np.zeros((patch, patch))
    stripes[:, 0::4] = stripe_amp
    stripes[:, 1::4] = stripe_amp
    clip = np.empty((frames, size, size, 3), dtype=np.float64)
    for t in range(frames):
        frame = mean + rng.normal(0.0, PIXEL_NOISE, size=(size, size, 3))
        x = (t * 3) % max(1, size - 12)
        frame[size // 3:size // 3 + 8, x:x + 8] += 45.0  # moving distractor
        if label == 1:
            frame[lo + jy:lo + jy + patch,
                  lo + jx:lo + jx + patch] += stripes[..., None]
        clip[t] = frame * np.asarray(tint)
    return np.clip(clip, 0, 255).astype(np.uint8)


def noise_frames(rng: np.random.Generator, frames: int = 8,
                 size: int = FRAME_SIZE) -> np.ndarray:
    """A label-free clip: pure noise around mid-gray."""
    clip = 128.0 + rng.normal(0.0, 20.0, size=(frames, size, size, 3))
    return np.clip(clip, 0, 255).astype(np.uint8)


def write_clip(clip_dir: Path, frames: np.ndarray) -> None:
    clip_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        Image.fromarray(frame).save(clip_dir / f"frame_{i:04d}.png")


def clip_row(clip_id: str, patient_id: str, origin: str, label: int,
             uri: str, split: str, texture_id: str | None = None,
             view_name: str | None = None) -> dict:
    if origin == "synthetic" and view_name is None:
        view_name = "front"
    return {"clip_id": clip_id, "patient_id": patient_id, "origin": origin,
            "label": label, "uri": uri, "texture_id": texture_id,
            "view_name": view_name, "strata": {}, "split": split}


def write_manifest_file(path: Path, regime: str, rows: list[dict],
                        val_equals_test: bool = False) -> Path:
    header = {"kind": "headforge-manifest", "version": 1, "regime": regime,
              "val_equals_test": val_equals_test, "count": len(rows)}
    lines = [json.dumps(header)] + [json.dumps(row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def oracle():
    return pairwise_auroc


@pytest.fixture(scope="session")
def builders():
    """The corpus construction helpers, for tests that roll their own."""
    return SimpleNamespace(clip_frames=clip_frames, write_clip=write_clip,
                           clip_row=clip_row,
                           write_manifest_file=write_manifest_file,
                           noise_frames=noise_frames)


@pytest.fixture(scope="session")
def corpus(tmp_path_factory) -> SimpleNamespace:
    """Toy clips plus one manifest per training regime.

    - 8 real training clips (4 patients), 10 real test clips (5 patients),
      labels balanced.
    - 16 synthetic training clips: two texture variants of each real
      training clip; 4 synthetic validation clips from test patients.
    - 60 pure-noise clips for score-sanity checks.
    All three regime manifests share the same 10 real test clips.
    """
    root = tmp_path_factory.mktemp("corpus")
    clips_dir = root / "clips"
    rng = np.random.default_rng(20240814)

    def realize(clip_id: str, label: int, domain: str) -> str:
        uri = clips_dir / clip_id
        write_clip(uri, clip_frames(rng, label, domain))
        return str(uri)

    real_train, real_test = [], []
    for c in range(8):
        clip_id, label = f"rtr{c:02d}", c % 2
        real_train.append(clip_row(clip_id, f"rp{c // 2:02d}", "real", label,
                                   realize(clip_id, label, "real"), "train"))
    for c in range(10):
        clip_id, label = f"rte{c:02d}", c % 2
        real_test.append(clip_row(clip_id, f"rq{c // 2:02d}", "real", label,
                                  realize(clip_id, label, "real"), "test"))

    synth_train = []
    for c in range(8):
        for k in range(2):
            clip_id, label = f"str{c:02d}t{k}", c % 2
            synth_train.append(
                clip_row(clip_id, f"rp{c // 2:02d}", "synthetic", label,
                         realize(clip_id, label, "synth"), "train",
                         texture_id=f"tex{k}"))
    synth_val = []
    for c in range(4):
        clip_id, label = f"sva{c:02d}", c % 2
        synth_val.append(
            clip_row(clip_id, f"rq{c // 2:02d}", "synthetic", label,
                     realize(clip_id, label, "synth"), "val",
                     texture_id="tex2"))

    noise_rows = []
    for c in range(60):
        clip_id, label = f"nz{c:02d}", c % 2
        uri = clips_dir / clip_id
        write_clip(uri, noise_frames(rng))
        noise_rows.append(clip_row(clip_id, f"np{c:02d}", "real", label,
                                   str(uri), "test"))

    real_manifest = write_manifest_file(
        root / "real.ndjson", "real", real_train + real_test,
        val_equals_test=True)
    synth_manifest = write_manifest_file(
        root / "synth.ndjson", "synth", synth_train + synth_val + real_test)
    mixed_manifest = write_manifest_file(
        root / "mixed.ndjson", "mixed",
        real_train + synth_train + synth_val + real_test)
    noise_manifest = write_manifest_file(
        root / "noise.ndjson", "real", noise_rows)

    return SimpleNamespace(
        root=root, clips_dir=clips_dir,
        real_manifest=real_manifest, synth_manifest=synth_manifest,
        mixed_manifest=mixed_manifest, noise_manifest=noise_manifest,
        n_real_train=len(real_train), n_real_test=len(real_test),
        n_synth_train=len(synth_train), n_synth_val=len(synth_val),
        test_ids=[row["clip_id"] for row in real_test])


@pytest.fixture(scope="session")
def trained_real(corpus, tmp_path_factory):
    """One toy training run on the real manifest, shared by scoring tests."""
    from harness import TrainConfig, train

    out_dir = tmp_path_factory.mktemp("trained_real")
    config = TrainConfig.toy("real", seed=11)
    return train(config, corpus.real_manifest, out_dir)


@pytest.fixture(scope="session")
def headforge_eval():
    """Run the grading CLI on a prediction CSV and return its JSON report."""
    if shutil.which("headforge") is None:
        pytest.fail("the headforge CLI must be installed for these tests")

    def run(csv_path, *extra: str) -> dict:
        proc = subprocess.run(
            ["headforge", "eval", "--pred", str(csv_path), *extra],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        return json.loads(proc.stdout)

    return run
