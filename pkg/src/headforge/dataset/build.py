"""Assemble manifests for the three training regimes and audit them.

Regimes:

* ``real``   - real clips only, with a provided train/test partition; the
               validation set is the test set by convention.
* ``synth``  - synthetic clips for train/val, real clips held out as test.
* ``mixed``  - union of the two: real and synthetic training clips
               together, validated on synthetic, tested on real.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .records import (ClipRecord, DatasetError, Manifest, ORIGIN_REAL,
                      ORIGIN_SYNTHETIC)

__all__ = ["LeakageReport", "build_manifest", "verify_leakage"]


def _check_origin(records: Sequence[ClipRecord], origin: str,
                  role: str) -> None:
    bad = [r.clip_id for r in records if r.origin != origin]
    if bad:
        raise DatasetError(f"{role} records must have origin {origin!r}: "
                           f"{', '.join(sorted(bad)[:5])}")


def _check_collisions(real: Sequence[ClipRecord],
                      synth: Sequence[ClipRecord]) -> None:
    overlap = {r.clip_id for r in real} & {r.clip_id for r in synth}
    if overlap:
        raise DatasetError(
            f"clip ids present in both sources: "
            f"{', '.join(sorted(overlap)[:5])}")


def _lookup_split(split_map: Mapping[str, str], record: ClipRecord,
                  allowed: tuple[str, ...], role: str) -> str:
    split = split_map.get(record.clip_id)
    if split is None:
        raise DatasetError(f"{role} split missing clip {record.clip_id}")
    if split not in allowed:
        raise DatasetError(
            f"{record.clip_id}: {role} split must be one of {allowed}, "
            f"got {split!r}")
    return split


def build_manifest(regime: str,
                   real: Sequence[ClipRecord] = (),
                   synth: Sequence[ClipRecord] = (),
                   real_split: Mapping[str, str] | None = None,
                   synth_split: Mapping[str, str] | None = None,
                   ) -> Manifest:
    """Combine record sources into one manifest for the given regime.

    ``real_split`` maps real clip ids to train/test; ``synth_split`` maps
    synthetic clip ids to train/val.  The mixed regime is the union of the
    other two sources, so a clip id appearing in both is an error.
    """
    _check_origin(real, ORIGIN_REAL, "real")
    _check_origin(synth, ORIGIN_SYNTHETIC, "synthetic")

    if regime == "real":
        if synth:
            raise DatasetError("real regime takes no synthetic records")
        if not real:
            raise DatasetError("real regime needs real records")
        if real_split is None:
            raise DatasetError("real regime needs a train/test split")
        split_of = {r.clip_id: _lookup_split(real_split, r,
                                             ("train", "test"), "real")
                    for r in real}
        return Manifest(records=list(real), regime="real",
                        split_of=split_of, val_equals_test=True)

    if regime == "synth":
        if not synth:
            raise DatasetError("synth regime needs synthetic records")
        if synth_split is None:
            raise DatasetError("synth regime needs a train/val split for "
                               "synthetic records")
        _check_collisions(real, synth)
        split_of = {r.clip_id: _lookup_split(synth_split, r,
                                             ("train", "val"), "synthetic")
                    for r in synth}
        test_real = _held_out_real(real, real_split)
        split_of.update({r.clip_id: "test" for r in test_real})
        return Manifest(records=list(synth) + test_real, regime="synth",
                        split_of=split_of)

    if regime == "mixed":
        if not real or not synth:
            raise DatasetError("mixed regime needs both record sources")
        if real_split is None:
            raise DatasetError("mixed regime needs a real train/test split")
        _check_collisions(real, synth)
        split_of = {r.clip_id: _lookup_split(real_split, r,
                                             ("train", "test"), "real")
                    for r in real}
        for record in synth:
            if synth_split is None:
                split_of[record.clip_id] = "train"
            else:
                split_of[record.clip_id] = _lookup_split(
                    synth_split, record, ("train", "val"), "synthetic")
        return Manifest(records=list(real) + list(synth), regime="mixed",
                        split_of=split_of)

    raise DatasetError(f"unknown regime {regime!r}")


def _held_out_real(real: Sequence[ClipRecord],
                   real_split: Mapping[str, str] | None,
                   ) -> list[ClipRecord]:
    """The real records used for testing: the provided test partition when
    a split is given, otherwise all of them."""
    if real_split is None:
        return list(real)
    return [r for r in real
            if _lookup_split(real_split, r, ("train", "test"),
                             "real") == "test"]


@dataclass(frozen=True)
class LeakageReport:
    """Audit of split hygiene for one manifest.

    ``real_patient_overlaps`` and ``duplicate_uris`` are hard failures.
    ``synthetic_patient_overlaps`` lists patients whose synthetic variants
    span splits while their real footage stays put -- allowed by design,
    reported for visibility.  ``shared_textures`` is likewise advisory.
    """

    real_patient_overlaps: dict[str, tuple[str, ...]] = field(
        default_factory=dict)
    duplicate_uris: dict[str, tuple[str, ...]] = field(default_factory=dict)
    shared_textures: dict[str, tuple[str, ...]] = field(default_factory=dict)
    synthetic_patient_overlaps: dict[str, tuple[str, ...]] = field(
        default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.real_patient_overlaps and not self.duplicate_uris

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "real_patient_overlaps": {k: list(v) for k, v in
                                      self.real_patient_overlaps.items()},
            "duplicate_uris": {k: list(v) for k, v in
                               self.duplicate_uris.items()},
            "shared_textures": {k: list(v) for k, v in
                                self.shared_textures.items()},
            "synthetic_patient_overlaps": {
                k: list(v) for k, v in
                self.synthetic_patient_overlaps.items()},
        }


def verify_leakage(manifest: Manifest) -> LeakageReport:
    """Check a manifest for split leakage.

    Hard failures: a patient's *real* clips in more than one split, or the
    same uri reachable from more than one split.  Texture ids shared across
    splits and synthetic-only patient overlap are reported but allowed.
    """
    real_splits: dict[str, set[str]] = defaultdict(set)
    all_splits: dict[str, set[str]] = defaultdict(set)
    texture_splits: dict[str, set[str]] = defaultdict(set)
    uri_splits: dict[str, set[str]] = defaultdict(set)

    for record in manifest.records:
        split = manifest.split_of[record.clip_id]
        all_splits[record.patient_id].add(split)
        if record.origin == ORIGIN_REAL:
            real_splits[record.patient_id].add(split)
        if record.texture_id is not None:
            texture_splits[record.texture_id].add(split)
        uri_splits[record.uri].add(split)

    real_overlaps = {p: tuple(sorted(s)) for p, s in real_splits.items()
                     if len(s) > 1}
    synth_overlaps = {p: tuple(sorted(s)) for p, s in all_splits.items()
                      if len(s) > 1 and p not in real_overlaps}
    shared_textures = {t: tuple(sorted(s)) for t, s in texture_splits.items()
                       if len(s) > 1}
    duplicate_uris = {u: tuple(sorted(s)) for u, s in uri_splits.items()
                      if len(s) > 1}
    return LeakageReport(real_patient_overlaps=real_overlaps,
                         duplicate_uris=duplicate_uris,
                         shared_textures=shared_textures,
                         synthetic_patient_overlaps=synth_overlaps)
