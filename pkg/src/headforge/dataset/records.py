"""Clip records, manifests, and their NDJSON / CSV serializations.

A manifest file is newline-delimited JSON: one header object followed by
one record object per line, each record carrying its split.  The header
pins the regime and the provided-splits convention flag (validation set
identical to the test set), so a manifest is self-describing.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

__all__ = [
    "AGE_BUCKETS",
    "ClipRecord",
    "DatasetError",
    "Manifest",
    "ORIGIN_REAL",
    "ORIGIN_SYNTHETIC",
    "SPLITS",
    "STRATA_KEYS",
    "age_bucket",
    "read_manifest",
    "read_records",
    "read_strata_table",
    "write_manifest",
    "write_records",
]

ORIGIN_REAL = "real"
ORIGIN_SYNTHETIC = "synthetic"
SPLITS = ("train", "val", "test")
STRATA_KEYS = ("gender", "age_bucket", "expressiveness")
AGE_BUCKETS = ("<30", "30-45", "46-65", "66+")

_MANIFEST_KIND = "headforge-manifest"


class DatasetError(ValueError):
    pass


def age_bucket(age: int) -> str:
    if age < 30:
        return "<30"
    if age <= 45:
        return "30-45"
    if age <= 65:
        return "46-65"
    return "66+"


@dataclass(frozen=True)
class ClipRecord:
    """One video clip usable for training or evaluation.

    Real clips have no texture or view (they are camera footage); synthetic
    clips always name the view they were rendered from.
    """

    clip_id: str
    patient_id: str
    origin: str
    label: int
    uri: str
    texture_id: str | None = None
    view_name: str | None = None
    strata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.clip_id or not self.patient_id:
            raise DatasetError("clip_id and patient_id must be non-empty")
        if self.origin not in (ORIGIN_REAL, ORIGIN_SYNTHETIC):
            raise DatasetError(f"{self.clip_id}: bad origin {self.origin!r}")
        if self.label not in (0, 1):
            raise DatasetError(f"{self.clip_id}: label must be 0 or 1, "
                               f"got {self.label!r}")
        if not self.uri:
            raise DatasetError(f"{self.clip_id}: uri must be non-empty")
        if self.origin == ORIGIN_REAL and (self.texture_id is not None
                                           or self.view_name is not None):
            raise DatasetError(
                f"{self.clip_id}: real clips carry no texture or view")
        if self.origin == ORIGIN_SYNTHETIC and not self.view_name:
            raise DatasetError(
                f"{self.clip_id}: synthetic clips must name their view")
        object.__setattr__(self, "strata",
                           {str(k): str(v) for k, v in self.strata.items()})

    def as_dict(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "patient_id": self.patient_id,
            "origin": self.origin,
            "label": self.label,
            "uri": self.uri,
            "texture_id": self.texture_id,
            "view_name": self.view_name,
            "strata": dict(self.strata),
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ClipRecord":
        return cls(clip_id=raw["clip_id"], patient_id=raw["patient_id"],
                   origin=raw["origin"], label=int(raw["label"]),
                   uri=raw["uri"], texture_id=raw.get("texture_id"),
                   view_name=raw.get("view_name"),
                   strata=raw.get("strata") or {})


@dataclass
class Manifest:
    """An immutable dataset description: records plus their split map."""

    records: list[ClipRecord]
    regime: str
    split_of: dict[str, str]
    val_equals_test: bool = False

    def __post_init__(self) -> None:
        if self.regime not in ("real", "synth", "mixed"):
            raise DatasetError(f"unknown regime {self.regime!r}")
        ids = [r.clip_id for r in self.records]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DatasetError(f"duplicate clip ids: {', '.join(dupes)}")
        if set(self.split_of) != set(ids):
            raise DatasetError(
                "split assignment must cover every record exactly")
        bad = {s for s in self.split_of.values() if s not in SPLITS}
        if bad:
            raise DatasetError(f"unknown split names: {sorted(bad)}")

    def select(self, split: str) -> list[ClipRecord]:
        """Records of one split; under the provided-splits convention the
        validation selection is the test set."""
        if split not in SPLITS:
            raise DatasetError(f"unknown split {split!r}")
        if split == "val" and self.val_equals_test:
            split = "test"
        return [r for r in self.records if self.split_of[r.clip_id] == split]

    def counts(self) -> dict[str, int]:
        counts = {split: 0 for split in SPLITS}
        for split in self.split_of.values():
            counts[split] += 1
        return counts


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        header = {"kind": _MANIFEST_KIND, "version": 1,
                  "regime": manifest.regime,
                  "val_equals_test": manifest.val_equals_test,
                  "count": len(manifest.records)}
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for record in manifest.records:
            row = record.as_dict()
            row["split"] = manifest.split_of[record.clip_id]
            fh.write(json.dumps(row, separators=(",", ":"),
                                ensure_ascii=False) + "\n")


def read_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DatasetError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}:1: bad header: {exc}")
    if not isinstance(header, dict) or header.get("kind") != _MANIFEST_KIND:
        raise DatasetError(f"{path}: not a manifest file")
    records, split_of = [], {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{lineno}: bad record: {exc}")
        record = ClipRecord.from_dict(raw)
        records.append(record)
        split_of[record.clip_id] = raw["split"]
    manifest = Manifest(records=records, regime=header["regime"],
                        split_of=split_of,
                        val_equals_test=bool(header.get("val_equals_test")))
    declared = header.get("count")
    if declared is not None and declared != len(records):
        raise DatasetError(f"{path}: header declares {declared} records, "
                           f"found {len(records)}")
    return manifest


def write_records(path: str | Path, records: Iterable[ClipRecord]) -> None:
    """Write bare clip records (no header, no splits), one JSON per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.as_dict(), separators=(",", ":"),
                                ensure_ascii=False) + "\n")


def read_records(path: str | Path) -> list[ClipRecord]:
    """Read bare clip records written by :func:`write_records`."""
    path = Path(path)
    records = []
    for lineno, line in enumerate(
            path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{lineno}: bad record: {exc}")
        records.append(ClipRecord.from_dict(raw))
    return records


def read_strata_table(path: str | Path) -> dict[str, dict[str, str]]:
    """Load per-patient attributes from CSV.

    Expected columns: patient_id, gender, age, expressiveness.  The numeric
    age is reduced to its bucket.
    """
    path = Path(path)
    table: dict[str, dict[str, str]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"patient_id", "gender", "age", "expressiveness"}
        missing = required - set(reader.fieldnames or ())
        if missing:
            raise DatasetError(
                f"{path}: missing columns: {', '.join(sorted(missing))}")
        for row_no, row in enumerate(reader, start=2):
            patient = row["patient_id"].strip()
            if not patient:
                raise DatasetError(f"{path}:{row_no}: empty patient_id")
            if patient in table:
                raise DatasetError(f"{path}:{row_no}: duplicate patient "
                                   f"{patient}")
            try:
                age = int(row["age"])
            except ValueError:
                raise DatasetError(
                    f"{path}:{row_no}: age must be an integer, "
                    f"got {row['age']!r}")
            table[patient] = {
                "gender": row["gender"].strip(),
                "age_bucket": age_bucket(age),
                "expressiveness": row["expressiveness"].strip(),
            }
    return table


def attach_strata(records: Iterable[ClipRecord],
                  table: Mapping[str, Mapping[str, str]],
                  keys: Sequence[str] = STRATA_KEYS) -> list[ClipRecord]:
    """Return copies of ``records`` with strata filled from ``table``."""
    out = []
    for record in records:
        strata = table.get(record.patient_id)
        if strata is None:
            raise DatasetError(
                f"{record.clip_id}: no strata for patient "
                f"{record.patient_id}")
        merged = dict(record.strata)
        merged.update({k: strata[k] for k in keys})
        out.append(replace(record, strata=merged))
    return out
