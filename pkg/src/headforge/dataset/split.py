"""Patient-atomic stratified splitting.

All clips of a patient land in the same split.  Patients are visited in a
seeded random order and greedily assigned to whichever split is currently
furthest below its target, summed over the requested strata plus overall
size.  The result reports the worst per-stratum proportion deviation and a
best-effort flag when the tolerance could not be met.
"""
from __future__ import annotations

import logging
import random
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .records import ClipRecord, DatasetError, STRATA_KEYS

__all__ = ["SplitResult", "stratified_split"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SplitResult:
    """Outcome of a stratified split: patient -> split name."""

    assignment: dict[str, str]
    split_names: tuple[str, ...]
    best_effort: bool
    max_deviation: float
    deviations: dict[tuple[str, str, str], float]

    def split_for_clip(self, record: ClipRecord) -> str:
        return self.assignment[record.patient_id]


def _patient_strata(records: Iterable[ClipRecord],
                    strata_keys: Sequence[str]) -> dict[str, dict[str, str]]:
    strata: dict[str, dict[str, str]] = {}
    for record in records:
        values = {}
        for key in strata_keys:
            if key not in record.strata:
                raise DatasetError(
                    f"{record.clip_id}: record lacks stratum {key!r}")
            values[key] = record.strata[key]
        seen = strata.setdefault(record.patient_id, values)
        if seen != values:
            raise DatasetError(
                f"patient {record.patient_id} has inconsistent strata "
                f"across records")
    return strata


def stratified_split(records: Sequence[ClipRecord],
                     ratios: Sequence[float] = (0.8, 0.2),
                     strata_keys: Sequence[str] = STRATA_KEYS,
                     tolerance: float = 0.05,
                     seed: int = 0,
                     split_names: Sequence[str] = ("train", "val"),
                     ) -> SplitResult:
    if not records:
        raise DatasetError("cannot split an empty record list")
    if len(ratios) != len(split_names):
        raise DatasetError("ratios and split_names must align")
    if any(r <= 0 for r in ratios):
        raise DatasetError("split ratios must be positive")
    total_ratio = float(sum(ratios))
    ratios = [r / total_ratio for r in ratios]
    split_names = tuple(split_names)
    strata_keys = tuple(strata_keys)

    strata = _patient_strata(records, strata_keys)
    patients = sorted(strata)
    rng = random.Random(seed)
    rng.shuffle(patients)
    n_patients = len(patients)

    totals: dict[str, Counter] = {key: Counter() for key in strata_keys}
    for values in strata.values():
        for key in strata_keys:
            totals[key][values[key]] += 1

    best_effort = False
    if n_patients < len(split_names):
        logger.warning("only %d patients for %d splits; split is "
                       "best-effort", n_patients, len(split_names))
        best_effort = True
    for key in strata_keys:
        thin = [c for c, n in totals[key].items() if n < len(split_names)]
        if thin:
            logger.warning("stratum %s has categories with fewer patients "
                           "than splits (%s); balance is best-effort",
                           key, ", ".join(sorted(thin)))
            best_effort = True

    sizes = {name: 0 for name in split_names}
    counts: dict[str, dict[str, Counter]] = {
        name: {key: Counter() for key in strata_keys} for name in split_names}

    assignment: dict[str, str] = {}
    for patient in patients:
        values = strata[patient]
        best_name, best_score = split_names[0], float("-inf")
        for name, ratio in zip(split_names, ratios):
            # How far below target this split is, summed over each of the
            # patient's categories plus overall size.
            score = ratio * n_patients - sizes[name]
            for key in strata_keys:
                category = values[key]
                score += (ratio * totals[key][category]
                          - counts[name][key][category])
            if score > best_score:
                best_name, best_score = name, score
        assignment[patient] = best_name
        sizes[best_name] += 1
        for key in strata_keys:
            counts[best_name][key][values[key]] += 1

    deviations: dict[tuple[str, str, str], float] = {}
    for name in split_names:
        if sizes[name] == 0:
            continue
        for key in strata_keys:
            for category, total in totals[key].items():
                have = counts[name][key][category] / sizes[name]
                want = total / n_patients
                deviations[(key, category, name)] = abs(have - want)
    max_deviation = max(deviations.values(), default=0.0)
    if max_deviation > tolerance:
        logger.warning("stratified split deviation %.3f exceeds tolerance "
                       "%.3f; keeping best effort", max_deviation, tolerance)
        best_effort = True

    return SplitResult(assignment=assignment, split_names=split_names,
                       best_effort=best_effort, max_deviation=max_deviation,
                       deviations=deviations)
