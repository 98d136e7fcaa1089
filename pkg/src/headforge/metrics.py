"""Binary pain-classification metrics over (clip, label, score) prediction rows.

AUROC uses the rank-based Mann-Whitney estimator (ties get half credit),
F1 and accuracy threshold the scores, and the weighted binary cross-entropy
mirrors the training loss so reported loss values are comparable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

SCORE_EPS = 1e-7

CSV_HEADER = ["clip_id", "label", "score"]


class MetricError(ValueError):
    """A metric is undefined for the given inputs (e.g. single-class AUROC)."""


@dataclass(frozen=True)
class PredictionRecord:
    clip_id: str
    label: int
    score: float

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if not math.isfinite(self.score) or not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be finite in [0, 1], got {self.score!r}")


@dataclass(frozen=True)
class MetricReport:
    auroc: float
    f1: float
    accuracy: float
    threshold: float
    n_pos: int
    n_neg: int

    def as_dict(self) -> dict:
        return {
            "auroc": self.auroc,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "threshold": self.threshold,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
        }


def _tied_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks with ties replaced by their group's average rank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2.0  # ranks are 1-based
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def auroc(records: Sequence[PredictionRecord]) -> float:
    """P(score of a random positive > random negative), half credit for ties."""
    n_pos = sum(r.label for r in records)
    n_neg = len(records) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUROC is undefined without both classes present")
    ranks = _tied_ranks([r.score for r in records])
    rank_sum_pos = sum(rank for rank, r in zip(ranks, records) if r.label == 1)
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def _confusion(records: Sequence[PredictionRecord], threshold: float):
    tp = fp = fn = tn = 0
    for r in records:
        predicted = r.score >= threshold
        if r.label == 1:
            tp, fn = tp + predicted, fn + (not predicted)
        else:
            fp, tn = fp + predicted, tn + (not predicted)
    return tp, fp, fn, tn


def f1(records: Sequence[PredictionRecord], threshold: float = 0.5) -> float:
    """F1 at the given decision threshold; 0 when no positives exist or are predicted."""
    if not records:
        raise MetricError("F1 is undefined on an empty record set")
    tp, fp, fn, _ = _confusion(records, threshold)
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def accuracy(records: Sequence[PredictionRecord], threshold: float = 0.5) -> float:
    if not records:
        raise MetricError("accuracy is undefined on an empty record set")
    tp, _, _, tn = _confusion(records, threshold)
    return (tp + tn) / len(records)


def weighted_bce(records: Sequence[PredictionRecord],
                 pos_weight: float = 1.0, neg_weight: float = 1.0) -> float:
    """Mean of -[w_pos*y*ln(p) + w_neg*(1-y)*ln(1-p)] with p clamped to [eps, 1-eps]."""
    if pos_weight <= 0 or neg_weight <= 0:
        raise ValueError("class weights must be positive")
    if not records:
        raise MetricError("BCE is undefined on an empty record set")
    total = 0.0
    for r in records:
        p = min(max(r.score, SCORE_EPS), 1.0 - SCORE_EPS)
        if r.label == 1:
            total -= pos_weight * math.log(p)
        else:
            total -= neg_weight * math.log(1.0 - p)
    return total / len(records)


def inverse_frequency_weights(labels: Iterable[int]) -> tuple[float, float]:
    """Default class weights: n / (2 * class count) per class."""
    labels = list(labels)
    n_pos = sum(labels)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("inverse-frequency weights need both classes")
    n = len(labels)
    return n / (2.0 * n_pos), n / (2.0 * n_neg)


def evaluate(records: Sequence[PredictionRecord], threshold: float = 0.5) -> MetricReport:
    n_pos = sum(r.label for r in records)
    return MetricReport(
        auroc=auroc(records),
        f1=f1(records, threshold),
        accuracy=accuracy(records, threshold),
        threshold=threshold,
        n_pos=n_pos,
        n_neg=len(records) - n_pos,
    )


def read_predictions(path: str | Path) -> list[PredictionRecord]:
    """Read a prediction CSV with the exact header clip_id,label,score."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(
                f"{path}: expected header {','.join(CSV_HEADER)!r}, got {header!r}"
            )
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            records.append(PredictionRecord(row[0], int(row[1]), float(row[2])))
    return records


def write_predictions(path: str | Path, records: Iterable[PredictionRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow([r.clip_id, r.label, repr(r.score)])
