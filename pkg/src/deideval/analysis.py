"""Ground-truth retention, correlation statistics, false-positive sampling
and the human-annotation record format.

The annotation CSV written here is the file physicians triage; its header
and field order are fixed and the annotation service persists the same
format byte for byte.
"""

from __future__ import annotations

import csv
import io
import logging
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InputError
from .scoring import TokenVerdict
from .textcore import levenshtein

__all__ = [
    "FpCategory",
    "Severity",
    "FpSample",
    "GroundTruthLabel",
    "CorrelationReport",
    "TallyReport",
    "ground_truth_cir",
    "pearson",
    "spearman",
    "sample_false_positives",
    "build_context",
    "tally_annotations",
    "correlate",
    "ANNOTATION_HEADER",
    "annotation_csv_bytes",
    "write_annotation_csv",
    "read_annotation_csv",
]

log = logging.getLogger(__name__)


class FpCategory(Enum):
    CLINICALLY_RELEVANT = "ClinicallyRelevant"
    CLINICALLY_IRRELEVANT = "ClinicallyIrrelevant"
    PROVIDER_CLINIC_INFO = "ProviderClinicInfo"
    INSENSITIVE_IDENTIFIER = "InsensitiveIdentifier"
    CORRECT_DEID_MISSED_BY_HUMAN = "CorrectDeidMissedByHuman"
    UNKNOWN = "Unknown"

    @classmethod
    def from_string(cls, name: str) -> "FpCategory":
        for member in cls:
            if member.value == name:
                return member
        raise InputError(f"unknown category: {name!r}")


class Severity(Enum):
    HIGH = "High"
    LOW = "Low"
    NOT_APPLICABLE = "NotApplicable"

    @classmethod
    def from_string(cls, name: str) -> "Severity":
        for member in cls:
            if member.value == name:
                return member
        raise InputError(f"unknown severity: {name!r}")


@dataclass(frozen=True)
class FpSample:
    """One sampled false positive awaiting (or carrying) human triage."""

    file_name: str
    edit_distance: int
    original_token: str
    deid_token: str
    context: str
    category: FpCategory = FpCategory.UNKNOWN
    severity: Severity = Severity.NOT_APPLICABLE

    def __post_init__(self):
        relevant = self.category is FpCategory.CLINICALLY_RELEVANT
        has_severity = self.severity is not Severity.NOT_APPLICABLE
        if relevant != has_severity:
            raise InputError(
                "severity must be High or Low exactly when the category is "
                f"ClinicallyRelevant (got {self.category.value}/{self.severity.value})"
            )


@dataclass(frozen=True)
class GroundTruthLabel:
    doc_id: str
    pair_index: int
    clinically_changed: bool


@dataclass(frozen=True)
class CorrelationReport:
    metric: str
    pearson_r: Optional[float]
    spearman_rho: Optional[float]
    n: int

    def to_json(self) -> dict:
        return {
            "metric": self.metric,
            "pearson_r": self.pearson_r,
            "spearman_rho": self.spearman_rho,
            "n": self.n,
        }


def ground_truth_cir(labels: Sequence[GroundTruthLabel]) -> float:
    """Fraction of sentence/chunk pairs left clinically unchanged."""
    if not labels:
        raise InputError("ground_truth_cir needs at least one label")
    unchanged = sum(not lab.clinically_changed for lab in labels)
    return unchanged / len(labels)


def pearson(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Sample Pearson correlation; None when either vector is constant."""
    if len(x) != len(y):
        raise InputError("pearson needs equal-length vectors")
    if len(x) < 2:
        raise InputError("pearson needs at least two points")
    ax = np.asarray(x, dtype=float)
    ay = np.asarray(y, dtype=float)
    dx = ax - ax.mean()
    dy = ay - ay.mean()
    denom = np.sqrt((dx * dx).sum() * (dy * dy).sum())
    if denom == 0.0:
        return None
    return float((dx * dy).sum() / denom)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        # 1-based ranks; ties share the mean of their rank block
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Pearson correlation of average ranks (ties get their mean rank)."""
    if len(x) != len(y):
        raise InputError("spearman needs equal-length vectors")
    if len(x) < 2:
        raise InputError("spearman needs at least two points")
    rx = _average_ranks(np.asarray(x, dtype=float))
    ry = _average_ranks(np.asarray(y, dtype=float))
    return pearson(rx, ry)


def build_context(verdicts: Sequence[TokenVerdict], i: int) -> str:
    """Annotation context string around verdict i.

    Shape: "… / prev / prev / original / deid / next / next / …" with
    neighbors taken from the original text; absent neighbors at document
    edges are dropped together with their separator.
    """
    if not 0 <= i < len(verdicts):
        raise InputError(f"verdict index {i} out of range")
    parts = ["…"]
    for k in (i - 2, i - 1):
        if k >= 0:
            parts.append(verdicts[k].original_text)
    parts.append(verdicts[i].original_text)
    parts.append(verdicts[i].deid_text)
    for k in (i + 1, i + 2):
        if k < len(verdicts):
            parts.append(verdicts[k].original_text)
    parts.append("…")
    return " / ".join(parts)


def sample_false_positives(
    verdicts_by_doc: Sequence[tuple[str, Sequence[TokenVerdict]]],
    n: int,
    seed: int,
) -> list[FpSample]:
    """Uniform sample (without replacement) of min(n, #FP) false positives.

    Each sample carries the edit distance between the token pair, the
    formatted context, category Unknown and severity NotApplicable.
    """
    if n < 1:
        raise InputError("sample size must be at least 1")
    pool: list[tuple[str, Sequence[TokenVerdict], int]] = []
    for file_name, verdicts in verdicts_by_doc:
        for i, v in enumerate(verdicts):
            if v.predicted_sensitive and not v.gold_sensitive:
                pool.append((file_name, verdicts, i))
    if not pool:
        log.warning("no false positives to sample")
        return []
    rng = random.Random(seed)
    chosen = pool if len(pool) <= n else rng.sample(pool, n)
    samples = []
    for file_name, verdicts, i in chosen:
        v = verdicts[i]
        samples.append(
            FpSample(
                file_name=file_name,
                edit_distance=levenshtein(v.original_text, v.deid_text),
                original_token=v.original_text,
                deid_token=v.deid_text,
                context=build_context(verdicts, i),
            )
        )
    return samples


@dataclass(frozen=True)
class TallyReport:
    total: int
    category_counts: dict
    low: int
    high: int
    crc_count: int
    crc_percent: int
    crc_display: str  # e.g. "89 (18)"

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "category_counts": {c.value: n for c, n in self.category_counts.items()},
            "low": self.low,
            "high": self.high,
            "crc_count": self.crc_count,
            "crc_percent": self.crc_percent,
            "crc_display": self.crc_display,
        }


def _round_half_away(value: float) -> int:
    import math

    return int(math.floor(value + 0.5)) if value >= 0 else -int(math.floor(-value + 0.5))


def tally_annotations(samples: Sequence[FpSample]) -> TallyReport:
    """Counts per category plus low/high severity over the relevant ones.

    The percentage is round-half-away-from-zero of CRC/total, matching the
    published "count (percent)" presentation.
    """
    counts = {category: 0 for category in FpCategory}
    low = high = 0
    for s in samples:
        counts[s.category] += 1
        if s.category is FpCategory.CLINICALLY_RELEVANT:
            if s.severity is Severity.LOW:
                low += 1
            elif s.severity is Severity.HIGH:
                high += 1
    crc = counts[FpCategory.CLINICALLY_RELEVANT]
    percent = _round_half_away(100.0 * crc / len(samples)) if samples else 0
    return TallyReport(
        total=len(samples),
        category_counts=counts,
        low=low,
        high=high,
        crc_count=crc,
        crc_percent=percent,
        crc_display=f"{crc} ({percent})",
    )


def correlate(
    metric_by_doc: dict,
    truth_by_doc: dict,
    metric_name: str = "metric",
) -> CorrelationReport:
    """Align two per-document score maps by doc_id and correlate them."""
    missing = set(metric_by_doc) ^ set(truth_by_doc)
    if missing:
        raise InputError(f"doc_id sets differ: {sorted(missing)}")
    doc_ids = sorted(metric_by_doc)
    x = [metric_by_doc[d] for d in doc_ids]
    y = [truth_by_doc[d] for d in doc_ids]
    return CorrelationReport(
        metric=metric_name,
        pearson_r=pearson(x, y),
        spearman_rho=spearman(x, y),
        n=len(doc_ids),
    )


# ---------------------------------------------------------------------------
# annotation CSV

ANNOTATION_HEADER = [
    "file_name",
    "edit_distance",
    "original_token",
    "deid_token",
    "context",
    "category",
    "severity",
]


def annotation_csv_bytes(samples: Sequence[FpSample]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ANNOTATION_HEADER)
    for s in samples:
        writer.writerow(
            [
                s.file_name,
                s.edit_distance,
                s.original_token,
                s.deid_token,
                s.context,
                s.category.value,
                s.severity.value,
            ]
        )
    return buf.getvalue().encode("utf-8")


def write_annotation_csv(path: str | Path, samples: Sequence[FpSample]) -> None:
    Path(path).write_bytes(annotation_csv_bytes(samples))


def read_annotation_csv(path: str | Path) -> list[FpSample]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"annotation file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ANNOTATION_HEADER:
            raise InputError(f"{path}: unexpected annotation header {header}")
        samples = []
        for row in reader:
            if len(row) != len(ANNOTATION_HEADER):
                raise InputError(f"{path}: row with {len(row)} fields")
            samples.append(
                FpSample(
                    file_name=row[0],
                    edit_distance=int(row[1]),
                    original_token=row[2],
                    deid_token=row[3],
                    context=row[4],
                    category=FpCategory.from_string(row[5]),
                    severity=Severity.from_string(row[6]),
                )
            )
    return samples
