"""Token-level confusion counting and classification metrics.

A token counts as "predicted sensitive" when the aligned de-identified text
differs from it or it was deleted outright; generative systems rewrite whole
notes, so labels have to be inferred from the text change itself.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

from .alignment import GAP, AlignmentPair
from .errors import InputError
from .textcore import AnnotatedDocument, Token

__all__ = [
    "MatchingMode",
    "SchemaConfig",
    "TokenVerdict",
    "ConfusionCounts",
    "MetricsReport",
    "classify_tokens",
    "count",
    "compute_metrics",
    "bin_by_length",
    "bin_slot",
    "binned_reports",
    "BinnedReport",
    "metrics_to_json",
    "metrics_table",
    "binned_to_csv",
]


class MatchingMode(Enum):
    GENEROUS = "Generous"
    CONSERVATIVE = "Conservative"


@dataclass(frozen=True)
class SchemaConfig:
    """Which spans count as PII and how much of a span must be removed."""

    include_provider_pii: bool = False
    matching_mode: MatchingMode = MatchingMode.GENEROUS


@dataclass(frozen=True)
class TokenVerdict:
    index: int
    gold_sensitive: bool
    predicted_sensitive: bool
    original_text: str
    deid_text: str  # empty string when the token was deleted


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )


@dataclass(frozen=True)
class MetricsReport:
    """Classification ratios; None marks a zero-denominator (undefined) metric."""

    accuracy: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    fnr: Optional[float]
    fpr: Optional[float]

    def all_undefined(self) -> bool:
        return all(
            v is None
            for v in (self.accuracy, self.precision, self.recall, self.f1, self.fnr, self.fpr)
        )


def classify_tokens(
    doc: AnnotatedDocument, alignment: AlignmentPair, schema: SchemaConfig = SchemaConfig()
) -> list[TokenVerdict]:
    """Per-token verdicts for one document.

    The alignment's original side must de-gap back to doc.tokens. Generous
    mode treats any altered gold token as detected; Conservative mode credits
    a gold span only when every one of its tokens was altered, otherwise all
    of the span's tokens count as missed.
    """
    originals = alignment.original_tokens()
    if len(originals) != len(doc.tokens) or any(
        a is not b and a != b for a, b in zip(originals, doc.tokens)
    ):
        raise InputError(f"{doc.doc_id}: alignment does not match document tokens")

    spans = [
        s for s in doc.gold_spans if schema.include_provider_pii or not s.is_provider
    ]

    deid_by_index: dict[int, str] = {}
    changed: dict[int, bool] = {}
    for orig, other in zip(alignment.aligned_original, alignment.aligned_deid):
        if orig is GAP:
            continue
        if other is GAP:
            deid_by_index[orig.index] = ""
            changed[orig.index] = True
        else:
            other_text = other.text if isinstance(other, Token) else str(other)
            deid_by_index[orig.index] = other_text
            changed[orig.index] = other_text != orig.text

    gold_token_spans: dict[int, list[int]] = {}  # token index -> span ordinals
    span_tokens: dict[int, list[int]] = {}  # span ordinal -> token indices
    for ordinal, span in enumerate(spans):
        covered = [t.index for t in doc.tokens if span.overlaps(t.start, t.end)]
        span_tokens[ordinal] = covered
        for idx in covered:
            gold_token_spans.setdefault(idx, []).append(ordinal)

    if schema.matching_mode is MatchingMode.CONSERVATIVE:
        complete = {
            ordinal: all(changed[idx] for idx in covered)
            for ordinal, covered in span_tokens.items()
        }

    verdicts = []
    for tok in doc.tokens:
        gold = tok.index in gold_token_spans
        predicted = changed[tok.index]
        if gold and schema.matching_mode is MatchingMode.CONSERVATIVE:
            predicted = all(complete[o] for o in gold_token_spans[tok.index])
        verdicts.append(
            TokenVerdict(
                index=tok.index,
                gold_sensitive=gold,
                predicted_sensitive=predicted,
                original_text=tok.text,
                deid_text=deid_by_index[tok.index],
            )
        )
    return verdicts


def count(verdicts: Iterable[TokenVerdict]) -> ConfusionCounts:
    tp = tn = fp = fn = 0
    for v in verdicts:
        if v.gold_sensitive:
            if v.predicted_sensitive:
                tp += 1
            else:
                fn += 1
        elif v.predicted_sensitive:
            fp += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def compute_metrics(c: ConfusionCounts) -> MetricsReport:
    """Accuracy, precision, recall, F1, FNR and FPR from raw counts.

    Any metric whose denominator is zero comes back as None rather than 0;
    the two are not interchangeable when averaging across corpora.
    """
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricsReport(
        accuracy=_ratio(c.tp + c.tn, c.total),
        precision=precision,
        recall=recall,
        f1=f1,
        fnr=_ratio(c.fn, c.fn + c.tp),
        fpr=_ratio(c.fp, c.fp + c.tn),
    )


@dataclass(frozen=True)
class BinnedReport:
    bin_start: int
    bin_end: Optional[int]  # None marks the open-ended overflow bin
    counts: ConfusionCounts
    metrics: MetricsReport


def bin_slot(token_count: int, edges: Sequence[int]) -> int:
    """Index of the [0,e0), [e0,e1), ..., [e_last,inf) bin holding a
    document of this length; the last slot is the overflow bin."""
    for k, edge in enumerate(edges):
        if token_count < edge:
            return k
    return len(edges)


def binned_reports(edges: Sequence[int], pooled: Sequence[ConfusionCounts]) -> list[BinnedReport]:
    bounds = [0] + list(edges)
    reports = []
    for k, counts in enumerate(pooled):
        end = edges[k] if k < len(edges) else None
        reports.append(
            BinnedReport(
                bin_start=bounds[k], bin_end=end, counts=counts, metrics=compute_metrics(counts)
            )
        )
    return reports


def bin_by_length(
    docs: Sequence[AnnotatedDocument],
    verdicts_per_doc: Sequence[Sequence[TokenVerdict]],
    bin_edges: Sequence[int],
) -> list[BinnedReport]:
    """Pool confusion counts into token-length bins.

    Bins are [0, e0), [e0, e1), ..., [e_last, inf); a document lands in
    exactly one bin keyed by its token count.
    """
    edges = list(bin_edges)
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise InputError(f"bin edges must be strictly increasing: {edges}")
    if len(docs) != len(verdicts_per_doc):
        raise InputError("one verdict list per document required")

    pooled = [ConfusionCounts() for _ in range(len(edges) + 1)]
    for doc, verdicts in zip(docs, verdicts_per_doc):
        slot = bin_slot(len(doc.tokens), edges)
        pooled[slot] = pooled[slot] + count(verdicts)
    return binned_reports(edges, pooled)


# ---------------------------------------------------------------------------
# report emission


def metrics_to_json(counts: ConfusionCounts, report: MetricsReport) -> dict:
    return {
        "counts": {"tp": counts.tp, "tn": counts.tn, "fp": counts.fp, "fn": counts.fn},
        "metrics": {
            "accuracy": report.accuracy,
            "precision": report.precision,
            "recall": report.recall,
            "f1": report.f1,
            "fnr": report.fnr,
            "fpr": report.fpr,
        },
    }


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.2f}"


def metrics_table(rows: Sequence[tuple[str, ConfusionCounts, MetricsReport]]) -> str:
    """Aligned-column text table: label, raw counts, then A/R/P/F1."""
    header = ["Label", "TP", "TN", "FP", "FN", "A", "R", "P", "F1"]
    body = []
    for label, c, m in rows:
        body.append(
            [
                label,
                str(c.tp),
                str(c.tn),
                str(c.fp),
                str(c.fn),
                _fmt(m.accuracy),
                _fmt(m.recall),
                _fmt(m.precision),
                _fmt(m.f1),
            ]
        )
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = []
    for r in [header] + body:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def binned_to_csv(reports: Sequence[BinnedReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_start", "bin_end", "tp", "tn", "fp", "fn", "f1"])
    for r in reports:
        end = "inf" if r.bin_end is None else r.bin_end
        f1 = "" if r.metrics.f1 is None else f"{r.metrics.f1:.6f}"
        writer.writerow([r.bin_start, end, r.counts.tp, r.counts.tn, r.counts.fp, r.counts.fn, f1])
    return buf.getvalue()


def report_to_json_str(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
