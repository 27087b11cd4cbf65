"""ICD-code overlap retention metrics: Jaccard similarity of binarized code
sets and a normalized softmax DCG over the code logit rankings.

Both compare a predictor's output on the original note against its output on
the de-identified note; the predictor itself is a pluggable backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .backends import CodePrediction
from .errors import InputError

__all__ = ["ReportScale", "IcdConfig", "predict_codes", "jsc", "nsdcg"]


class ReportScale(Enum):
    UNIT = "Unit"
    PERCENT = "Percent"


@dataclass
class IcdConfig:
    predictor: object  # any backend with .predict(text) -> list[CodePrediction]
    binarization_threshold: float = 0.5
    report_scale: ReportScale = ReportScale.UNIT

    def __post_init__(self):
        if not 0.0 < self.binarization_threshold < 1.0:
            raise InputError("binarization_threshold must lie in (0, 1)")

    def scaled(self, value: float) -> float:
        return value * 100.0 if self.report_scale is ReportScale.PERCENT else value


def predict_codes(text: str, backend) -> list[CodePrediction]:
    """Full code/logit vector from the backend for one text."""
    predictions = backend.predict(text)
    seen = set()
    for p in predictions:
        if p.code in seen:
            raise InputError(f"backend returned duplicate code {p.code!r}")
        seen.add(p.code)
    return predictions


def _check_same_vocabulary(orig: Sequence[CodePrediction], deid: Sequence[CodePrediction]):
    a = {p.code for p in orig}
    b = {p.code for p in deid}
    if a != b:
        missing = sorted(a ^ b)
        raise InputError(f"prediction vocabularies differ on codes: {missing}")


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def jsc(
    orig: Sequence[CodePrediction],
    deid: Sequence[CodePrediction],
    cfg: IcdConfig,
) -> float:
    """Jaccard overlap of the positive code sets.

    A code is positive when sigmoid(logit) >= threshold. Two empty sets agree
    perfectly, so both-empty yields 1.0.
    """
    _check_same_vocabulary(orig, deid)
    threshold = cfg.binarization_threshold
    a = {p.code for p in orig if _sigmoid(p.logit) >= threshold}
    b = {p.code for p in deid if _sigmoid(p.logit) >= threshold}
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


def nsdcg(orig: Sequence[CodePrediction], deid: Sequence[CodePrediction]) -> float:
    """Normalized softmax discounted cumulative gain.

    Relevance of each code is the softmax of the original logits. Codes are
    ranked by de-identified logit (descending, ties by code string) and the
    DCG under 1/log2(rank+1) discounting is normalized by the ideal ranking
    (by original logit). Equal rankings give exactly 1.0.
    """
    if not orig:
        raise InputError("nsdcg requires at least one code")
    _check_same_vocabulary(orig, deid)
    logits = np.array([p.logit for p in orig], dtype=float)
    shifted = np.exp(logits - logits.max())
    relevance = dict(zip((p.code for p in orig), shifted / shifted.sum()))

    def dcg(ranked_codes) -> float:
        return sum(
            relevance[code] / math.log2(rank + 1)
            for rank, code in enumerate(ranked_codes, start=1)
        )

    by_deid = [p.code for p in sorted(deid, key=lambda p: (-p.logit, p.code))]
    by_orig = [p.code for p in sorted(orig, key=lambda p: (-p.logit, p.code))]
    return dcg(by_deid) / dcg(by_orig)
