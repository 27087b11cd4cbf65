"""Global (Needleman-Wunsch) alignment of token sequences.

Aligns the token sequence of an original note against the token sequence of
its de-identified counterpart so that replaced tokens end up paired and
deleted/inserted tokens end up opposite a gap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError
from .textcore import Token

__all__ = ["GAP", "AlignmentParams", "AlignmentPair", "align"]


class _Gap:
    """Sentinel occupying one side of an aligned position."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "GAP"


GAP = _Gap()


@dataclass(frozen=True)
class AlignmentParams:
    match_score: int = 2
    mismatch_penalty: int = -1
    gap_penalty: int = -2

    def __post_init__(self):
        if self.match_score <= self.mismatch_penalty:
            raise InputError("match_score must exceed mismatch_penalty")
        if self.gap_penalty >= 0:
            raise InputError("gap_penalty must be negative")


DEFAULT_PARAMS = AlignmentParams()


@dataclass
class AlignmentPair:
    """Two equal-length gap-padded sequences; no position is gap on both sides."""

    aligned_original: list
    aligned_deid: list
    score: int

    def __len__(self):
        return len(self.aligned_original)

    def original_tokens(self) -> list:
        return [t for t in self.aligned_original if t is not GAP]

    def deid_tokens(self) -> list:
        return [t for t in self.aligned_deid if t is not GAP]


def _texts(seq: Sequence) -> list[str]:
    return [t.text if isinstance(t, Token) else str(t) for t in seq]


def align(original: Sequence, deid: Sequence, params: AlignmentParams = DEFAULT_PARAMS) -> AlignmentPair:
    """Optimal global alignment of two token sequences.

    Items may be Token objects or plain strings; equality is exact comparison
    of token text. Among equal-score alignments the traceback prefers, in
    document order, pairing over a gap on the de-identified side over a gap
    on the original side (the DP runs on the reversed sequences so that the
    usual diagonal-first traceback resolves ties left to right).
    """
    a_text = _texts(original)
    b_text = _texts(deid)
    n, m = len(a_text), len(b_text)
    if n == 0:
        return AlignmentPair([GAP] * m, list(deid), params.gap_penalty * m)
    if m == 0:
        return AlignmentPair(list(original), [GAP] * n, params.gap_penalty * n)

    # Integer ids make the per-row equality comparison a fast numpy op.
    vocab: dict[str, int] = {}
    a_ids = np.fromiter((vocab.setdefault(t, len(vocab)) for t in reversed(a_text)), dtype=np.int64, count=n)
    b_ids = np.fromiter((vocab.setdefault(t, len(vocab)) for t in reversed(b_text)), dtype=np.int64, count=m)

    match = np.int32(params.match_score)
    mismatch = np.int32(params.mismatch_penalty)
    gap = np.int32(params.gap_penalty)

    dp = np.empty((n + 1, m + 1), dtype=np.int32)
    col_gaps = gap * np.arange(m + 1, dtype=np.int32)
    dp[0] = col_gaps
    # Row recurrence: dp[i][j] = max(diag, up, dp[i][j-1] + gap). The
    # horizontal chain is a running max of candidates offset by the linear
    # gap cost, so each row is one cumulative-maximum pass.
    t = np.empty(m + 1, dtype=np.int32)
    for i in range(1, n + 1):
        prev = dp[i - 1]
        sub = np.where(b_ids == a_ids[i - 1], match, mismatch)
        cand = np.maximum(prev[:-1] + sub, prev[1:] + gap)
        t[0] = prev[0] + gap
        t[1:] = cand - col_gaps[1:]
        dp[i] = col_gaps + np.maximum.accumulate(t)

    score = int(dp[n, m])

    # Traceback over the reversed grid emits positions in document order;
    # preference: diagonal, then gap on the deid side, then gap on the
    # original side.
    out_orig: list = []
    out_deid: list = []
    i, j = n, m
    while i > 0 or j > 0:
        here = dp[i, j]
        if i > 0 and j > 0 and here == dp[i - 1, j - 1] + (
            match if a_ids[i - 1] == b_ids[j - 1] else mismatch
        ):
            out_orig.append(original[n - i])
            out_deid.append(deid[m - j])
            i -= 1
            j -= 1
        elif i > 0 and here == dp[i - 1, j] + gap:
            out_orig.append(original[n - i])
            out_deid.append(GAP)
            i -= 1
        else:
            out_orig.append(GAP)
            out_deid.append(deid[m - j])
            j -= 1
    return AlignmentPair(out_orig, out_deid, score)
