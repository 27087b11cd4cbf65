"""Canonical document model, tokenization and edit distance.

Everything downstream (alignment, scoring, retention metrics) works on the
token and span types defined here.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import InputError

__all__ = [
    "PiiCategory",
    "PiiSpan",
    "Token",
    "AnnotatedDocument",
    "tokenize",
    "levenshtein",
]


class PiiCategory(Enum):
    NAME = "Name"
    DATE = "Date"
    AGE = "Age"
    ADDRESS = "Address"
    POSTAL_CODE = "PostalCode"
    PHONE = "Phone"
    HEALTH_NUMBER = "HealthNumber"
    ID = "Id"
    LOCATION = "Location"
    HOSPITAL = "Hospital"
    OTHER = "Other"

    @classmethod
    def from_string(cls, name: str) -> "PiiCategory":
        for member in cls:
            if member.value == name:
                return member
        raise InputError(f"unknown PII category: {name!r}")


@dataclass(frozen=True)
class PiiSpan:
    """A character range marking true PII, with its category."""

    start: int
    end: int
    category: PiiCategory
    is_provider: bool = False

    def __post_init__(self):
        if self.end <= self.start:
            raise InputError(f"empty PII span [{self.start}, {self.end})")

    def overlaps(self, start: int, end: int) -> bool:
        return self.start < end and start < self.end


@dataclass(frozen=True)
class Token:
    """One surface token: its text, character offsets and ordinal position."""

    text: str
    start: int
    end: int
    index: int

    def __post_init__(self):
        if self.end <= self.start:
            raise InputError(f"zero-length token at offset {self.start}")
        if len(self.text) != self.end - self.start:
            raise InputError(
                f"token text {self.text!r} does not span [{self.start}, {self.end})"
            )


@dataclass
class AnnotatedDocument:
    """A clinical note with its tokens and gold PII spans."""

    doc_id: str
    text: str
    tokens: list[Token] = field(default_factory=list)
    gold_spans: list[PiiSpan] = field(default_factory=list)

    @classmethod
    def from_text(cls, doc_id: str, text: str, gold_spans=()) -> "AnnotatedDocument":
        doc = cls(doc_id=doc_id, text=text, tokens=tokenize(text), gold_spans=list(gold_spans))
        doc.validate()
        return doc

    def validate(self) -> None:
        prev_end = -1
        for tok in self.tokens:
            if tok.start < prev_end:
                raise InputError(f"{self.doc_id}: overlapping tokens at {tok.start}")
            if self.text[tok.start : tok.end] != tok.text:
                raise InputError(f"{self.doc_id}: token {tok.index} text mismatch")
            prev_end = tok.end
        spans = sorted(self.gold_spans, key=lambda s: s.start)
        for a, b in zip(spans, spans[1:]):
            if b.start < a.end:
                raise InputError(f"{self.doc_id}: overlapping gold spans at {b.start}")
        for span in spans:
            if not any(t.start < span.end and span.start < t.end for t in self.tokens):
                raise InputError(
                    f"{self.doc_id}: gold span [{span.start}, {span.end}) covers no token"
                )


# A token is either a maximal alphanumeric run or a single character that is
# neither alphanumeric nor whitespace; underscore counts as punctuation.
_TOKEN_RE = re.compile(r"[^\W_]+|\S", re.UNICODE)


def tokenize(text: str) -> list[Token]:
    """Split text on whitespace, isolating each punctuation character.

    The concatenation of token texts and the skipped whitespace reproduces
    the input exactly; offsets are 0-based character positions.
    """
    tokens = []
    for i, m in enumerate(_TOKEN_RE.finditer(text)):
        tokens.append(Token(text=m.group(0), start=m.start(), end=m.end(), index=i))
    return tokens


def levenshtein(a: str, b: str) -> int:
    """Minimum number of single-character inserts, deletes and substitutions
    turning `a` into `b` (unit costs)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(b) > len(a):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]
