"""Judge-based clinical information retention scoring.

Pipeline per note pair: tokenize both texts, align them globally, cut the
alignment into fixed windows (default 20 aligned positions) or at sentence
boundaries, ask the judge backend whether each chunk pair altered clinical
meaning, and average the verdicts into a retention score where 1.0 means
nothing clinically relevant changed.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Optional

from .alignment import GAP, AlignmentPair, align
from .errors import DeidevalError, InputError, ProtocolError
from .textcore import AnnotatedDocument, Token, tokenize

__all__ = [
    "SplitMode",
    "CireConfig",
    "ChunkPair",
    "JudgeDecision",
    "CireScore",
    "chunk_alignment",
    "chunk_alignment_by_sentence",
    "judge_chunk_pair",
    "cire_score",
    "default_prompt_template",
    "fill_prompt",
]


class SplitMode(Enum):
    FIXED_CHUNK = "FixedChunk"
    SENTENCE = "Sentence"


@dataclass
class CireConfig:
    judge: object  # any backend with .judge(prompt, original_tokens, deid_tokens)
    chunk_size: int = 20
    split_mode: SplitMode = SplitMode.FIXED_CHUNK
    prompt_template: str = ""  # empty -> packaged default
    parallelism: int = 1

    def __post_init__(self):
        if self.chunk_size < 1:
            raise InputError("chunk_size must be at least 1")
        if not self.prompt_template:
            self.prompt_template = default_prompt_template()


@dataclass(frozen=True)
class ChunkPair:
    index: int
    original_tokens: tuple[str, ...]
    deid_tokens: tuple[str, ...]


@dataclass(frozen=True)
class JudgeDecision:
    index: int
    altered: bool
    raw_response: str


@dataclass(frozen=True)
class CireScore:
    doc_id: str
    retention: Optional[float]  # None when there were no chunks to judge
    n_chunks: int
    n_altered: int
    decisions: tuple[JudgeDecision, ...] = ()

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "retention": self.retention,
            "n_chunks": self.n_chunks,
            "n_altered": self.n_altered,
            "decisions": [{"index": d.index, "altered": d.altered} for d in self.decisions],
        }


def default_prompt_template() -> str:
    return resources.files("deideval").joinpath("templates/cire_prompt.txt").read_text("utf-8")


def fill_prompt(template: str, original_chunk: str, deid_chunk: str) -> str:
    if "{original_chunk}" not in template or "{deid_chunk}" not in template:
        raise InputError("prompt template must contain {original_chunk} and {deid_chunk}")
    return template.replace("{original_chunk}", original_chunk).replace(
        "{deid_chunk}", deid_chunk
    )


def _strip_gaps(items) -> tuple[str, ...]:
    return tuple(t.text if isinstance(t, Token) else str(t) for t in items if t is not GAP)


def _windows_to_chunks(pair: AlignmentPair, boundaries: list[int]) -> list[ChunkPair]:
    chunks = []
    start = 0
    for index, end in enumerate(boundaries):
        chunks.append(
            ChunkPair(
                index=index,
                original_tokens=_strip_gaps(pair.aligned_original[start:end]),
                deid_tokens=_strip_gaps(pair.aligned_deid[start:end]),
            )
        )
        start = end
    return chunks


def chunk_alignment(pair: AlignmentPair, size: int) -> list[ChunkPair]:
    """Cut the alignment into consecutive windows of `size` positions.

    The final window keeps the remainder. Gaps are stripped after windowing,
    so a chunk side can hold fewer than `size` tokens.
    """
    if size < 1:
        raise InputError("chunk size must be at least 1")
    total = len(pair)
    boundaries = list(range(size, total, size)) + ([total] if total else [])
    return _windows_to_chunks(pair, boundaries)


_SENTENCE_END = frozenset({".", "!", "?"})


def chunk_alignment_by_sentence(pair: AlignmentPair) -> list[ChunkPair]:
    """Cut the alignment after each sentence-final punctuation token on the
    original side; windows stay in registration on both sides."""
    boundaries = []
    for pos, item in enumerate(pair.aligned_original):
        if item is not GAP:
            text = item.text if isinstance(item, Token) else str(item)
            if text in _SENTENCE_END:
                boundaries.append(pos + 1)
    total = len(pair)
    if total and (not boundaries or boundaries[-1] != total):
        boundaries.append(total)
    return _windows_to_chunks(pair, boundaries)


_ANSWER_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


def parse_judge_answer(response: str) -> Optional[bool]:
    """First standalone yes/no wins; None when the reply contains neither."""
    m = _ANSWER_RE.search(response)
    if m is None:
        return None
    return m.group(1).lower() == "yes"


def judge_chunk_pair(pair: ChunkPair, judge, template: str = "") -> JudgeDecision:
    """Ask the judge about one chunk pair and binarize its reply.

    An unparseable reply is re-asked up to the backend's max_attempts; if it
    never parses, that is a ProtocolError, never a silent default.
    """
    template = template or default_prompt_template()
    prompt = fill_prompt(template, " ".join(pair.original_tokens), " ".join(pair.deid_tokens))
    attempts = getattr(getattr(judge, "policy", None), "max_attempts", 1)
    response = ""
    try:
        for _ in range(max(1, attempts)):
            response = judge.judge(prompt, pair.original_tokens, pair.deid_tokens)
            altered = parse_judge_answer(response)
            if altered is not None:
                return JudgeDecision(index=pair.index, altered=altered, raw_response=response)
    except DeidevalError as exc:
        raise type(exc)(f"chunk {pair.index}: {exc}") from None
    raise ProtocolError(
        f"chunk {pair.index}: judge reply contained no yes/no answer: {response[:120]!r}"
    )


def cire_score(original_doc, deid_text: str, cfg: CireConfig) -> CireScore:
    """End-to-end retention score for one (original, de-identified) pair.

    original_doc may be an AnnotatedDocument or raw text. Chunks are judged
    independently (optionally in parallel) and assembled in index order, so
    concurrency never changes the result.
    """
    if isinstance(original_doc, AnnotatedDocument):
        doc_id, original_tokens = original_doc.doc_id, original_doc.tokens
    else:
        doc_id, original_tokens = "<text>", tokenize(str(original_doc))
    deid_tokens = tokenize(deid_text)
    pair = align(original_tokens, deid_tokens)
    if cfg.split_mode is SplitMode.SENTENCE:
        chunks = chunk_alignment_by_sentence(pair)
    else:
        chunks = chunk_alignment(pair, cfg.chunk_size)
    if not chunks:
        return CireScore(doc_id=doc_id, retention=None, n_chunks=0, n_altered=0)

    if cfg.parallelism > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            decisions = list(
                pool.map(lambda c: judge_chunk_pair(c, cfg.judge, cfg.prompt_template), chunks)
            )
    else:
        decisions = [judge_chunk_pair(c, cfg.judge, cfg.prompt_template) for c in chunks]
    decisions.sort(key=lambda d: d.index)
    n_altered = sum(d.altered for d in decisions)
    return CireScore(
        doc_id=doc_id,
        retention=1.0 - n_altered / len(decisions),
        n_chunks=len(decisions),
        n_altered=n_altered,
        decisions=tuple(decisions),
    )
