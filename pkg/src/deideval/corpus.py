"""JSONL corpus reading and writing.

One JSON object per line: {"doc_id": ..., "text": ..., "gold_spans": [...]}
where each gold span is {"start", "end", "category", "is_provider"}.
gold_spans may be absent (system outputs carry text only). The format is
described in docs/corpus-format.md.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterator

from .errors import InputError
from .textcore import AnnotatedDocument, PiiCategory, PiiSpan

__all__ = ["read_corpus", "write_corpus", "document_to_record", "record_to_document"]


def record_to_document(record: dict, source: str = "<corpus>") -> AnnotatedDocument:
    try:
        doc_id = record["doc_id"]
        text = record["text"]
    except KeyError as exc:
        raise InputError(f"{source}: record missing field {exc}") from None
    spans = []
    for raw in record.get("gold_spans", []):
        spans.append(
            PiiSpan(
                start=int(raw["start"]),
                end=int(raw["end"]),
                category=PiiCategory.from_string(raw["category"]),
                is_provider=bool(raw.get("is_provider", False)),
            )
        )
    return AnnotatedDocument.from_text(doc_id, text, spans)


def document_to_record(doc: AnnotatedDocument) -> dict:
    return {
        "doc_id": doc.doc_id,
        "text": doc.text,
        "gold_spans": [
            {
                "start": s.start,
                "end": s.end,
                "category": s.category.value,
                "is_provider": s.is_provider,
            }
            for s in doc.gold_spans
        ],
    }


def read_corpus(path: str | Path) -> Iterator[AnnotatedDocument]:
    """Stream documents from a JSONL corpus file."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"corpus file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            yield record_to_document(record, source=f"{path}:{lineno}")


def write_corpus(path: str | Path, docs) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(document_to_record(doc), ensure_ascii=False) + "\n")
