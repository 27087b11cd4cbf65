import json

import pytest

from deideval.analysis import FpCategory, FpSample, Severity
from deideval.textcore import AnnotatedDocument, PiiCategory, PiiSpan


@pytest.fixture
def simple_doc():
    # tokens: Mr(0) .(1) Smith(2) takes(3) aspirin(4) daily(5)
    text = "Mr. Smith takes aspirin daily"
    return AnnotatedDocument.from_text(
        "note-1", text, [PiiSpan(0, 9, PiiCategory.NAME)]
    )


@pytest.fixture
def fp_samples():
    def sample(file_name, orig, deid, category=FpCategory.UNKNOWN, severity=Severity.NOT_APPLICABLE):
        return FpSample(
            file_name=file_name,
            edit_distance=1,
            original_token=orig,
            deid_token=deid,
            context=f"… / {orig} / {deid} / …",
            category=category,
            severity=severity,
        )

    return [
        sample("a.txt", "aspirin", "asprin"),
        sample("a.txt", "thank", "REMOVED"),
        sample("b.txt", "stop", ""),
        sample("b.txt", "clinic", "facility"),
        sample("c.txt", "120", "129"),
    ]


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


@pytest.fixture
def jsonl_writer():
    return write_jsonl
