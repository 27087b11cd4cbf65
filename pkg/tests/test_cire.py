import pytest

from deideval.alignment import GAP, AlignmentPair, align
from deideval.backends import DeterministicOracleJudge, RetryPolicy
from deideval.cire import (
    ChunkPair,
    CireConfig,
    SplitMode,
    chunk_alignment,
    chunk_alignment_by_sentence,
    cire_score,
    fill_prompt,
    judge_chunk_pair,
    parse_judge_answer,
)
from deideval.errors import InputError, ProtocolError
from deideval.textcore import AnnotatedDocument


def fake_alignment(n, deid_gap_positions=()):
    orig = [f"t{i}" for i in range(n)]
    deid = [GAP if i in deid_gap_positions else f"t{i}" for i in range(n)]
    return AlignmentPair(orig, deid, 0)


def test_chunk_exact_multiple():
    chunks = chunk_alignment(fake_alignment(40), 20)
    assert len(chunks) == 2
    assert all(len(c.original_tokens) == 20 for c in chunks)


def test_chunk_remainder_convention():
    chunks = chunk_alignment(fake_alignment(45), 20)
    assert len(chunks) == 3
    assert len(chunks[-1].original_tokens) == 5


def test_chunk_strips_gaps_after_windowing():
    chunks = chunk_alignment(fake_alignment(40, deid_gap_positions={2, 7, 11}), 20)
    assert len(chunks[0].original_tokens) == 20
    assert len(chunks[0].deid_tokens) == 17
    assert len(chunks[1].deid_tokens) == 20


def test_chunk_empty_alignment():
    assert chunk_alignment(AlignmentPair([], [], 0), 20) == []


def test_chunks_partition_alignment():
    pair = fake_alignment(53, deid_gap_positions={1, 25, 50})
    chunks = chunk_alignment(pair, 20)
    assert sum(1 for c in chunks for _ in c.original_tokens) == 53
    rebuilt = [t for c in chunks for t in c.deid_tokens]
    assert rebuilt == [t for t in pair.aligned_deid if t is not GAP]
    assert [c.index for c in chunks] == list(range(len(chunks)))


def test_chunk_size_validation():
    with pytest.raises(InputError):
        chunk_alignment(fake_alignment(5), 0)


def test_sentence_mode_splits_on_terminators():
    orig = ["I", "fell", ".", "It", "hurt", "!", "See", "notes"]
    pair = align(orig, orig)
    chunks = chunk_alignment_by_sentence(pair)
    assert [c.original_tokens for c in chunks] == [
        ("I", "fell", "."),
        ("It", "hurt", "!"),
        ("See", "notes"),
    ]


def test_parse_judge_answer_variants():
    assert parse_judge_answer("Yes.") is True
    assert parse_judge_answer("no") is False
    assert parse_judge_answer("I believe the answer is NO here") is False
    assert parse_judge_answer("yes, clinically meaningful") is True
    assert parse_judge_answer("Eyes nose") is None  # no standalone yes/no
    assert parse_judge_answer("") is None
    # first standalone answer wins
    assert parse_judge_answer("no... wait, yes") is False


def test_fill_prompt_requires_slots():
    with pytest.raises(InputError):
        fill_prompt("missing slots", "a", "b")
    filled = fill_prompt("O: {original_chunk} D: {deid_chunk}", "on aspirin", "on")
    assert filled == "O: on aspirin D: on"


def test_oracle_identity_not_altered():
    judge = DeterministicOracleJudge()
    chunk = ChunkPair(0, ("on", "aspirin", "81", "mg"), ("on", "aspirin", "81", "mg"))
    decision = judge_chunk_pair(chunk, judge)
    assert decision.altered is False
    assert decision.index == 0


def test_oracle_flags_dropped_lexicon_token():
    judge = DeterministicOracleJudge()
    chunk = ChunkPair(1, ("on", "aspirin", "daily",), ("on", "daily"))
    assert judge_chunk_pair(chunk, judge).altered is True


def test_oracle_ignores_name_surrogate_change():
    judge = DeterministicOracleJudge(pii_tags=frozenset({"mary", "jones"}))
    chunk = ChunkPair(2, ("Mary", "reports", "pain"), ("Jones", "reports", "pain"))
    assert judge_chunk_pair(chunk, judge).altered is False


class GarbageJudge:
    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = 0
        self.policy = RetryPolicy(max_attempts=3, backoff_base=0.0)

    def judge(self, prompt, original_tokens, deid_tokens):
        self.calls += 1
        return self.replies.pop(0)


def test_unparseable_reply_retries_then_succeeds():
    judge = GarbageJudge(["hmm", "certainly: no"])
    decision = judge_chunk_pair(ChunkPair(0, ("a",), ("a",)), judge)
    assert decision.altered is False
    assert judge.calls == 2


def test_unparseable_reply_exhausts_and_raises():
    judge = GarbageJudge(["???", "???", "???"])
    with pytest.raises(ProtocolError) as err:
        judge_chunk_pair(ChunkPair(5, ("a",), ("a",)), judge)
    assert "chunk 5" in str(err.value)
    assert judge.calls == 3


def make_cfg(**kwargs):
    return CireConfig(judge=DeterministicOracleJudge(), **kwargs)


def long_doc(n_sentences=10):
    text = " ".join(
        f"Patient takes aspirin {80 + i} mg every morning with food and water ." for i in range(n_sentences)
    )
    return AnnotatedDocument.from_text("doc-x", text)


def test_identity_scores_full_retention():
    doc = long_doc()
    score = cire_score(doc, doc.text, make_cfg())
    assert score.retention == 1.0
    assert score.n_altered == 0
    assert score.n_chunks == len(doc.tokens) // 20 + (1 if len(doc.tokens) % 20 else 0)


def test_every_chunk_altered_scores_zero():
    doc = long_doc()
    # dropping every aspirin token guarantees each 20-token chunk loses one
    deid = doc.text.replace("aspirin ", "")
    score = cire_score(doc, deid, make_cfg())
    assert score.retention == 0.0
    assert score.n_altered == score.n_chunks


def aspirin_indices_by_chunk(words, chunk_size=20):
    """First aspirin token index per distinct chunk, in chunk order."""
    picked = {}
    for i, w in enumerate(words):
        if w == "aspirin" and i // chunk_size not in picked:
            picked[i // chunk_size] = i
    return [picked[k] for k in sorted(picked)]


def test_partial_alteration_arithmetic():
    # 10 sentences of 12 tokens -> 120 aligned positions -> 6 chunks of 20
    doc = long_doc(10)
    assert len(doc.tokens) == 120
    words = doc.text.split(" ")
    # alter one aspirin in each of the first two chunks, nothing else
    for i in aspirin_indices_by_chunk(words)[:2]:
        words[i] = "pill"  # not in the lexicon; aspirin disappears
    score = cire_score(doc, " ".join(words), make_cfg())
    assert score.n_chunks == 6
    assert score.n_altered == 2
    assert score.retention == pytest.approx(1 - 2 / 6)


def test_both_empty_yields_undefined():
    score = cire_score("", "", make_cfg())
    assert score.retention is None
    assert score.n_chunks == 0


def test_oracle_scoring_is_pure():
    doc = long_doc(5)
    deid = doc.text.replace("aspirin", "medication")
    a = cire_score(doc, deid, make_cfg())
    b = cire_score(doc, deid, make_cfg())
    assert a == b


def test_parallel_chunks_match_serial():
    doc = long_doc(8)
    deid = doc.text.replace("80 mg", "85 mg")
    serial = cire_score(doc, deid, make_cfg(parallelism=1))
    parallel = cire_score(doc, deid, make_cfg(parallelism=4))
    assert serial == parallel


def test_one_more_altered_chunk_decreases_retention_by_step():
    doc = long_doc(10)
    words = doc.text.split(" ")
    idx = aspirin_indices_by_chunk(words)
    previous = None
    for k in range(4):
        mutated = list(words)
        for i in idx[:k]:
            mutated[i] = "pill"
        score = cire_score(doc, " ".join(mutated), make_cfg())
        if previous is not None:
            assert score.retention == pytest.approx(previous - 1 / score.n_chunks)
        previous = score.retention


def test_sentence_mode_end_to_end():
    doc = AnnotatedDocument.from_text(
        "s", "Takes aspirin daily . Lives alone . Denies chest pain ."
    )
    deid = "Takes daily . Lives alone . Denies chest pain ."
    score = cire_score(doc, deid, make_cfg(split_mode=SplitMode.SENTENCE))
    assert score.n_chunks == 3
    assert score.n_altered == 1
    assert score.retention == pytest.approx(2 / 3)
