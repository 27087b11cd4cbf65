"""Clinical information retention with the deterministic oracle judge.

The oracle answers "yes" (altered) when a clinical-lexicon or numeric token
from the original chunk is missing or changed on the de-identified side, so
identifier replacements alone leave retention at 1.0. Swap in a remote-chat
or replay backend for a real LLM judge; the pipeline is identical.
"""

from deideval import AnnotatedDocument, CireConfig, cire_score
from deideval.backends import DeterministicOracleJudge

note = AnnotatedDocument.from_text(
    "note-9",
    "Mary Smith seen today . Takes aspirin 81 mg daily for angina . "
    "Blood pressure 120 / 80 . Denies chest pain on exertion . "
    "Plan : continue aspirin , recheck in 6 weeks .",
)

cfg = CireConfig(judge=DeterministicOracleJudge(), chunk_size=10)

cases = {
    "identifier-only redaction": note.text.replace("Mary Smith", "XXXX XXXX"),
    "dose corrupted":            note.text.replace("81 mg", "91 mg"),
    "medication dropped":        note.text.replace("Takes aspirin 81 mg", "Takes 81 mg"),
    "identical":                 note.text,
}

for label, deid_text in cases.items():
    score = cire_score(note, deid_text, cfg)
    flags = "".join("x" if d.altered else "." for d in score.decisions)
    print(f"{label:<28} retention={score.retention:.2f}  chunks={flags}")

# Retention is 1 - altered/total: only the chunks whose clinical content
# changed are flagged; the name chunk never is.
