"""Token-level scoring of a de-identification output.

A system's output is just rewritten text, so "predicted sensitive" is read
off the alignment: any token the system changed or deleted counts as
redacted. This script scores one note under both matching modes.
"""

from deideval import (
    AnnotatedDocument,
    MatchingMode,
    PiiCategory,
    PiiSpan,
    SchemaConfig,
    align,
    classify_tokens,
    compute_metrics,
    count,
    tokenize,
)

text = "Mary Smith reports knee pain since January"
doc = AnnotatedDocument.from_text(
    "note-1",
    text,
    [
        PiiSpan(0, 10, PiiCategory.NAME),   # "Mary Smith"
        PiiSpan(36, 43, PiiCategory.DATE),  # "January"
    ],
)

# The system caught the surname and the date but left "Mary", and it also
# mangled a clinical word (knee -> hip): one false negative token, one FP.
system_output = "Mary XX reports hip pain since YY"

pair = align(doc.tokens, tokenize(system_output))
for orig, deid in zip(pair.aligned_original, pair.aligned_deid):
    print(f"  {getattr(orig, 'text', orig):>8}  ->  {getattr(deid, 'text', deid)}")

for mode in (MatchingMode.GENEROUS, MatchingMode.CONSERVATIVE):
    schema = SchemaConfig(matching_mode=mode)
    c = count(classify_tokens(doc, pair, schema))
    m = compute_metrics(c)
    print(f"\n{mode.value}: tp={c.tp} tn={c.tn} fp={c.fp} fn={c.fn}")
    print(f"  precision={m.precision:.2f} recall={m.recall:.2f} f1={m.f1:.2f}")

# Conservative mode only credits fully-redacted spans: "Mary Smith" was half
# caught, so both of its tokens flip from (1 TP, 1 FN) to 2 FN.
