"""False-positive triage records and metric-vs-truth correlation.

Over-redactions (false positives) are sampled into annotation records with
a fixed-format context string; after human triage the tally reports the
count of clinically relevant changes and their severity split. Separately,
any per-document metric can be correlated against manual ground truth.
"""

from deideval import (
    AnnotatedDocument,
    FpCategory,
    GroundTruthLabel,
    PiiCategory,
    PiiSpan,
    Severity,
    align,
    classify_tokens,
    correlate,
    ground_truth_cir,
    sample_false_positives,
    tokenize,
)
from dataclasses import replace

from deideval.analysis import tally_annotations

doc = AnnotatedDocument.from_text(
    "note-3",
    "Bob Jones advised to stop smoking and continue metformin",
    [PiiSpan(0, 9, PiiCategory.NAME)],
)
# the system redacted the name but also swallowed "stop" and "metformin"
system = "XX YY advised to smoking and continue MEDICATION"

verdicts = classify_tokens(doc, align(doc.tokens, tokenize(system)))
samples = sample_false_positives([(doc.doc_id, verdicts)], n=10, seed=5)
print("sampled false positives:")
for s in samples:
    print(f"  {s.original_token!r} -> {s.deid_token!r}  ed={s.edit_distance}")
    print(f"    context: {s.context}")

# pretend a physician triaged them
annotated = [
    replace(s, category=FpCategory.CLINICALLY_RELEVANT, severity=Severity.HIGH)
    for s in samples
]
print("\ntally:", tally_annotations(annotated).to_json())

# correlation of a retention metric against sentence-level ground truth
truth = {
    "d1": ground_truth_cir([GroundTruthLabel("d1", i, i < 1) for i in range(4)]),
    "d2": ground_truth_cir([GroundTruthLabel("d2", i, i < 2) for i in range(4)]),
    "d3": ground_truth_cir([GroundTruthLabel("d3", i, False) for i in range(4)]),
}
metric = {"d1": 0.80, "d2": 0.45, "d3": 1.00}
report = correlate(metric, truth, metric_name="CIRE")
print(f"\n{report.metric}: pearson={report.pearson_r:.3f} "
      f"spearman={report.spearman_rho:.3f} over n={report.n} docs")
