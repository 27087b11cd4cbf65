"""JSC and NSDCG over the deterministic stub predictor.

The stub hashes the clinical-token multiset of a text into one logit per
ICD-10 code, so identifier edits leave predictions untouched while clinical
edits scatter them; the same functions work against a remote predictor
speaking the {"text"} -> {"codes", "logits"} protocol.
"""

from deideval.backends import DeterministicStubIcd
from deideval.icd import IcdConfig, ReportScale, jsc, nsdcg, predict_codes

stub = DeterministicStubIcd(seed=17)
cfg = IcdConfig(predictor=stub, binarization_threshold=0.5, report_scale=ReportScale.PERCENT)

original = "Patient with hypertension and diabetes , on metformin and lisinopril ."
cases = {
    "name swapped":       original.replace("Patient", "Maria"),
    "medication dropped": original.replace("and lisinopril ", ""),
    "condition changed":  original.replace("diabetes", "asthma"),
    "identical":          original,
}

orig_pred = predict_codes(original, stub)
print("code logits on the original text:")
for p in orig_pred:
    print(f"  {p.code:<8} {p.logit:+.3f}")

print()
for label, deid_text in cases.items():
    deid_pred = predict_codes(deid_text, stub)
    j = jsc(orig_pred, deid_pred, cfg)
    n = nsdcg(orig_pred, deid_pred)
    print(f"{label:<20} JSC={cfg.scaled(j):6.2f}%  NSDCG={n:.4f}")

# Identifier changes keep both metrics at their ceiling; clinical changes
# move them, but the size of the move is chaotic rather than proportional,
# which is exactly why judge-based retention correlates better with
# manually labeled ground truth.
