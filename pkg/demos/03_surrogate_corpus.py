"""Building an evaluation corpus from placeholder text.

Bracketed tags become seeded fake values, gold spans point at the inserted
text, and a fraction of surrogates picks up one OCR-style edit. Identical
seeds give identical corpora; the placeholder token is the identity, so a
recurring patient keeps one name.
"""

from deideval.surrogate import SurrogateConfig, build_surrogate_text

template = (
    "Referral for [[NAME]] , DOB [[DATE]] , HCN [[HEALTH-NUMBER]] .\n"
    "[[NAME]] lives at [[ADDRESS]] , [[LOCATION]] [[POSTAL-CODE]] .\n"
    "Seen by [[PROVIDER-NAME]] at [[HOSPITAL]] ; call [[PHONE]] .\n"
)

cfg = SurrogateConfig(seed=7, noise_rate=0.3)
text, replacements, spans = build_surrogate_text(template, cfg)
print(text)

print("replacement map:")
for rep in replacements:
    flag = " (noised)" if rep.noised else ""
    provider = " provider" if rep.is_provider else ""
    print(f"  {rep.placeholder:<22} -> {rep.final_text!r}{flag}{provider}")

print("\ngold spans over the new text:")
for span in spans:
    print(f"  [{span.start:3d},{span.end:3d}) {span.category.value:<12} {text[span.start:span.end]!r}")

# Rebuilding with the same config is byte-identical; a different seed is not.
again, _, _ = build_surrogate_text(template, cfg)
other, _, _ = build_surrogate_text(template, SurrogateConfig(seed=8, noise_rate=0.3))
print(f"\nsame seed identical: {text == again}; different seed identical: {text == other}")
