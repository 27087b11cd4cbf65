"""Global token alignment and fixed-window chunking.

The alignment prefers pairing a replaced token over gapping both sides, so
substitutions show up side by side; chunking then windows the alignment (20
positions by default) and strips gaps per side.
"""

from deideval import align, tokenize
from deideval.alignment import GAP
from deideval.cire import chunk_alignment

original = tokenize("Patient on aspirin 81 mg daily . Denies chest pain . Follow up in 6 weeks .")
deid = tokenize("Patient on REDACTED mg daily . Denies chest pain . Follow up in 6 weeks .")

pair = align(original, deid)
print(f"alignment score {pair.score}, {len(pair)} positions")
for o, d in zip(pair.aligned_original, pair.aligned_deid):
    left = o.text if o is not GAP else "—"
    right = d.text if d is not GAP else "—"
    marker = "   " if left == right else " * "
    print(f"  {left:>10}{marker}{right}")

# "aspirin" pairs with "REDACTED" (a substitution) and "81" faces a gap (a
# deletion); both count as redactions for scoring and both are visible to
# the CIRE judge inside the same chunk.
chunks = chunk_alignment(pair, size=8)
print(f"\n{len(chunks)} chunks of up to 8 positions:")
for c in chunks:
    print(f"  [{c.index}] original: {' '.join(c.original_tokens)}")
    print(f"      deid:     {' '.join(c.deid_tokens)}")
