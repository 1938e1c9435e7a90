"""Decide whether two retrieval hit rates differ by more than chance.

Compares hit counts from two hypothetical systems over the same query set
with an uncorrected two-proportion chi-square test, then applies the Holm
step-down correction when several cutoffs are tested in one family.
"""
from xmodal import ProportionSample, holm_adjust, two_proportion_chisq

N = 1000
cases = [
    ("hit@1 ", ProportionSample(612, N), ProportionSample(575, N)),
    ("hit@5 ", ProportionSample(844, N), ProportionSample(770, N)),
    ("hit@10", ProportionSample(901, N), ProportionSample(896, N)),
]

raw = []
for label, a, b in cases:
    stat, p = two_proportion_chisq(a, b)
    raw.append(p)
    print(f"{label}: {a.successes}/{a.trials} vs {b.successes}/{b.trials}  "
          f"chi2={stat:.3f}  p={p:.5f}")

adjusted = holm_adjust(raw)
print()
print("after Holm correction across the family:")
for (label, _, _), p in zip(cases, adjusted):
    verdict = "significant" if p < 0.05 else "not significant"
    print(f"{label}: adjusted p={p:.5f}  ({verdict} at 0.05)")
