"""Least-favorable robustification of an untrusted stage model.

Cheap early-stage features are deliberately crude, so their estimated PMFs
are only trusted up to a contamination neighborhood.  The least-favorable
pair clips the likelihood ratio to a window [l_lo, l_hi] chosen so both
transformed PMFs stay normalized; the window in turn bounds how far one
observation can move the belief.
"""

import numpy as np

from cascadeshare import (
    ConditionalPmf,
    UncertaintyParams,
    likelihood_ratios,
    posterior_bounds,
    robustify,
    solve_breakpoints,
)

nominal = ConditionalPmf(p0=[0.7, 0.2, 0.1], p1=[0.1, 0.2, 0.7])
print("nominal ratios:", np.round(likelihood_ratios(nominal), 4))

for level in (0.0, 0.05, 0.10, 0.15):
    u = UncertaintyParams(level, level, level, level)
    b = solve_breakpoints(nominal, u)
    print(f"contamination {level:.2f}: ratio window [{b.l_lo:.4f}, {b.l_hi:.4f}]")

u = UncertaintyParams(0.1, 0.1, 0.1, 0.1)
b = solve_breakpoints(nominal, u)
robust = robustify(nominal, u, b)
print("\nat 10% contamination:")
print("  robust p(y|0):", np.round(robust.p0, 4), " sum", robust.p0.sum())
print("  robust p(y|1):", np.round(robust.p1, 4), " sum", robust.p1.sum())
print("  robust ratios:", np.round(likelihood_ratios(robust), 4), "(clipped to the window)")

pi = 0.10
lo, hi = posterior_bounds(pi, b)
print(f"\nfrom belief {pi}, one robust observation stays within [{lo:.4f}, {hi:.4f}]")
print("compare the nominal model, where the same observation could reach",
      f"[{pi * 1/7 / (pi * 1/7 + 1 - pi):.4f}, {pi * 7 / (pi * 7 + 1 - pi):.4f}]")

# push the contamination too far and the two hypothesis classes overlap
from cascadeshare import DegenerateUncertaintyError

try:
    solve_breakpoints(ConditionalPmf(p0=[0.55, 0.45], p1=[0.45, 0.55]),
                      UncertaintyParams(0.1, 0.1, 0.1, 0.1))
except DegenerateUncertaintyError as exc:
    print(f"\nweakly informative model at the same contamination: {exc}")
