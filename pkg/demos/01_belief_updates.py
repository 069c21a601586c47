"""Belief arithmetic walkthrough: posterior updates and evidence mixtures.

The detector's state is a single number: the probability that the target
is present given everything observed so far.  Each quantized feature value
moves that belief through a likelihood ratio.
"""

import numpy as np

from cascadeshare import ConditionalPmf, evidence_pmf, likelihood_ratios, posterior_update

# a 5-bin feature: higher bins are more common when the target is present
model = ConditionalPmf(
    p0=[0.35, 0.30, 0.20, 0.10, 0.05],
    p1=[0.05, 0.10, 0.20, 0.30, 0.35],
)
ratios = likelihood_ratios(model)
print("per-bin likelihood ratios:", np.round(ratios, 3))

prior = 0.10
print(f"\nstarting belief {prior}")
for y in range(model.bins):
    post = posterior_update(prior, ratios[y])
    print(f"  observe bin {y}: belief -> {post:.4f}")

# the predictive distribution of the next feature blends both conditionals
for pi in (0.0, 0.1, 0.5, 1.0):
    e = evidence_pmf(model, pi)
    print(f"evidence at belief {pi:0.1f}: {np.round(e, 3)}  (sum {e.sum():.12f})")

# iterated expectation: the expected updated belief is the current belief
pi = 0.37
e = evidence_pmf(model, pi)
updates = [posterior_update(pi, ratios[y]) for y in range(model.bins)]
print(f"\nmartingale check at belief {pi}: E[updated belief] = {float(e @ updates):.15f}")

# chains compose: two weak observations act like one stronger one
pi = prior
for step, y in enumerate([3, 4, 4], start=1):
    pi = posterior_update(pi, ratios[y])
    print(f"after observation {step} (bin {y}): belief = {pi:.4f}")
