#!/usr/bin/env python3
# Walk through the two gradient-set metrics on hand-built vectors:
# cohesion (how aligned a set is internally) and divergence (the angle
# between two sets' summed directions). These are the raw signals the
# early-stopping controller watches.

import numpy as np

from gradstop import GradientSet, cohesion, divergence

def gset(rows):
    rows = np.asarray(rows, dtype=float)
    return GradientSet(vectors=rows, source_indices=np.arange(len(rows)))

print("cohesion: || sum g || / sum || g ||")
print("  aligned pair      ->", cohesion(gset([[1, 0], [2, 0]])))        # 1.0
print("  cancelling pair   ->", cohesion(gset([[1, 0], [-1, 0]])))      # 0.0
print("  orthogonal pair   ->", cohesion(gset([[1, 0], [0, 1]])))       # ~0.707

# Cohesion only cares about directions, not magnitudes: scaling the whole
# set leaves it unchanged.
rng = np.random.default_rng(0)
vecs = rng.normal(size=(5, 8))
print("  random set        ->", round(cohesion(gset(vecs)), 4))
print("  same set * 100    ->", round(cohesion(gset(100 * vecs)), 4))

print()
print("divergence: angle between summed directions, in radians")
a = gset([[1.0, 0.0], [2.0, 0.0]])
b = gset([[0.0, 1.0], [0.0, 0.5]])
print("  orthogonal sums   ->", round(divergence(a, b), 4), "(pi/2)")
c = gset(-a.vectors)
print("  opposed sums      ->", round(divergence(a, c), 4), "(pi)")

# A divergence above ~pi/2 between the large-gradient and small-gradient
# halves of a batch is the controller's signal that the two populations
# pull the parameters in conflicting directions from the very start.
