"""
Unambiguous discrimination of pulse sequences
=============================================

Eve attacks a few consecutive slots at a time. To learn a bit without
errors she must tell the target pattern apart from every other pattern
Alice could have sent, and she can only succeed with some probability.
"""

import math

import numpy as np

from cowqkd.states import UsdKind, build_state_set, gram_matrix, usd_conclusive_closed_form, usd_conclusive_oracle

# The three-slot attack looks for "0 a 0" (empty, full, empty).
states = build_state_set(UsdKind.USD3)
print("target:", states.target)
print("alternatives:", ", ".join(str(a) for a in states.alternatives))

# Overlaps between coherent-state sequences are exp(-mu/2) per differing slot.
mu = 0.5
print(np.round(gram_matrix(states, mu), 4))

# The success probability follows from the inverse Gram matrix; it agrees
# with a closed form in chi = exp(-mu/2).
for kind in UsdKind:
    s = build_state_set(kind)
    oracle = usd_conclusive_oracle(s, mu).conclusive_prob
    closed = usd_conclusive_closed_form(kind, mu).conclusive_prob
    print(f"{kind.value:8s} {len(s.alternatives):2d} alternatives  P_c = {closed:.6f}  (Gram: {oracle:.6f})")

# At small mu every attack succeeds rarely: P_c ~ mu^2 for three slots.
for mu in (0.1, 0.01, 0.001):
    pc = usd_conclusive_closed_form(UsdKind.USD3, mu).conclusive_prob
    print(f"mu = {mu:<6} P_c / mu^2 = {pc / mu**2:.4f}")

print("chi at ln 2:", math.exp(-math.log(2) / 2))
