"""
Hierarchical penalties on a small example
=========================================

Evaluate each penalty family on one coefficient vector, split it into
proximal atoms, and run the sandwich-bound check on random supports.
"""

# %%
import numpy as np

from hiersparse import InteractionIndex, PenaltySpec, SupportSet, atoms, check_a3, evaluate
from hiersparse.penalties import a3_constants_sharp, a3_suite

idx = InteractionIndex(4)
print("p =", idx.p, " p1 =", idx.p1)
print("pairs in column order:", idx.pairs)

# %%
# A vector with two main effects and their interaction.
theta = np.zeros(idx.p1)
theta[[0, 1]] = [3.0, -1.0]
theta[idx.pair_to_column(1, 2) - 1] = 2.0

families = ["lasso", "cap:q=2", "cap:q=inf", "bien", "pairwise:q=2", "block:q=2,d0=2", "nested:q=2"]
for text in families:
    spec = PenaltySpec.parse(text)
    print(f"{text:>16s}  Pe = {evaluate(spec, theta, idx):8.4f}   atoms = {len(atoms(spec, idx))}")

# %%
# The atom list is what the solver sees; its sum reproduces the penalty.
cap = PenaltySpec.parse("cap:q=2")
for a in atoms(cap, idx):
    print(a.kind, a.weight, a.indices)

# %%
# Sandwich check on the true support.
S = SupportSet({1, 2}, {(1, 2)})
r = check_a3(cap, theta + 0.1, S, idx)
print("lower ok:", r.lower, " upper ok:", r.upper, " slacks:", r.slacks)

# %%
# Random supports, 1000 draws each.  The pairwise family needs L2 = 1 + 2/(p-1)
# rather than its declared value, and block windows with d0 > 1 admit no L1.
for text in ["cap:q=2", "pairwise:q=2", "block:q=2,d0=2"]:
    spec = PenaltySpec.parse(text)
    rep = a3_suite(spec, 5, 1000, seed=0)
    print(f"{text:>16s}  declared {rep.constants}  passed {rep.passed}/1000")
    sharp = a3_constants_sharp(spec, 5)
    if sharp is not None and sharp != rep.constants:
        print(" " * 18 + f"with {sharp}: passed {a3_suite(spec, 5, 1000, 0, sharp).passed}/1000")
