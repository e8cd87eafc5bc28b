"""
Fitting a hierarchical model
============================

Simulate data with a strongly hierarchical truth and compare the lasso
with the composite absolute penalty along a lambda path.
"""

# %%
import numpy as np

from hiersparse import PenaltySpec, TheoryConstants, expand_design, fit, lambda_path, lambda_theory
from hiersparse.solver import lambda_max_lasso
from hiersparse.theory import DesignDistribution, column_sd, gen_design, gen_noise, gen_truth, noise_psi2

rng = np.random.default_rng(1)
n, p = 300, 8
X = gen_design(n, p, DesignDistribution(), rng)
beta, S = gen_truth(p, 3, 2, 2.0, rng)
D = expand_design(X)
Y = D.values @ beta + gen_noise(n, 1.0, "gaussian", rng)
print("true support:", S)

# %%
# Tuning at twice the theoretical level.
tc = TheoryConstants(Ke=noise_psi2(1.0), h0=float(column_sd(DesignDistribution(), p).max()))
lam = 2 * lambda_theory(n, D.p1, tc)
print(f"lambda = {lam:.4f}")

for text in ["lasso", "cap:q=2", "bien"]:
    res = fit(D, Y, PenaltySpec.parse(text), lam)
    err = np.abs(res.theta - beta).sum()
    print(f"{text:>8s}  l1 error {err:.3f}  support {res.support.s}  iters {res.iterations}")

# %%
# A warm-started path.  Support sizes grow as lambda falls.
lmax = lambda_max_lasso(D, Y)
grid = np.geomspace(lmax, 0.02 * lmax, 10)
for r in lambda_path(D, Y, PenaltySpec("cap", 2), grid):
    print(f"lambda {r.lam:8.4f}  support {r.support.s:3d}  objective {r.objective:.5f}")
