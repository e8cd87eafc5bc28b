"""
Restricted eigenvalues of interaction designs
=============================================
"""

# %%
import numpy as np

from hiersparse import expand_design
from hiersparse.theory import (
    DesignDistribution,
    epsilon_limit,
    gen_design,
    re_constant,
    re_probe,
    re_sample_size,
    sigma_z_eigs,
)

# %%
# The descent estimate is an upper bound on the RE constant.  For Gaussian
# main effects it stays well away from zero even at moderate n.
for n in (100, 200, 400):
    vals = []
    for seed in range(10):
        D = expand_design(gen_design(n, 8, DesignDistribution(), seed))
        vals.append(re_constant(D, 2, 7.0, budget=100, seed=seed).M_hat)
    print(f"n={n:4d}  M_hat min {min(vals):.3f}  median {np.median(vals):.3f}")

# %%
# Population eigenvalues of cov(Z), estimated by Monte Carlo, and the
# admissible epsilon they imply.
for dist in (DesignDistribution(), DesignDistribution(covariance="ar1", rho=0.5)):
    lo, hi = sigma_z_eigs(dist, 6, 200_000, seed=0)
    print(dist.covariance, f"eigs [{lo:.3f}, {hi:.3f}]  eps limit {epsilon_limit(lo, hi):.4f}")

# %%
# The sample-size formula is very conservative (all constants set to 1).
print(f"{re_sample_size(2, 7.0, 36, 0.05):.3e}")

# %%
# Linear and quadratic parts of Z'u are uncorrelated for Gaussian X.
u = np.random.default_rng(0).standard_normal(21)
u /= np.linalg.norm(u)
probe = re_probe(u, DesignDistribution(), 200_000, seed=1)
print(f"rho_hat {probe.rho_hat:+.4f}   psi1_hat {probe.psi1_hat:.3f}")
