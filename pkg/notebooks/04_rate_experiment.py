"""
Convergence rate on a reduced grid
==================================

The full grid lives in ``configs/default.toml`` and takes about a minute
on one core.  Here a smaller grid shows the same log-log slope.
"""

# %%
from hiersparse.theory import ExperimentConfig, a0_event_rate, concentration_squares_check, rate_experiment, summarize
from hiersparse.theory import DesignDistribution, gaussian_psi2
from hiersparse import TheoryConstants

cfg = ExperimentConfig(p_list=(10, 20), s_main_list=(2, 3), s_int_list=(1,), n_list=(200, 400, 800),
                       replications=5)
rows = rate_experiment(cfg)
summary = summarize(rows)
print(summary["banner"])
for pen, v in summary["penalties"].items():
    print(f"{pen:>8s}  slope {v['slope']:.3f} +- {v['slope_se']:.3f}  R2 {v['r2']:.3f}  "
          f"Pe > 3 l1: {v['pe_above_3l1']}")

# %%
# The noise event that justifies the lambda choice, at a few multipliers.
for m in (0.5, 1.0, 2.0):
    f = a0_event_rate(500, 10, DesignDistribution(), gaussian_psi2(), TheoryConstants(), 200, seed=0, multiplier=m)
    print(f"multiplier {m}: frequency {f:.3f}")

# %%
rep = concentration_squares_check(n_list=(100, 300, 1000, 3000), trials=2000, seed=0)
for row in rep.rows():
    print(row)
print("slope", round(rep.slope, 3))
