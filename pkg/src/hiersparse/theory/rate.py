"""Convergence-rate experiment for hierarchical penalties.

For every cell of a (p, s_main, s_int, n) grid and every replication a design,
a hierarchical truth and noise are drawn; each configured penalty is fitted
with ``lambda = multiplier * lambda_theory`` and the l1 error and penalty
error of ``v = theta_hat - beta`` are recorded.  The summary regresses
``log(mean l1 error)`` on ``log(s sqrt(log p1 / n))`` per penalty.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from ..design import DomainError, InteractionIndex, expand_design
from ..penalties import PenaltySpec, evaluate
from ..solver import SolverConfig, TheoryConstants, fit, lambda_theory
from .moments import CONSTANTS_BANNER
from .restricted import re_constant
from .sampling import DesignDistribution, column_sd, gen_design, gen_noise, gen_truth, noise_psi2

log = logging.getLogger(__name__)

CSV_FIELDS = ("penalty", "n", "p", "s", "rep", "l1_error", "pe_error", "predicted", "seed")
THREADS_ENV = "HIERSPARSE_THREADS"


@dataclass(frozen=True)
class ExperimentConfig:
    design: DesignDistribution = field(default_factory=DesignDistribution)
    p_list: tuple = (10, 20, 40)
    s_main_list: tuple = (2, 3)
    s_int_list: tuple = (1, 2)
    n_list: tuple = (200, 400, 800, 1600)
    replications: int = 20
    penalties: tuple = ("cap:q=2", "lasso")
    lambda_multiplier: float = 2.0
    magnitude: float = 3.0
    noise_sd: float = 1.0
    noise_kind: str = "gaussian"
    delta: float = 0.5
    eta0: float = 1.0
    c: float = 1.0
    center: bool = False
    tol: float = 1e-6
    max_iterations: int = 20000
    seed: int = 0

    def __post_init__(self):
        for name in ("p_list", "s_main_list", "s_int_list", "n_list", "penalties"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise DomainError(f"{name} must be nonempty")
        if self.replications < 1:
            raise DomainError("replications must be at least 1")
        for spec in self.penalties:
            PenaltySpec.parse(spec)

    def specs(self) -> list[PenaltySpec]:
        return [PenaltySpec.parse(s) for s in self.penalties]

    def cells(self) -> list[tuple[int, int, int, int]]:
        """Feasible (p, s_main, s_int, n) cells in canonical order.

        Combinations with more interactions than pairs among the main
        effects are dropped; an error is raised when nothing remains.
        """
        out = [
            (p, sm, si, n)
            for p, sm, si, n in product(self.p_list, self.s_main_list, self.s_int_list, self.n_list)
            if sm <= p and si <= sm * (sm - 1) // 2
        ]
        if not out:
            raise DomainError("no feasible (p, s_main, s_int) combination in the grid")
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["design"] = self.design.to_dict()
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        d = dict(d)
        if "design" in d:
            d["design"] = DesignDistribution.from_dict(d["design"])
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> ExperimentConfig:
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib

            return cls.from_dict(tomllib.loads(text))
        return cls.from_dict(json.loads(text))


def replication_rng(seed: int, cell: int, rep: int) -> tuple[np.random.Generator, int]:
    ss = np.random.SeedSequence([seed, cell, rep])
    return np.random.default_rng(ss), int(ss.generate_state(1)[0])


def theory_constants(cfg: ExperimentConfig, p: int) -> TheoryConstants:
    return TheoryConstants(
        Ke=noise_psi2(cfg.noise_sd, cfg.noise_kind),
        h0=float(column_sd(cfg.design, p).max()),
        delta=cfg.delta,
        eta0=cfg.eta0,
        c=cfg.c,
    )


def _run_cell(args):
    cfg, cell_id, (p, sm, si, n) = args
    idx = InteractionIndex(p)
    specs = cfg.specs()
    lam = cfg.lambda_multiplier * lambda_theory(n, idx.p1, theory_constants(cfg, p))
    scfg = SolverConfig(primal_tol=cfg.tol, dual_tol=cfg.tol, max_iterations=cfg.max_iterations)
    s = sm + si
    predicted = s * np.sqrt(np.log(idx.p1) / n)
    rows = []
    for rep in range(cfg.replications):
        rng, rep_seed = replication_rng(cfg.seed, cell_id, rep)
        X = gen_design(n, p, cfg.design, rng)
        beta, _ = gen_truth(p, sm, si, cfg.magnitude, rng)
        D = expand_design(X, center=cfg.center)
        Y = D.values @ beta + gen_noise(n, cfg.noise_sd, cfg.noise_kind, rng)
        for spec in specs:
            res = fit(D, Y, spec, lam, scfg)
            v = res.theta - beta
            rows.append({
                "penalty": spec.label(),
                "n": n,
                "p": p,
                "s": s,
                "s_main": sm,
                "s_int": si,
                "rep": rep,
                "l1_error": float(np.abs(v).sum()),
                "pe_error": float(evaluate(spec, v, idx)),
                "predicted": float(predicted),
                "seed": rep_seed,
                "lambda": lam,
                "converged": res.converged,
            })
    return rows


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def rate_experiment(cfg: ExperimentConfig, n_jobs: int | None = None) -> list[dict]:
    """Run the grid and return one record per (cell, replication, penalty).

    Records are sorted by (penalty, p, s_main, s_int, n, rep), so the output
    does not depend on how cells were scheduled.
    """
    cells = cfg.cells()
    tasks = [(cfg, i, c) for i, c in enumerate(cells)]
    n_jobs = default_workers() if n_jobs is None else n_jobs
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            chunks = list(ex.map(_run_cell, tasks))
    else:
        chunks = [_run_cell(t) for t in tasks]
    rows = [r for ch in chunks for r in ch]
    rows.sort(key=lambda r: (r["penalty"], r["p"], r["s_main"], r["s_int"], r["n"], r["rep"]))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(r[k]) if isinstance(r[k], float) else r[k]) for k in CSV_FIELDS})
    return buf.getvalue()


def _ols(x, y):
    X = np.c_[np.ones_like(x), x]
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(len(x) - 2, 1)
    sigma2 = resid @ resid / dof
    cov = sigma2 * np.linalg.inv(X.T @ X)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1 - resid @ resid / ss_tot if ss_tot > 0 else 1.0
    return float(coef[1]), float(np.sqrt(cov[1, 1])), float(coef[0]), float(r2)


def summarize(rows) -> dict:
    """Per-penalty log-log slope of mean l1 error on the predicted rate."""
    out = {"banner": CONSTANTS_BANNER, "penalties": {}}
    for pen in sorted({r["penalty"] for r in rows}):
        sub = [r for r in rows if r["penalty"] == pen]
        cells = {}
        for r in sub:
            cells.setdefault((r["p"], r["s_main"], r["s_int"], r["n"]), []).append(r)
        pred = np.array([v[0]["predicted"] for v in cells.values()])
        mean_err = np.array([np.mean([r["l1_error"] for r in v]) for v in cells.values()])
        slope, se, intercept, r2 = _ols(np.log(pred), np.log(mean_err))
        out["penalties"][pen] = {
            "slope": slope,
            "slope_se": se,
            "intercept": intercept,
            "r2": r2,
            "cells": len(cells),
            "fits": len(sub),
            "not_converged": sum(not r["converged"] for r in sub),
            "pe_above_3l1": sum(r["pe_error"] > 3 * r["l1_error"] + 1e-9 for r in sub),
            "pe_below_l1": sum(r["pe_error"] < r["l1_error"] - 1e-9 for r in sub),
        }
    return out


@dataclass(frozen=True)
class RateBound:
    s: int
    n: int
    p1: int
    M_hat: float
    D_s: float
    lam: float
    predicted_l1: float
    observed_l1: float

    @property
    def holds(self) -> bool:
        return self.observed_l1 <= self.predicted_l1


def rate_bound_check(
    p: int,
    s_main: int,
    s_int: int,
    n: int,
    replications: int,
    spec: PenaltySpec = PenaltySpec("cap"),
    magnitude: float = 3.0,
    noise_sd: float = 1.0,
    lambda_multiplier: float = 2.0,
    re_budget: int = 100,
    seed: int = 0,
) -> list[RateBound]:
    """Compare ``||v||_1`` with ``lambda * 16 s / M_hat(7, s)^2`` per replication.

    ``M_hat`` is the descent estimate of the RE constant of that design, an
    upper bound on the true constant, so the reported bound is optimistic.
    """
    idx = InteractionIndex(p)
    dist = DesignDistribution()
    tc = TheoryConstants(Ke=noise_psi2(noise_sd), h0=float(column_sd(dist, p).max()))
    lam = lambda_multiplier * lambda_theory(n, idx.p1, tc)
    s = s_main + s_int
    out = []
    for rep in range(replications):
        rng, _ = replication_rng(seed, 0, rep)
        D = expand_design(gen_design(n, p, dist, rng))
        beta, _ = gen_truth(p, s_main, s_int, magnitude, rng)
        Y = D.values @ beta + gen_noise(n, noise_sd, "gaussian", rng)
        res = fit(D, Y, spec, lam, SolverConfig(primal_tol=1e-6, dual_tol=1e-6))
        M = re_constant(D, s, 7.0, "random_cone_descent", budget=re_budget, seed=rng, iters=300).M_hat
        D_s = 16.0 * s / M**2
        out.append(RateBound(s, n, idx.p1, M, D_s, lam, lam * D_s, float(np.abs(res.theta - beta).sum())))
    return out
