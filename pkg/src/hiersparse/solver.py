"""Penalized least squares for interaction models.

Solves::

    minimize  (1/2n) ||Y - Z theta||^2 + lam * Pe(theta)

by consensus ADMM over the penalty atoms.  Every atom owns a latent copy of
the coordinates it touches (repeated coordinates get repeated copies), so the
overlapping group structure is handled exactly.  The x-step is a ridge-type
linear solve that is factorised once per step size; the z-step is a batch of
independent proximal maps.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .design import DataError, DesignMatrix, DomainError, InteractionIndex, SupportSet
from .penalties import AtomList, PenaltySpec, atoms, evaluate
from .prox import prox_atom, soft_threshold

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 20000
    primal_tol: float = 1e-8
    dual_tol: float = 1e-8
    rho: float = 1.0
    support_threshold: float | None = None  # None -> relative, see fit()
    restart: bool = True  # residual balancing of rho
    balance_every: int = 10
    balance_factor: float = 2.0
    record_objective: bool = False

    def __post_init__(self):
        if not (self.primal_tol > 0 and self.dual_tol > 0):
            raise DomainError("solver tolerances must be positive")
        if not self.rho > 0:
            raise DomainError("rho must be positive")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be at least 1")


@dataclass
class FitResult:
    theta: np.ndarray
    objective: float
    lam: float
    iterations: int
    converged: bool
    support: SupportSet
    primal_residual: float
    dual_residual: float
    penalty: PenaltySpec
    index: InteractionIndex
    history: list = field(default_factory=list, repr=False)

    @property
    def main(self) -> np.ndarray:
        return self.theta[: self.index.p]

    @property
    def interactions(self) -> np.ndarray:
        return self.theta[self.index.p:]

    def to_dict(self) -> dict:
        return {
            "penalty": self.penalty.to_dict(),
            "p": self.index.p,
            "lambda": self.lam,
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "theta": [float(v) for v in self.theta],
            "support": self.support.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> FitResult:
        return cls(
            theta=np.asarray(d["theta"], dtype=float),
            objective=d["objective"],
            lam=d["lambda"],
            iterations=d["iterations"],
            converged=d["converged"],
            support=SupportSet.from_dict(d["support"]),
            primal_residual=d["primal_residual"],
            dual_residual=d["dual_residual"],
            penalty=PenaltySpec.from_dict(d["penalty"]),
            index=InteractionIndex(d["p"]),
        )


@dataclass(frozen=True)
class TheoryConstants:
    """Constants entering the theoretical tuning level.

    ``c`` is the unspecified absolute constant of the noise tail bound; all
    quantities derived from it hold only up to that constant.
    """

    Ke: float = 1.0
    Kx: float = 1.0
    h0: float = 1.0
    delta: float = 0.5
    eta0: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        for name in ("Ke", "Kx", "h0", "eta0", "c"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if not 0 <= self.delta <= 1:
            raise DomainError("delta must lie in (0, 1]")

    @property
    def C_e_delta(self) -> float:
        return np.sqrt((1 + self.eta0) / self.c) * self.Ke * self.h0 * (1 + self.delta)


def lambda_theory(n: int, p1: int, tc: TheoryConstants) -> float:
    """``C_{e,delta} * sqrt(log(p1) / n)`` (natural log)."""
    if n < 2 or p1 < 2:
        raise DomainError("lambda_theory needs n >= 2 and p1 >= 2")
    return float(tc.C_e_delta * np.sqrt(np.log(p1) / n))


def _zmatrix(Z) -> tuple[np.ndarray, InteractionIndex]:
    if isinstance(Z, DesignMatrix):
        return Z.values, Z.index
    Z = np.asarray(Z, dtype=float)
    p1 = Z.shape[1]
    p = int(round((np.sqrt(8 * p1 + 1) - 1) / 2))
    if p * (p + 1) // 2 != p1:
        raise DomainError(f"{p1} columns is not p(p+1)/2 for any p")
    return Z, InteractionIndex(p)


def _check_data(Zv, Y):
    Y = np.asarray(Y, dtype=float).ravel()
    if Zv.ndim != 2 or Zv.shape[0] != Y.size:
        raise DataError(f"Z has {Zv.shape[0]} rows but Y has {Y.size} entries")
    if not (np.all(np.isfinite(Zv)) and np.all(np.isfinite(Y))):
        raise DataError("non-finite values in Z or Y")
    return Y


def objective(Z, Y, theta, lam: float, spec: PenaltySpec) -> float:
    Zv, idx = _zmatrix(Z)
    Y = _check_data(Zv, Y)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (idx.p1,):
        raise DomainError(f"theta must have length {idx.p1}")
    r = Y - Zv @ theta
    return float(r @ r / (2 * Y.size) + lam * evaluate(spec, theta, idx))


class _Layout:
    """Flattened latent-copy layout of an atom list."""

    def __init__(self, al: AtomList):
        self.atoms = al.atoms
        self.cat = np.concatenate([np.asarray(a.indices, dtype=int) for a in al.atoms])
        bounds = np.cumsum([0] + [len(a.indices) for a in al.atoms])
        self.slices = [slice(bounds[i], bounds[i + 1]) for i in range(len(al.atoms))]
        self.counts = np.bincount(self.cat, minlength=al.index.p1).astype(float)
        self.p1 = al.index.p1
        # vectorised paths for l1 atoms and l2 group atoms
        self.l1 = [(s, a.weight) for s, a in zip(self.slices, self.atoms) if a.kind == "l1"]
        l2 = [(s, a) for s, a in zip(self.slices, self.atoms) if a.kind == "lq" and a.q == 2.0]
        self.other = [
            (s, a) for s, a in zip(self.slices, self.atoms)
            if not (a.kind == "l1" or (a.kind == "lq" and a.q == 2.0))
        ]
        if l2:
            self.l2_pos = np.concatenate([np.arange(s.start, s.stop) for s, _ in l2])
            self.l2_seg = np.repeat(np.arange(len(l2)), [s.stop - s.start for s, _ in l2])
            self.l2_w = np.array([a.weight for _, a in l2])
        else:
            self.l2_pos = None

    def scatter(self, v: np.ndarray) -> np.ndarray:
        return np.bincount(self.cat, weights=v, minlength=self.p1)

    def prox(self, v: np.ndarray, scale: float) -> np.ndarray:
        out = np.empty_like(v)
        for s, w in self.l1:
            out[s] = soft_threshold(v[s], scale * w)
        if self.l2_pos is not None:
            seg = v[self.l2_pos]
            nrm = np.sqrt(np.bincount(self.l2_seg, weights=seg * seg))
            t = scale * self.l2_w
            with np.errstate(divide="ignore", invalid="ignore"):
                shrink = np.where(nrm > t, 1.0 - t / nrm, 0.0)
            out[self.l2_pos] = seg * shrink[self.l2_seg]
        for s, a in self.other:
            out[s] = prox_atom(a.kind, v[s], scale * a.weight, a.q)
        return out


class _XSolver:
    """Solves (Z'Z/n + rho D) x = b, by Cholesky or the Woodbury identity."""

    def __init__(self, Zv, counts):
        self.Z = Zv
        self.n, self.p1 = Zv.shape
        self.counts = counts
        self.gram = Zv.T @ Zv / self.n if self.p1 <= self.n else None
        self.rho = None

    def factor(self, rho):
        self.rho = rho
        if self.gram is not None:
            self.chol = linalg.cho_factor(self.gram + np.diag(rho * self.counts))
        else:
            self.dinv = 1.0 / (rho * self.counts)
            K = self.n * np.eye(self.n) + (self.Z * self.dinv) @ self.Z.T
            self.chol = linalg.cho_factor(K)

    def solve(self, b):
        if self.gram is not None:
            return linalg.cho_solve(self.chol, b)
        db = self.dinv * b
        return db - self.dinv * (self.Z.T @ linalg.cho_solve(self.chol, self.Z @ db))


def fit(
    Z,
    Y,
    spec: PenaltySpec,
    lam: float,
    cfg: SolverConfig | None = None,
    warm_start: tuple | None = None,
    _state: dict | None = None,
) -> FitResult:
    """Minimise ``(1/2n)||Y - Z theta||^2 + lam * Pe(theta)``.

    Parameters
    ----------
    Z : DesignMatrix or ndarray (n, p1)
    Y : ndarray (n,)
    spec : PenaltySpec
    lam : float
        Tuning parameter, > 0.
    cfg : SolverConfig, optional
    warm_start : (x, z, y, rho), optional
        Iterate and unscaled dual from a previous fit with the same penalty.

    Non-convergence is not an error; check ``FitResult.converged``.
    """
    cfg = cfg or SolverConfig()
    Zv, idx = _zmatrix(Z)
    Y = _check_data(Zv, Y)
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    n = Y.size
    al = atoms(spec, idx)
    lay = _Layout(al)
    xs = _XSolver(Zv, lay.counts)
    zty = Zv.T @ Y / n

    rho = cfg.rho
    if warm_start is not None:
        x, z, y, rho = warm_start
        x, z = x.copy(), z.copy()
        u = y / rho  # stored duals are unscaled
    else:
        x = np.zeros(idx.p1)
        z = np.zeros(lay.cat.size)
        u = np.zeros(lay.cat.size)
    xs.factor(rho)

    history = []
    converged = False
    r_norm = s_norm = np.inf
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        x = xs.solve(zty + rho * lay.scatter(z - u))
        Ax = x[lay.cat]
        z_old = z
        z = lay.prox(Ax + u, lam / rho)
        u = u + Ax - z

        r_norm = np.linalg.norm(Ax - z)
        s_norm = rho * np.linalg.norm(lay.scatter(z - z_old))
        eps_pri = cfg.primal_tol * max(np.linalg.norm(Ax), np.linalg.norm(z), np.finfo(float).tiny)
        eps_dual = cfg.dual_tol * max(rho * np.linalg.norm(lay.scatter(u)), np.finfo(float).tiny)
        if cfg.record_objective:
            history.append(objective(Zv, Y, x, lam, spec))
        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            break
        if cfg.restart and it % cfg.balance_every == 0:
            # residual balancing on relative residuals keeps rho scale-free
            rp = r_norm / eps_pri
            rd = s_norm / eps_dual
            if rp > 10 * rd:
                rho *= cfg.balance_factor
                u /= cfg.balance_factor
                xs.factor(rho)
            elif rd > 10 * rp:
                rho /= cfg.balance_factor
                u *= cfg.balance_factor
                xs.factor(rho)

    if not converged:
        log.warning("ADMM stopped after %d iterations (primal %.3g, dual %.3g)", it, r_norm, s_norm)
    thr = cfg.support_threshold
    if thr is None:
        # floor scales with Y so an all-zero fit does not report round-off
        col_ms = float(np.max((Zv * Zv).sum(axis=0))) / n
        data_scale = float(np.max(np.abs(zty))) / col_ms if col_ms > 0 else 0.0
        thr = max(1e-6 * float(np.max(np.abs(x), initial=0.0)), 1e-12 * data_scale)
    support = SupportSet.from_columns(np.nonzero(np.abs(x) > thr)[0], idx)
    if _state is not None:
        _state["warm"] = (x, z, u * rho, rho)
    return FitResult(
        theta=x,
        objective=objective(Zv, Y, x, lam, spec),
        lam=float(lam),
        iterations=it,
        converged=converged,
        support=support,
        primal_residual=float(r_norm),
        dual_residual=float(s_norm),
        penalty=spec,
        index=idx,
        history=history,
    )


def lambda_max_lasso(Z, Y) -> float:
    """Smallest lambda at which the lasso solution is zero: ``||Z'Y/n||_inf``."""
    Zv, _ = _zmatrix(Z)
    Y = _check_data(Zv, Y)
    return float(np.max(np.abs(Zv.T @ Y)) / Y.size)


def lambda_path(Z, Y, spec: PenaltySpec, grid, cfg: SolverConfig | None = None) -> list[FitResult]:
    """Fit a descending sequence of lambdas, warm-starting each from the last."""
    grid = [float(g) for g in grid]
    if not grid:
        raise DomainError("lambda grid is empty")
    if any(b > a for a, b in zip(grid, grid[1:])):
        raise DomainError("lambda grid must be sorted in descending order")
    state: dict = {}
    out = []
    for lam in grid:
        out.append(fit(Z, Y, spec, lam, cfg, warm_start=state.get("warm"), _state=state))
    return out


def holdout_select(Z, Y, spec, grid, frac: float = 0.25, seed: int = 0, cfg=None):
    """Pick lambda from ``grid`` by squared error on a random holdout split.

    Returns ``(best_lambda, errors)``.
    """
    Zv, idx = _zmatrix(Z)
    Y = _check_data(Zv, Y)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(Y.size)
    n_test = max(1, int(round(frac * Y.size)))
    test, train = perm[:n_test], perm[n_test:]
    fits = lambda_path(Zv[train], Y[train], spec, grid, cfg)
    errors = [float(np.mean((Y[test] - Zv[test] @ f.theta) ** 2)) for f in fits]
    return grid[int(np.argmin(errors))], errors
