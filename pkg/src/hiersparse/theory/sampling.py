"""Random designs, hierarchical truths and noise for the simulation bench."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from ..design import DomainError, InteractionIndex, SupportSet, hierarchy_check

KINDS = ("gaussian", "rademacher", "uniform")
COVARIANCES = ("identity", "ar1", "toeplitz")


class AssumptionWarning(UserWarning):
    """A premise of a theoretical guarantee does not hold for the inputs."""


@dataclass(frozen=True)
class DesignDistribution:
    """Distribution of one row of X: ``L R`` with ``R`` i.i.d. unit-variance entries.

    ``kind`` picks the entries of ``R`` (standard Gaussian, Rademacher, or
    uniform on [-sqrt 3, sqrt 3]); ``L`` is a square root of the covariance.
    With the identity covariance the entries are used as they are.
    """

    kind: str = "gaussian"
    covariance: str = "identity"
    rho: float = 0.0
    toeplitz: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown design kind {self.kind!r}")
        if self.covariance not in COVARIANCES:
            raise DomainError(f"unknown covariance {self.covariance!r}")
        if self.covariance == "ar1" and not abs(self.rho) < 1:
            raise DomainError("AR(1) correlation must satisfy |rho| < 1")
        if self.covariance == "toeplitz":
            if not self.toeplitz:
                raise DomainError("toeplitz covariance needs a coefficient list")
            object.__setattr__(self, "toeplitz", tuple(float(t) for t in self.toeplitz))

    def sigma(self, p: int) -> np.ndarray:
        lag = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
        if self.covariance == "identity":
            return np.eye(p)
        if self.covariance == "ar1":
            return self.rho ** lag
        t = np.zeros(p)
        m = min(p, len(self.toeplitz))
        t[:m] = self.toeplitz[:m]
        return t[lag]

    def sqrt_sigma(self, p: int) -> np.ndarray:
        S = self.sigma(p)
        if not np.allclose(S, S.T):
            raise DomainError("covariance is not symmetric")
        w, V = np.linalg.eigh(S)
        if w.min() < -1e-10 * max(1.0, w.max()):
            raise DomainError(f"covariance is not positive semidefinite (min eigenvalue {w.min():.3g})")
        return (V * np.sqrt(np.clip(w, 0, None))) @ V.T

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "covariance": self.covariance}
        if self.covariance == "ar1":
            d["rho"] = self.rho
        if self.covariance == "toeplitz":
            d["toeplitz"] = list(self.toeplitz)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> DesignDistribution:
        return cls(d.get("kind", "gaussian"), d.get("covariance", "identity"),
                   float(d.get("rho", 0.0)), tuple(d.get("toeplitz", ())))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _entries(kind: str, rng: np.random.Generator, shape) -> np.ndarray:
    if kind == "gaussian":
        return rng.standard_normal(shape)
    if kind == "rademacher":
        return rng.integers(0, 2, size=shape) * 2.0 - 1.0
    return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=shape)


def gen_design(n: int, p: int, dist: DesignDistribution, seed=None) -> np.ndarray:
    """Draw an n x p matrix with i.i.d. rows from ``dist``."""
    if n < 1 or p < 1:
        raise DomainError("need n, p >= 1")
    rng = _rng(seed)
    R = _entries(dist.kind, rng, (n, p))
    if dist.covariance == "identity":
        return R
    return R @ dist.sqrt_sigma(p).T


def gen_truth(p: int, s_main: int, s_int: int, magnitude: float, seed=None):
    """Random strongly hierarchical coefficient vector.

    ``s_main`` main effects are drawn uniformly, then ``s_int`` pairs among
    them.  Nonzero entries are ``+-magnitude`` with random signs.  Returns
    ``(beta, S)``; ``S`` is empty when ``magnitude`` is zero.
    """
    if not 0 <= s_main <= p:
        raise DomainError(f"s_main={s_main} out of range for p={p}")
    if not 0 <= s_int <= s_main * (s_main - 1) // 2:
        raise DomainError(f"s_int={s_int} infeasible with s_main={s_main}")
    rng = _rng(seed)
    idx = InteractionIndex(p)
    main = np.sort(rng.choice(p, size=s_main, replace=False)) + 1
    cand = [(int(j), int(k)) for a, j in enumerate(main) for k in main[a + 1:]]
    picks = rng.choice(len(cand), size=s_int, replace=False) if s_int else []
    pairs = [cand[i] for i in sorted(picks)]
    S = SupportSet(frozenset(int(j) for j in main), frozenset(pairs))
    beta = np.zeros(idx.p1)
    cols = S.columns(idx)
    beta[cols] = magnitude * rng.choice([-1.0, 1.0], size=cols.size)
    if magnitude == 0:
        S = SupportSet()
    assert hierarchy_check(S)
    return beta, S


def gen_noise(n: int, scale: float, kind: str = "gaussian", seed=None) -> np.ndarray:
    """Noise with standard deviation ``scale``; ``kind`` is gaussian or rademacher."""
    rng = _rng(seed)
    if kind == "gaussian":
        return scale * rng.standard_normal(n)
    if kind == "rademacher":
        return scale * (rng.integers(0, 2, size=n) * 2.0 - 1.0)
    raise DomainError(f"unknown noise kind {kind!r}")


def gaussian_psi2(sd: float = 1.0, qmax: int | None = None) -> float:
    """``sup_q q^{-1/2} (E|X|^q)^{1/q}`` for X ~ N(0, sd^2), from exact moments.

    ``E|X|^q = sd^q 2^{q/2} Gamma((q+1)/2) / sqrt(pi)``.  The sup over real
    q >= 1 is attained at q = 1; ``qmax`` restricts to integers 1..qmax.
    """
    qs = np.arange(1, (qmax or 50) + 1, dtype=float)
    log_m = qs / 2 * np.log(2) + gammaln((qs + 1) / 2) - 0.5 * np.log(np.pi)
    return float(sd * np.max(np.exp(log_m / qs) / np.sqrt(qs)))


def noise_psi2(scale: float, kind: str = "gaussian") -> float:
    if kind == "gaussian":
        return gaussian_psi2(scale)
    # |X| = scale a.s., so every moment root equals scale; sup at q = 1
    return float(scale)


def column_sd(dist: DesignDistribution, p: int, n_mc: int = 200_000, seed=0) -> np.ndarray:
    """Population standard deviations of the p1 columns of Z.

    Exact for Gaussian rows: var(X_j X_k) = S_jj S_kk + S_jk^2.  Other
    kinds fall back to a Monte Carlo estimate.
    """
    idx = InteractionIndex(p)
    pa = idx.pair_array
    if dist.kind == "gaussian":
        S = dist.sigma(p)
        var_main = np.diag(S)
        var_pair = S[pa[:, 0], pa[:, 0]] * S[pa[:, 1], pa[:, 1]] + S[pa[:, 0], pa[:, 1]] ** 2
        return np.sqrt(np.r_[var_main, var_pair])
    X = gen_design(n_mc, p, dist, seed)
    Z = np.hstack([X, X[:, pa[:, 0]] * X[:, pa[:, 1]]])
    return Z.std(axis=0)


def check_a2_premise(dist: DesignDistribution, p: int, floor: float = 1e-10) -> float:
    """Smallest eigenvalue of the main-effect covariance; warns when it is ~0."""
    lam_min = float(np.linalg.eigvalsh(dist.sigma(p)).min())
    if lam_min <= floor:
        warnings.warn(
            f"main-effect covariance is singular (min eigenvalue {lam_min:.3g}); "
            "positive eigenvalues of cov(Z) are not guaranteed",
            AssumptionWarning,
            stacklevel=3,
        )
    return lam_min
