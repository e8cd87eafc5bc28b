"""Monte Carlo checks of moment and tail claims for interaction designs.

Every quantity that depends on an unspecified absolute constant (``c`` in the
noise threshold, ``C_K`` in the square-concentration bound) holds only up to
that constant; reports carry :data:`CONSTANTS_BANNER`.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..design import DomainError, InteractionIndex
from ..solver import TheoryConstants, lambda_theory
from .sampling import (
    DesignDistribution,
    _rng,
    check_a2_premise,
    gen_design,
    gen_noise,
    noise_psi2,
)

CONSTANTS_BANNER = "up to absolute constants (unspecified constants set to 1)"


def _expand(X: np.ndarray) -> np.ndarray:
    pa = InteractionIndex(X.shape[1]).pair_array
    return np.hstack([X, X[:, pa[:, 0]] * X[:, pa[:, 1]]])


def population_mean_z(dist: DesignDistribution, p: int) -> np.ndarray:
    """E(Z): zero on main effects, Sigma_jk on the pair (j, k)."""
    pa = InteractionIndex(p).pair_array
    S = dist.sigma(p)
    return np.r_[np.zeros(p), S[pa[:, 0], pa[:, 1]]]


def sigma_z_eigs(dist: DesignDistribution, p: int, n_mc: int, seed=None) -> tuple[float, float]:
    """Extreme eigenvalues of the Monte Carlo covariance of the rows of Z.

    Warns with :class:`AssumptionWarning` when the main-effect covariance is
    (numerically) singular, since positivity is then not guaranteed.
    """
    p1 = InteractionIndex(p).p1
    if n_mc < 10 * p1:
        raise DomainError(f"n_mc={n_mc} is below 10 * p1 = {10 * p1}")
    check_a2_premise(dist, p)
    Z = _expand(gen_design(n_mc, p, dist, seed))
    Z -= Z.mean(axis=0)
    w = np.linalg.eigvalsh(Z.T @ Z / n_mc)
    return float(w[0]), float(w[-1])


def a0_event_rate(
    n: int,
    p: int,
    dist: DesignDistribution,
    Ke_noise: float,
    tc: TheoryConstants,
    trials: int,
    seed=None,
    multiplier: float = 1.0,
    noise_kind: str = "gaussian",
) -> float:
    """Frequency of ``||Z' eps / n||_inf < multiplier * C_{e,delta} sqrt(log p1 / n)``.

    The noise is scaled so that its psi_2 norm equals ``Ke_noise``, and that
    value replaces ``tc.Ke`` in the threshold.  Interaction columns are
    centred at their population means.
    """
    if trials < 1:
        raise DomainError("trials must be at least 1")
    idx = InteractionIndex(p)
    tc = replace(tc, Ke=Ke_noise)
    thr = multiplier * lambda_theory(n, idx.p1, tc)
    sd = Ke_noise / noise_psi2(1.0, noise_kind)
    mu = population_mean_z(dist, p)
    rng = _rng(seed)
    hits = 0
    for _ in range(trials):
        Z = _expand(gen_design(n, p, dist, rng)) - mu
        eps = gen_noise(n, sd, noise_kind, rng)
        hits += np.max(np.abs(Z.T @ eps)) / n < thr
    return hits / trials


def q1n_q2n(n: int, p1: int, delta: float, CK: float = 1.0, eta0: float = 1.0) -> tuple[float, float]:
    """The two probability factors of the noise-event lower bound.

    ``q1n = 1 - 2 exp(-CK (n delta)^{1/3} + log p1)`` and
    ``q2n = 1 - p1^{-eta0}``.  Values below zero mean the bound is vacuous.
    """
    q1 = 1.0 - 2.0 * np.exp(-CK * (n * delta) ** (1 / 3) + np.log(p1))
    q2 = 1.0 - p1 ** (-eta0)
    return float(q1), float(q2)


def psi_norm_estimate(samples, kind: str = "psi2", qmax: int = 10) -> float:
    """Moment-growth estimate of a psi_2 or psi_1 norm.

    ``max_{q=1..qmax} q^{-a} (mean |x|^q)^{1/q}`` with a = 1/2 for psi_2 and
    a = 1 for psi_1.  Truncating at qmax biases the estimate downwards.
    """
    x = np.abs(np.asarray(samples, dtype=float).ravel())
    if x.size < 10_000:
        raise DomainError(f"need at least 1e4 samples, got {x.size}")
    if qmax < 2:
        raise DomainError("qmax must be at least 2")
    if kind not in ("psi1", "psi2"):
        raise DomainError(f"kind must be 'psi1' or 'psi2', got {kind!r}")
    top = x.max()
    if top == 0:
        return 0.0
    y = x / top
    a = 0.5 if kind == "psi2" else 1.0
    best = 0.0
    for q in range(1, qmax + 1):
        root = top * np.mean(y**q) ** (1.0 / q)
        best = max(best, root / q**a)
    return float(best)


@dataclass(frozen=True)
class REProbe:
    u: np.ndarray
    W: np.ndarray
    rho_hat: float
    psi1_hat: float
    n_mc: int


def weight_matrix(u2: np.ndarray, p: int) -> np.ndarray:
    """Symmetric p x p matrix with w_jk = w_kj from the interaction part of u."""
    W = np.zeros((p, p))
    pa = InteractionIndex(p).pair_array
    W[pa[:, 0], pa[:, 1]] = u2
    return W + W.T


def re_probe(u, dist: DesignDistribution, n_mc: int, seed=None) -> REProbe:
    """Estimate the correlation between the linear and quadratic parts of Z'u.

    ``Z'u = X'u1 + X'WX / 2``.  Returns the Monte Carlo correlation of
    ``X'u1`` and ``X'WX`` (zero by definition when either part of u is zero)
    and the psi_1 estimate of ``X'WX`` scaled to unit variance.
    """
    u = np.asarray(u, dtype=float)
    p1 = u.size
    p = int(round((np.sqrt(8 * p1 + 1) - 1) / 2))
    if p * (p + 1) // 2 != p1:
        raise DomainError(f"length {p1} is not p(p+1)/2")
    if abs(np.linalg.norm(u) - 1) > 1e-9:
        raise DomainError("u must have unit Euclidean norm")
    u1, u2 = u[:p], u[p:]
    W = weight_matrix(u2, p)
    if not np.any(u2):
        return REProbe(u, W, 0.0, 0.0, n_mc)
    X = gen_design(n_mc, p, dist, seed)
    quad = 2.0 * (_expand(X)[:, p:] @ u2)  # X'WX
    sd = quad.std()
    psi1 = psi_norm_estimate(quad / sd, "psi1") if sd > 0 else 0.0
    rho = 0.0
    if np.any(u1):
        rho = float(np.corrcoef(X @ u1, quad)[0, 1])
    return REProbe(u, W, rho, psi1, n_mc)


@dataclass(frozen=True)
class ConcentrationReport:
    delta: float
    n: np.ndarray
    exceed: np.ndarray
    trials: int
    slope: float
    intercept: float

    @property
    def frequency(self) -> np.ndarray:
        return self.exceed / self.trials

    @property
    def std_error(self) -> np.ndarray:
        f = self.frequency
        return np.sqrt(f * (1 - f) / self.trials)

    def rows(self):
        for n, k, f, se in zip(self.n, self.exceed, self.frequency, self.std_error):
            yield {"n": int(n), "exceed": int(k), "frequency": float(f), "std_error": float(se)}


def centered_exponential(rng: np.random.Generator, size) -> np.ndarray:
    return rng.exponential(1.0, size) - 1.0


def concentration_squares_check(
    sampler=centered_exponential,
    n_list=(100, 1000, 10_000),
    delta: float = 0.5,
    trials: int = 2000,
    seed=None,
    variance: float = 1.0,
    chunk: int = 4_000_000,
) -> ConcentrationReport:
    """Tail frequencies of ``|mean(Z_i^2) - var(Z)| > delta`` across sample sizes.

    ``sampler(rng, shape)`` draws centred values with variance ``variance``.
    The log-frequency is regressed on ``(n delta)^{1/3}``; zero counts use
    the continuity correction ``(k + 1/2) / (trials + 1)``.
    """
    if not delta > 0:
        raise DomainError("delta must be positive")
    rng = _rng(seed)
    ns = np.asarray(n_list, dtype=int)
    exceed = np.zeros(ns.size, dtype=int)
    for i, n in enumerate(ns):
        per = max(1, chunk // n)
        done = 0
        while done < trials:
            m = min(per, trials - done)
            Z = sampler(rng, (m, n))
            exceed[i] += int(np.sum(np.abs(np.mean(Z * Z, axis=1) - variance) > delta))
            done += m
    freq = (exceed + 0.5) / (trials + 1)
    x = (ns * delta) ** (1 / 3)
    slope, intercept = np.polyfit(x, np.log(freq), 1) if ns.size > 1 else (np.nan, np.nan)
    return ConcentrationReport(delta, ns, exceed, trials, float(slope), float(intercept))
