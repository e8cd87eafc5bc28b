"""Restricted eigenvalue estimation and the RE sample-size formula.

The restricted eigenvalue constant of a design Z is::

    M(k0, s) = min_{|J| <= s}  min_{||a_{J^c}||_1 <= k0 ||a_J||_1}  ||Z a||_2 / (sqrt(n) ||a_J||_2)

Computing it exactly is intractable in general.  :func:`re_constant` runs
multi-start projected gradient descent on the cone and reports the smallest
ratio it finds.  That value is an upper bound on M.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from ..design import DesignMatrix, DomainError
from ..prox import project_l1_ball_rows
from .sampling import _rng

METHODS = ("exhaustive_supports", "random_cone_descent")


@dataclass(frozen=True)
class REEstimate:
    k0: float
    s: int
    M_hat: float
    minimizer: np.ndarray
    support: tuple
    method: str
    samples: int
    note: str = "upper bound on M(k0, s): smallest ratio found by multi-start descent"

    def in_cone(self, tol: float = 1e-9) -> bool:
        J = np.zeros(self.minimizer.size, dtype=bool)
        J[list(self.support)] = True
        a = self.minimizer
        return np.abs(a[~J]).sum() <= self.k0 * np.abs(a[J]).sum() + tol


def re_ratio(Z, alpha, support) -> float:
    """``||Z alpha|| / (sqrt(n) ||alpha_J||)`` for a given support J."""
    Zv = Z.values if isinstance(Z, DesignMatrix) else np.asarray(Z, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    aJ = alpha[list(support)]
    return float(np.linalg.norm(Zv @ alpha) / (np.sqrt(Zv.shape[0]) * np.linalg.norm(aJ)))


def _cone_project(A: np.ndarray, M: np.ndarray, k0: float) -> np.ndarray:
    """Map rows onto the cone with ||a_J||_2 = 1."""
    a = np.where(M, A, 0.0)
    na = np.linalg.norm(a, axis=1)
    dead = na == 0
    if np.any(dead):
        a[dead] = M[dead] / np.sqrt(M[dead].sum(axis=1, keepdims=True))
        na[dead] = 1.0
    a /= na[:, None]
    b = np.where(M, 0.0, A)
    b = project_l1_ball_rows(b, k0 * np.abs(a).sum(axis=1))
    return a + b


def _descend(G, masks, starts, k0, iters):
    L = 2.0 * max(np.linalg.eigvalsh(G)[-1], 1e-300)
    A = _cone_project(starts, masks, k0)
    f = np.einsum("ij,jk,ik->i", A, G, A)
    best_f, best_A = f.copy(), A.copy()
    for _ in range(iters):
        A = _cone_project(A - (2.0 / L) * (A @ G), masks, k0)
        f = np.einsum("ij,jk,ik->i", A, G, A)
        better = f < best_f
        best_f[better] = f[better]
        best_A[better] = A[better]
    return best_f, best_A


def re_constant(
    Z,
    s: int,
    k0: float,
    method: str = "random_cone_descent",
    budget: int = 200,
    seed=None,
    iters: int = 500,
    batch: int = 512,
) -> REEstimate:
    """Estimate M(k0, s) from above.

    Parameters
    ----------
    Z : DesignMatrix or ndarray (n, m)
    s : int
        Support size; only |J| = s is searched, since enlarging J both widens
        the cone and shrinks the ratio.
    k0 : float
        Cone constant.
    method : {"exhaustive_supports", "random_cone_descent"}
        Exhaustive enumeration of supports needs m <= 30 and s <= 2; there
        ``budget`` is the number of random starts per support.  With random
        descent ``budget`` supports are drawn uniformly, one random start
        each.  Every support also gets a deterministic start: the smallest
        eigenvector of the J-block of the Gram matrix.
    """
    Zv = Z.values if isinstance(Z, DesignMatrix) else np.asarray(Z, dtype=float)
    n, m = Zv.shape
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}")
    if budget < 1:
        raise DomainError("budget must be at least 1")
    if not (1 <= s <= m) or not k0 > 0:
        raise DomainError("need 1 <= s <= number of columns and k0 > 0")
    rng = _rng(seed)
    G = Zv.T @ Zv / n

    if method == "exhaustive_supports":
        if m > 30 or s > 2:
            raise DomainError("exhaustive search is limited to 30 columns and s <= 2")
        supports = list(combinations(range(m), s))
        n_rand = budget
    else:
        total = comb(m, s)
        if budget >= total:
            supports = list(combinations(range(m), s))
        else:
            supports = [tuple(sorted(rng.choice(m, size=s, replace=False))) for _ in range(budget)]
        n_rand = 1

    rows_J, rows_start = [], []
    for J in supports:
        J = list(J)
        w, V = np.linalg.eigh(G[np.ix_(J, J)])
        det = np.zeros(m)
        det[J] = V[:, 0]
        rows_J.append(J)
        rows_start.append(det)
        for _ in range(n_rand):
            st = rng.standard_normal(m)
            st[J] = rng.standard_normal(s)
            # random point inside the cone
            out = np.setdiff1d(np.arange(m), J)
            st[out] *= rng.uniform() * k0 * np.abs(st[J]).sum() / max(np.abs(st[out]).sum(), 1e-300)
            rows_J.append(J)
            rows_start.append(st)

    best = (np.inf, None, None)
    for lo in range(0, len(rows_J), batch):
        Js = rows_J[lo:lo + batch]
        masks = np.zeros((len(Js), m), dtype=bool)
        for r, J in enumerate(Js):
            masks[r, J] = True
        f, A = _descend(G, masks, np.array(rows_start[lo:lo + batch]), k0, iters)
        i = int(np.argmin(f))
        if f[i] < best[0]:
            best = (f[i], A[i], tuple(Js[i]))
    f, alpha, J = best
    return REEstimate(
        k0=float(k0),
        s=int(s),
        M_hat=re_ratio(Zv, alpha, J),
        minimizer=alpha,
        support=J,
        method=method,
        samples=len(rows_J),
    )


def epsilon_limit(lam_min_z: float, lam_max_z: float) -> float:
    """Largest admissible epsilon: sqrt(lmin) / (8 sqrt(lmax) + sqrt(lmin))."""
    a, b = np.sqrt(lam_min_z), np.sqrt(lam_max_z)
    return float(a / (8 * b + a))


def re_sample_size(
    s: int,
    k0: float,
    p1: int,
    eps: float,
    c1: float = 1.0,
    C1: float = 1.0,
    CK_tilde: float = 1.0,
) -> float:
    """Sample size above which the RE condition holds with high probability.

    ``eps^-1 max{C1, (c1 m1 log(c1 m1 p1) / CK)^3, (c1 m1 log(4 c1 m1 p1) / (4 CK))^3}``
    with ``m1 = 16 s (1 + k0)^2``.  The admissible range of ``eps`` depends on
    the eigenvalues of cov(Z) (see :func:`epsilon_limit`) and is the caller's
    responsibility.  The constants are unspecified; the value holds only up to
    them.
    """
    for name, v in (("s", s), ("k0", k0), ("p1", p1), ("eps", eps), ("c1", c1), ("C1", C1), ("CK_tilde", CK_tilde)):
        if not v > 0:
            raise DomainError(f"{name} must be positive, got {v}")
    m1 = sample_size_m1(s, k0)
    t2 = (c1 * m1 / CK_tilde * np.log(c1 * m1 * p1)) ** 3
    t3 = (0.25 / CK_tilde * c1 * m1 * np.log(4 * c1 * m1 * p1)) ** 3
    return float(max(C1, t2, t3) / eps)


def sample_size_m1(s: int, k0: float) -> float:
    return 16.0 * s * (1.0 + k0) ** 2
