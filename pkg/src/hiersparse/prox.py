"""Proximal operators for the norms that make up the penalties.

Each norm kind is identified by a short string:

``"l1"``
    sum of absolute values
``"lq"``
    the l_q norm, ``q`` in (1, inf]
``"max_abs_l1"``
    ``max(|x[0]|, ||x[1:]||_1)``

``prox_atom(kind, v, t)`` returns ``argmin_x 0.5 ||x - v||^2 + t * norm(x)``.
Kinds without a closed form go through the Moreau decomposition
``prox(v) = v - proj_{t * dual ball}(v)``.
"""
from __future__ import annotations

import numpy as np

from .design import DomainError

BISECT_TOL = 1e-10
_MAX_BISECT = 200


def norm(kind: str, x: np.ndarray, q: float = 2.0) -> float:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    if kind == "l1":
        return float(np.abs(x).sum())
    if kind == "lq":
        return float(np.linalg.norm(x, ord=q))
    if kind == "max_abs_l1":
        return float(max(abs(x[0]), np.abs(x[1:]).sum()))
    raise DomainError(f"unknown norm kind {kind!r}")


def dual_exponent(q: float) -> float:
    if q == np.inf:
        return 1.0
    if q == 1:
        return np.inf
    return q / (q - 1.0)


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def project_l1_ball(v: np.ndarray, r: float) -> np.ndarray:
    """Euclidean projection onto ``{x : ||x||_1 <= r}`` (sort-based)."""
    a = np.abs(v)
    if a.sum() <= r:
        return v.copy()
    if r <= 0:
        return np.zeros_like(v)
    u = np.sort(a)[::-1]
    css = np.cumsum(u) - r
    k = np.nonzero(u * np.arange(1, u.size + 1) > css)[0][-1]
    tau = css[k] / (k + 1.0)
    return np.sign(v) * np.maximum(a - tau, 0.0)


def project_l1_ball_rows(V: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Row-wise projection of ``V`` onto l1 balls of radii ``r`` (one per row)."""
    A = np.abs(V)
    r = np.maximum(np.asarray(r, dtype=float), 0.0)
    inside = A.sum(axis=1) <= r
    U = -np.sort(-A, axis=1)
    css = np.cumsum(U, axis=1) - r[:, None]
    ks = np.arange(1, V.shape[1] + 1)
    cond = U * ks > css
    # last index where cond holds; cond is a prefix of True values
    k = cond.sum(axis=1) - 1
    k = np.maximum(k, 0)
    tau = css[np.arange(V.shape[0]), k] / (k + 1.0)
    out = np.sign(V) * np.maximum(A - tau[:, None], 0.0)
    out[inside] = V[inside]
    return out


def _bisect(f, lo, hi):
    """Root of an increasing scalar function on [lo, hi]."""
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= BISECT_TOL * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def project_lr_ball(v: np.ndarray, radius: float, r: float) -> np.ndarray:
    """Euclidean projection onto the l_r ball of the given radius, 1 < r < inf.

    Stationarity gives ``x_i = sign(v_i) y_i`` with
    ``y_i + mu * r * y_i**(r-1) = |v_i|``; the multiplier ``mu`` is found by
    bisection so that ``||y||_r = radius``.  The inner scalar equations are
    solved together by vectorised bisection.
    """
    a = np.abs(v)
    if np.linalg.norm(a, ord=r) <= radius:
        return v.copy()
    if radius <= 0:
        return np.zeros_like(v)

    def y_of(mu):
        lo = np.zeros_like(a)
        hi = a.copy()
        for _ in range(_MAX_BISECT):
            mid = 0.5 * (lo + hi)
            over = mid + mu * r * mid ** (r - 1.0) > a
            hi = np.where(over, mid, hi)
            lo = np.where(over, lo, mid)
            # relative per entry, so tiny radii still resolve
            if np.all(hi - lo <= BISECT_TOL * hi):
                break
        return 0.5 * (lo + hi)

    # ||y(mu)||_r decreases in mu; bracket then bisect on log(mu)
    hi = 1.0
    while hi < 1e300 and np.linalg.norm(y_of(hi), ord=r) > radius:
        hi *= 4.0
    lo = hi / 4.0
    while lo > 1e-300 and np.linalg.norm(y_of(lo), ord=r) < radius:
        lo /= 4.0
    mu = _bisect(lambda m: radius - np.linalg.norm(y_of(m), ord=r), lo, hi)
    return np.sign(v) * y_of(mu)


def project_dual_ball(kind: str, v: np.ndarray, radius: float, q: float = 2.0) -> np.ndarray:
    """Projection onto ``radius`` times the unit ball of the dual norm of ``kind``."""
    v = np.asarray(v, dtype=float)
    if kind == "l1":
        return np.clip(v, -radius, radius)
    if kind == "lq":
        r = dual_exponent(q)
        if r == 1.0:
            return project_l1_ball(v, radius)
        if r == 2.0:
            nv = np.linalg.norm(v)
            return v if nv <= radius else v * (radius / nv)
        if r == np.inf:
            return np.clip(v, -radius, radius)
        return project_lr_ball(v, radius, r)
    if kind == "max_abs_l1":
        return _project_abs_plus_linf(v, radius)
    raise DomainError(f"unknown norm kind {kind!r}")


def _project_abs_plus_linf(v: np.ndarray, radius: float) -> np.ndarray:
    """Projection onto ``{(a, b) : |a| + ||b||_inf <= radius}``.

    The ball is the union over splits ``radius = r0 + r1`` of boxes, so the
    projection clips ``a`` to ``r0`` and ``b`` to ``r1``.  The squared
    distance is convex in ``r1``; its derivative is bisected.
    """
    a0 = abs(v[0])
    b = np.abs(v[1:])
    if a0 + (b.max() if b.size else 0.0) <= radius:
        return v.copy()
    if b.size == 0:
        return np.clip(v, -radius, radius)

    def dist_grad(r1):
        return max(a0 - (radius - r1), 0.0) - np.maximum(b - r1, 0.0).sum()

    if dist_grad(0.0) >= 0:
        r1 = 0.0
    elif dist_grad(radius) <= 0:
        r1 = radius
    else:
        r1 = _bisect(dist_grad, 0.0, radius)
    out = np.empty_like(v)
    out[0] = np.clip(v[0], -(radius - r1), radius - r1)
    out[1:] = np.clip(v[1:], -r1, r1)
    return out


def prox_atom(kind: str, v, t: float, q: float = 2.0) -> np.ndarray:
    """Proximal map of ``t * norm_kind`` at ``v``."""
    if not t > 0:
        raise DomainError(f"prox step must be positive, got {t}")
    v = np.asarray(v, dtype=float)
    if kind == "l1":
        return soft_threshold(v, t)
    if kind == "lq" and q == 2.0:
        nv = np.linalg.norm(v)
        if nv <= t:
            return np.zeros_like(v)
        return v * (1.0 - t / nv)
    return v - project_dual_ball(kind, v, t, q)
