"""Two-way interaction designs.

Main effects are labelled 1..p and pairs (j, k) with j < k.  Flat column
labels run 1..p1 with p1 = p(p+1)/2: main effects first, then the pairs in
lexicographic order (1,2), (1,3), ..., (1,p), (2,3), ..., (p-1,p).  Numpy
arrays are indexed from zero, so column label ``c`` lives at ``Z[:, c - 1]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class DataError(ValueError):
    """Input data that cannot be used (non-finite, mis-shaped)."""


@dataclass(frozen=True)
class InteractionIndex:
    p: int

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise DomainError(f"p must be a positive integer, got {self.p!r}")

    @property
    def p1(self) -> int:
        return self.p * (self.p + 1) // 2

    @property
    def n_pairs(self) -> int:
        return self.p1 - self.p

    def pair_to_column(self, j: int, k: int) -> int:
        p = self.p
        if not (1 <= j < k <= p):
            raise DomainError(f"need 1 <= j < k <= {p}, got ({j}, {k})")
        return p + (j - 1) * (2 * p - j) // 2 + (k - j)

    def column_to_pair(self, col: int) -> tuple[int, int]:
        p = self.p
        if not (p < col <= self.p1):
            raise DomainError(f"column {col} is not an interaction column for p={p}")
        return self.pairs[col - p - 1]

    @cached_property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple((j, k) for j in range(1, self.p + 1) for k in range(j + 1, self.p + 1))

    @cached_property
    def pair_array(self) -> np.ndarray:
        """(n_pairs, 2) array of zero-based main positions for each pair column."""
        if not self.pairs:
            return np.zeros((0, 2), dtype=int)
        return np.asarray(self.pairs, dtype=int) - 1

    def row_columns(self, j: int) -> np.ndarray:
        """Zero-based positions of every interaction column involving main effect ``j``.

        Ordered as the row ``(theta_jk : k > j, theta_kj : k < j)``.
        """
        later = [self.pair_to_column(j, k) - 1 for k in range(j + 1, self.p + 1)]
        earlier = [self.pair_to_column(k, j) - 1 for k in range(1, j)]
        return np.asarray(later + earlier, dtype=int)

    def split(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (main, interaction) parts of a flat coefficient vector."""
        theta = np.asarray(theta)
        if theta.shape != (self.p1,):
            raise DomainError(f"expected a vector of length {self.p1}, got shape {theta.shape}")
        return theta[: self.p], theta[self.p:]


@dataclass(frozen=True)
class SupportSet:
    main: frozenset = frozenset()
    pairs: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "main", frozenset(int(j) for j in self.main))
        object.__setattr__(self, "pairs", frozenset((int(j), int(k)) for j, k in self.pairs))
        for j, k in self.pairs:
            if not (1 <= j < k):
                raise DomainError(f"invalid pair ({j}, {k}); need 1 <= j < k")
        if any(j < 1 for j in self.main):
            raise DomainError("main effect labels start at 1")

    @property
    def s(self) -> int:
        return len(self.main) + len(self.pairs)

    def columns(self, idx: InteractionIndex) -> np.ndarray:
        """Sorted zero-based column positions of the support."""
        if any(j > idx.p for j in self.main) or any(k > idx.p for _, k in self.pairs):
            raise DomainError(f"support does not fit p={idx.p}")
        cols = [j - 1 for j in self.main] + [idx.pair_to_column(j, k) - 1 for j, k in self.pairs]
        return np.asarray(sorted(cols), dtype=int)

    def mask(self, idx: InteractionIndex) -> np.ndarray:
        m = np.zeros(idx.p1, dtype=bool)
        m[self.columns(idx)] = True
        return m

    @classmethod
    def from_columns(cls, cols, idx: InteractionIndex) -> SupportSet:
        """Build from zero-based column positions."""
        main, pairs = [], []
        for c in np.asarray(cols, dtype=int).ravel():
            if c < idx.p:
                main.append(c + 1)
            else:
                pairs.append(idx.column_to_pair(c + 1))
        return cls(frozenset(main), frozenset(pairs))

    def to_dict(self) -> dict:
        return {"main": sorted(self.main), "pairs": [list(pr) for pr in sorted(self.pairs)]}

    @classmethod
    def from_dict(cls, d: dict) -> SupportSet:
        return cls(frozenset(d.get("main", ())), frozenset(tuple(pr) for pr in d.get("pairs", ())))


def pair_to_column(j: int, k: int, idx: InteractionIndex) -> int:
    return idx.pair_to_column(j, k)


def column_to_pair(col: int, idx: InteractionIndex) -> tuple[int, int]:
    return idx.column_to_pair(col)


def hierarchy_check(S: SupportSet) -> bool:
    """True when every selected pair has both of its main effects selected."""
    return all(j in S.main and k in S.main for j, k in S.pairs)


def hierarchy_closure(S: SupportSet) -> SupportSet:
    """Smallest hierarchical superset of ``S`` (adds the parents of every pair)."""
    parents = {j for pr in S.pairs for j in pr}
    return SupportSet(S.main | parents, S.pairs)


@dataclass(frozen=True)
class DesignMatrix:
    """Expanded design ``Z = (X, X*)`` together with its preprocessing record.

    ``means`` and ``scales`` are empty arrays when the corresponding step was
    not applied.  ``transform`` replays the same preprocessing on new rows.
    """

    values: np.ndarray
    index: InteractionIndex
    means: np.ndarray = field(default_factory=lambda: np.zeros(0))
    scales: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p1(self) -> int:
        return self.index.p1

    @property
    def centered(self) -> bool:
        return self.means.size > 0

    def transform(self, X: np.ndarray) -> np.ndarray:
        Z = _raw_expand(_as_design_input(X, self.index.p))
        if self.centered:
            Z = Z - self.means
        if self.scales.size:
            Z = Z / self.scales
        return Z


def _as_design_input(X, p=None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DataError(f"X must be a 2-d array, got {X.ndim} dimensions")
    if p is not None and X.shape[1] != p:
        raise DataError(f"expected {p} main-effect columns, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise DataError("X contains non-finite entries")
    return X


def _raw_expand(X: np.ndarray) -> np.ndarray:
    p = X.shape[1]
    idx = InteractionIndex(p)
    pa = idx.pair_array
    return np.hstack([X, X[:, pa[:, 0]] * X[:, pa[:, 1]]])


def expand_design(X, center: bool = False, standardize: bool = False) -> DesignMatrix:
    """Expand main effects ``X`` (n x p) into the interaction design (n x p1).

    With ``center`` the empirical mean of every one of the p1 columns is
    subtracted after forming the products.  ``standardize`` additionally
    rescales columns to unit empirical variance; constant columns are left
    unscaled.
    """
    X = _as_design_input(X)
    n, p = X.shape
    if n < 1 or p < 2:
        raise DomainError(f"need n >= 1 and p >= 2, got n={n}, p={p}")
    Z = _raw_expand(X)
    means = np.zeros(0)
    scales = np.zeros(0)
    if center:
        means = Z.mean(axis=0)
        Z = Z - means
    if standardize:
        sd = Z.std(axis=0)
        scales = np.where(sd > 0, sd, 1.0)
        Z = Z / scales
    return DesignMatrix(Z, InteractionIndex(p), means, scales)
