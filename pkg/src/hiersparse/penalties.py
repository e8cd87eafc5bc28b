"""Hierarchy-respecting penalties for two-way interaction models.

Six families are supported:

========================  ===============================================
``lasso``                 ``||theta||_1``
``cap``                   sum_j ||(theta_j, row_j)||_q + sum_{j<k} |theta_jk|
``bien``                  sum_j max(|theta_j|, ||row_j||_1) + sum |theta_jk|
``pairwise``              (p-1)^-1 sum_{j<k} (||(theta_j, theta_jk)||_q
                          + ||(theta_k, theta_jk)||_q) + sum |theta_jk|
``block``                 sum_{j>=d0} (||G_j||_q + ||H_j||_1 / 2), contiguous
                          windows of d0 main effects and all their rows
``nested``                sum_j (||(theta_j, H~_j)||_q + ||H~_j||_1),
                          H~_j = (theta_kj : k < j)
========================  ===============================================

``row_j`` is the vector of every interaction coefficient involving main
effect ``j``.  ``evaluate`` computes the formulas directly; ``atoms`` gives
the same value as a weighted sum of simple norms, which is what the solver
works with.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .design import DomainError, InteractionIndex, SupportSet, hierarchy_check
from .prox import norm

FAMILIES = ("lasso", "cap", "bien", "pairwise", "block", "nested")
_ALIASES = {
    "l1": "lasso",
    "vanish": "cap",
    "bienmaxl1": "bien",
    "max_l1": "bien",
    "pairwisegroup": "pairwise",
    "contiguousblock": "block",
    "contiguous": "block",
}
_GROUPED = {"cap", "pairwise", "block", "nested"}

# identities are checked to 1e-9 absolute plus 1e-10 relative
ABS_TOL = 1e-9
REL_TOL = 1e-10


@dataclass(frozen=True)
class PenaltySpec:
    family: str
    q: float = 2.0
    d0: int = 1

    def __post_init__(self):
        fam = _ALIASES.get(self.family.lower(), self.family.lower())
        if fam not in FAMILIES:
            raise DomainError(f"unknown penalty family {self.family!r}")
        object.__setattr__(self, "family", fam)
        q = float(self.q)
        object.__setattr__(self, "q", q)
        if fam in _GROUPED and not q > 1:
            raise DomainError(f"q must exceed 1 for {fam}, got {q}")
        if int(self.d0) != self.d0 or self.d0 < 1:
            raise DomainError(f"d0 must be a positive integer, got {self.d0}")
        object.__setattr__(self, "d0", int(self.d0))

    def bind(self, p: int) -> None:
        if p < 2:
            raise DomainError(f"penalties need p >= 2, got {p}")
        if self.family == "block" and self.d0 > p:
            raise DomainError(f"d0={self.d0} exceeds p={p}")

    def label(self) -> str:
        if self.family in ("lasso", "bien"):
            return self.family
        q = "inf" if self.q == np.inf else f"{self.q:g}"
        if self.family == "block":
            return f"block:q={q},d0={self.d0}"
        return f"{self.family}:q={q}"

    def to_dict(self) -> dict:
        d = {"family": self.family}
        if self.family in _GROUPED:
            d["q"] = "inf" if self.q == np.inf else self.q
        if self.family == "block":
            d["d0"] = self.d0
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> PenaltySpec:
        q = d.get("q", 2.0)
        q = np.inf if str(q).lower() in ("inf", "infinity") else float(q)
        return cls(d["family"], q, int(d.get("d0", 1)))

    @classmethod
    def from_json(cls, s: str) -> PenaltySpec:
        return cls.from_dict(json.loads(s))

    @classmethod
    def parse(cls, text: str) -> PenaltySpec:
        """Parse the command-line form, e.g. ``cap:q=2`` or ``block:q=2,d0=3``."""
        name, _, rest = text.strip().partition(":")
        params = {}
        for item in filter(None, re.split(r"\s*,\s*", rest)):
            key, eq, val = item.partition("=")
            if not eq:
                raise DomainError(f"malformed penalty parameter {item!r}")
            params[key.strip()] = val.strip()
        unknown = set(params) - {"q", "d0"}
        if unknown:
            raise DomainError(f"unknown penalty parameters {sorted(unknown)}")
        return cls.from_dict({"family": name, **params})


@dataclass(frozen=True)
class Atom:
    """One additive term ``weight * norm_kind(theta[indices])``.

    ``indices`` are zero-based and may repeat: a coordinate that occurs twice
    in a group is counted twice by the norm.  For ``max_abs_l1`` the first
    index is the main effect.
    """

    indices: tuple
    weight: float
    kind: str
    q: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "weight", float(self.weight))

    def value(self, theta: np.ndarray) -> float:
        return self.weight * norm(self.kind, theta[list(self.indices)], self.q)


@dataclass(frozen=True)
class AtomList:
    atoms: tuple
    index: InteractionIndex = field(compare=False)

    def __iter__(self):
        return iter(self.atoms)

    def __len__(self):
        return len(self.atoms)

    def value(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        return float(sum(a.value(theta) for a in self.atoms))

    def coverage(self) -> np.ndarray:
        """How many latent copies each column receives."""
        counts = np.zeros(self.index.p1, dtype=int)
        for a in self.atoms:
            np.add.at(counts, list(a.indices), 1)
        return counts


@dataclass(frozen=True)
class A3Constants:
    L1: float
    L2: float


def _check_theta(theta, idx: InteractionIndex) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (idx.p1,):
        raise DomainError(f"theta must have length p1={idx.p1}, got shape {theta.shape}")
    return theta


def _qnorm(x, q):
    return np.linalg.norm(x, ord=q)


def evaluate(spec: PenaltySpec, theta, idx: InteractionIndex) -> float:
    """Value of the penalty at ``theta`` (length p1)."""
    spec.bind(idx.p)
    theta = _check_theta(theta, idx)
    p, q = idx.p, spec.q
    main, inter = idx.split(theta)
    inter_l1 = np.abs(inter).sum()
    fam = spec.family

    if fam == "lasso":
        return float(np.abs(theta).sum())
    if fam == "cap":
        total = sum(_qnorm(np.r_[main[j - 1], theta[idx.row_columns(j)]], q) for j in range(1, p + 1))
        return float(total + inter_l1)
    if fam == "bien":
        total = sum(max(abs(main[j - 1]), np.abs(theta[idx.row_columns(j)]).sum()) for j in range(1, p + 1))
        return float(total + inter_l1)
    if fam == "pairwise":
        total = 0.0
        for (j, k), t in zip(idx.pairs, inter):
            total += _qnorm([main[j - 1], t], q) + _qnorm([main[k - 1], t], q)
        return float(total / (p - 1) + inter_l1)
    if fam == "block":
        d0 = spec.d0
        total = 0.0
        for j in range(d0, p + 1):
            window = range(j - d0 + 1, j + 1)
            H = np.concatenate([theta[idx.row_columns(k)] for k in window])
            G = np.r_[main[[k - 1 for k in window]], H]
            total += _qnorm(G, q) + 0.5 * np.abs(H).sum()
        return float(total)
    if fam == "nested":
        total = 0.0
        for j in range(1, p + 1):
            Ht = np.array([theta[idx.pair_to_column(k, j) - 1] for k in range(1, j)])
            total += _qnorm(np.r_[main[j - 1], Ht], q) + np.abs(Ht).sum()
        return float(total)
    raise AssertionError(fam)


def atoms(spec: PenaltySpec, idx: InteractionIndex) -> AtomList:
    """Additive decomposition of the penalty into weighted simple norms.

    All l1 pieces are pooled into per-column weights and re-emitted as one
    l1 atom per distinct weight, so equivalent penalties share a canonical
    form (``block`` with ``d0 = 1`` gives exactly the ``cap`` atoms).
    """
    spec.bind(idx.p)
    p, q = idx.p, spec.q
    inter_cols = np.arange(p, idx.p1)
    l1_weight = np.zeros(idx.p1)
    out = []
    fam = spec.family

    if fam == "lasso":
        l1_weight[:] = 1.0
    elif fam == "cap":
        for j in range(1, p + 1):
            out.append(Atom(tuple(sorted([j - 1, *idx.row_columns(j)])), 1.0, "lq", q))
        l1_weight[inter_cols] += 1.0
    elif fam == "bien":
        for j in range(1, p + 1):
            out.append(Atom((j - 1, *sorted(idx.row_columns(j))), 1.0, "max_abs_l1"))
        l1_weight[inter_cols] += 1.0
    elif fam == "pairwise":
        w = 1.0 / (p - 1)
        for (j, k), c in zip(idx.pairs, inter_cols):
            out.append(Atom((j - 1, int(c)), w, "lq", q))
            out.append(Atom((k - 1, int(c)), w, "lq", q))
        l1_weight[inter_cols] += 1.0
    elif fam == "block":
        d0 = spec.d0
        for j in range(d0, p + 1):
            window = range(j - d0 + 1, j + 1)
            H = np.concatenate([idx.row_columns(k) for k in window]).astype(int)
            G = sorted([k - 1 for k in window] + list(H))
            out.append(Atom(tuple(int(c) for c in G), 1.0, "lq", q))
            np.add.at(l1_weight, H, 0.5)
    elif fam == "nested":
        for j in range(1, p + 1):
            Ht = [idx.pair_to_column(k, j) - 1 for k in range(1, j)]
            out.append(Atom(tuple(sorted([j - 1, *Ht])), 1.0, "lq", q))
            l1_weight[Ht] += 1.0

    for w in np.unique(l1_weight[l1_weight > 0]):
        cols = np.nonzero(l1_weight == w)[0]
        out.append(Atom(tuple(int(c) for c in cols), float(w), "l1"))
    return AtomList(tuple(out), idx)


def a3_constants(spec: PenaltySpec, p: int) -> A3Constants:
    """Sandwich constants (L1, L2) declared for each family.

    These are the published values.  ``pairwise`` and ``block`` with
    ``d0 > 1`` do not satisfy them for every theta; see
    :func:`a3_constants_sharp` and the README.
    """
    if p < 2:
        raise DomainError(f"need p >= 2, got {p}")
    fam = spec.family
    if fam == "lasso":
        return A3Constants(1.0, 1.0)
    if fam in ("cap", "bien"):
        return A3Constants(1.0, 3.0)
    if fam == "pairwise":
        return A3Constants(1.0, 1.0 + 1.0 / (p - 1))
    if fam == "block":
        return A3Constants(1.0, 3.0 * spec.d0)
    if fam == "nested":
        return A3Constants(1.0, 2.0)
    raise AssertionError(fam)


def a3_constants_sharp(spec: PenaltySpec, p: int) -> A3Constants | None:
    """Constants that hold for every theta, or ``None`` when no L1 > 1/2 exists.

    ``pairwise``: an interaction sits in two groups of weight (p-1)^-1 plus
    the l1 term, so L2 = 1 + 2/(p-1).  ``block`` with d0 > 1: a main effect
    outside the support can share every window with a large in-support main
    effect, and the l_q norm grows only quadratically in it, so the lower
    bound fails for every positive L1.
    """
    fam = spec.family
    if fam == "pairwise":
        return A3Constants(1.0, 1.0 + 2.0 / (p - 1))
    if fam == "block" and spec.d0 > 1:
        return None
    return a3_constants(spec, p)


@dataclass(frozen=True)
class A3Check:
    subadditive: bool
    lower: bool
    upper: bool
    slacks: dict

    @property
    def ok(self) -> bool:
        return self.subadditive and self.lower and self.upper


def check_a3(
    spec: PenaltySpec,
    theta,
    S: SupportSet,
    idx: InteractionIndex,
    split=None,
    constants: A3Constants | None = None,
    tol: float = ABS_TOL,
) -> A3Check:
    """Check the sandwich inequalities at ``theta`` against support ``S``.

    * lower:  Pe(theta) >= Pe(theta_S) + L1 ||theta_{S^c}||_1
    * upper:  Pe(theta_S) <= L2 ||theta_S||_1
    * subadditive: Pe(a + b) <= Pe(a) + Pe(b) with ``a = split`` and
      ``b = theta - split`` (default ``a = theta_S``)

    Slacks are reported so that a nonnegative slack means the inequality
    holds.
    """
    if not hierarchy_check(S):
        raise DomainError("check_a3 requires a hierarchical support")
    theta = _check_theta(theta, idx)
    c = constants or a3_constants(spec, idx.p)
    mask = S.mask(idx)
    theta_S = np.where(mask, theta, 0.0)
    off_l1 = np.abs(theta[~mask]).sum()
    on_l1 = np.abs(theta_S).sum()
    pe = evaluate(spec, theta, idx)
    pe_S = evaluate(spec, theta_S, idx)

    a = theta_S if split is None else _check_theta(split, idx)
    b = theta - a
    pe_a = pe_S if split is None else evaluate(spec, a, idx)
    pe_b = evaluate(spec, b, idx)

    def slack_tol(*vals):
        return tol + REL_TOL * max(abs(v) for v in vals)

    slacks = {
        "lower": pe - pe_S - c.L1 * off_l1,
        "upper": c.L2 * on_l1 - pe_S,
        "subadditive": pe_a + pe_b - pe,
    }
    return A3Check(
        subadditive=slacks["subadditive"] >= -slack_tol(pe, pe_a, pe_b),
        lower=slacks["lower"] >= -slack_tol(pe, pe_S),
        upper=slacks["upper"] >= -slack_tol(pe_S),
        slacks=slacks,
    )


def random_hierarchical_support(p: int, rng: np.random.Generator) -> SupportSet:
    """Each main effect with probability 1/2, then each pair among them with probability 1/2."""
    main = [j for j in range(1, p + 1) if rng.random() < 0.5]
    pairs = [(j, k) for a, j in enumerate(main) for k in main[a + 1:] if rng.random() < 0.5]
    return SupportSet(frozenset(main), frozenset(pairs))


@dataclass(frozen=True)
class A3Summary:
    penalty: str
    p: int
    trials: int
    constants: A3Constants
    zero_ok: bool
    failures: dict
    worst_slack: dict

    @property
    def passed(self) -> int:
        return self.trials - self.failures["any"]


def a3_suite(
    spec: PenaltySpec,
    p: int,
    trials: int,
    seed=None,
    constants: A3Constants | None = None,
) -> A3Summary:
    """Run :func:`check_a3` on random Gaussian theta and random hierarchical supports.

    Each trial also checks subadditivity on an independent Gaussian split.
    """
    rng = np.random.default_rng(seed)
    idx = InteractionIndex(p)
    c = constants or a3_constants(spec, p)
    fails = {"lower": 0, "upper": 0, "subadditive": 0, "any": 0}
    worst = {"lower": np.inf, "upper": np.inf, "subadditive": np.inf}
    for _ in range(trials):
        theta = rng.standard_normal(idx.p1)
        S = random_hierarchical_support(p, rng)
        split = rng.standard_normal(idx.p1)
        r = check_a3(spec, theta, S, idx, split=split, constants=c)
        bad = False
        for key in worst:
            worst[key] = min(worst[key], r.slacks[key])
            if not getattr(r, key):
                fails[key] += 1
                bad = True
        fails["any"] += bad
    zero_ok = evaluate(spec, np.zeros(idx.p1), idx) == 0.0
    return A3Summary(spec.label(), p, trials, c, zero_ok, fails, worst)
