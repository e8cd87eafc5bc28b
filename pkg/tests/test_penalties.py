import json

import numpy as np
import pytest

from hiersparse import (
    A3Constants,
    DomainError,
    InteractionIndex,
    PenaltySpec,
    SupportSet,
    a3_constants,
    a3_constants_sharp,
    atoms,
    check_a3,
    evaluate,
)
from hiersparse.penalties import FAMILIES, random_hierarchical_support

SPECS = [
    PenaltySpec("lasso"),
    PenaltySpec("cap", 2),
    PenaltySpec("bien"),
    PenaltySpec("pairwise", 2),
    PenaltySpec("block", 2, 2),
    PenaltySpec("nested", 2),
]
ALL_SPECS = SPECS + [PenaltySpec("cap", 3), PenaltySpec("cap", np.inf), PenaltySpec("block", 1.5, 3),
                     PenaltySpec("nested", np.inf), PenaltySpec("pairwise", 4)]


def test_evaluate_examples():
    idx = InteractionIndex(2)
    assert evaluate(PenaltySpec("cap", 2), [3, 4, 0], idx) == pytest.approx(7.0)
    assert evaluate(PenaltySpec("bien"), [1, 2, 3], idx) == pytest.approx(9.0)
    assert evaluate(PenaltySpec("pairwise", 2), [3, 4, 0], idx) == pytest.approx(7.0)


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.label())
def test_zero(spec):
    idx = InteractionIndex(5)
    assert evaluate(spec, np.zeros(idx.p1), idx) == 0.0


def test_dimension_mismatch():
    with pytest.raises(DomainError):
        evaluate(PenaltySpec("cap"), np.zeros(4), InteractionIndex(2))


def test_q_must_exceed_one():
    with pytest.raises(DomainError):
        PenaltySpec("cap", 1.0)
    with pytest.raises(DomainError):
        evaluate(PenaltySpec("block", 2, 4), np.zeros(6), InteractionIndex(3))


def test_a3_constants_examples():
    assert a3_constants(PenaltySpec("cap", 2), 7) == A3Constants(1, 3)
    assert a3_constants(PenaltySpec("bien"), 7) == A3Constants(1, 3)
    assert a3_constants(PenaltySpec("pairwise", 2), 11) == A3Constants(1, 1.1)
    assert a3_constants(PenaltySpec("block", 2, 2), 5) == A3Constants(1, 6)
    assert a3_constants(PenaltySpec("nested", 2), 5) == A3Constants(1, 2)
    assert a3_constants(PenaltySpec("lasso"), 5) == A3Constants(1, 1)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label())
def test_declared_constants_invariants(spec):
    c = a3_constants(spec, 6)
    assert c.L1 > 0.5 and c.L2 >= c.L1


def test_check_a3_examples():
    idx = InteractionIndex(2)
    S = SupportSet({1, 2})
    r = check_a3(PenaltySpec("cap", 2), np.array([3.0, 4.0, 5.0]), S, idx)
    assert evaluate(PenaltySpec("cap", 2), [3, 4, 5], idx) == pytest.approx(17.234076132278147)
    assert r.lower and r.upper
    assert r.slacks["lower"] == pytest.approx(17.234076132278147 - 12)
    assert r.slacks["upper"] == pytest.approx(21 - 7)
    z = check_a3(PenaltySpec("cap", 2), np.zeros(3), S, idx)
    assert z.ok and all(v == 0 for v in z.slacks.values())


def test_check_a3_rejects_non_hierarchical():
    with pytest.raises(DomainError):
        check_a3(PenaltySpec("cap"), np.ones(3), SupportSet({1}, {(1, 2)}), InteractionIndex(2))


def test_atoms_examples():
    idx = InteractionIndex(2)
    cap = atoms(PenaltySpec("cap", 2), idx)
    assert [(a.indices, a.weight, a.kind) for a in cap] == [((0, 2), 1.0, "lq"), ((1, 2), 1.0, "lq"), ((2,), 1.0, "l1")]
    lasso = atoms(PenaltySpec("lasso"), idx)
    assert [(a.indices, a.weight, a.kind) for a in lasso] == [((0, 1, 2), 1.0, "l1")]
    assert atoms(PenaltySpec("block", 2, 1), idx) == cap


@pytest.mark.parametrize("p", [2, 3, 6])
def test_block_d0_one_is_cap(p):
    idx = InteractionIndex(p)
    assert atoms(PenaltySpec("block", 2, 1), idx) == atoms(PenaltySpec("cap", 2), idx)


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.label())
@pytest.mark.parametrize("p", [3, 5, 8])
def test_atom_sum_identity(spec, p, rng):
    idx = InteractionIndex(p)
    al = atoms(spec, idx)
    assert np.all(al.coverage() >= 1)
    for _ in range(100):
        theta = rng.standard_normal(idx.p1) * rng.exponential(1, idx.p1)
        e = evaluate(spec, theta, idx)
        assert abs(e - al.value(theta)) <= 1e-10 * (1 + e)


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.label())
def test_norm_axioms(spec, rng):
    idx = InteractionIndex(5)
    for _ in range(200):
        a, b = rng.standard_normal((2, idx.p1))
        c = rng.normal() * 3
        ea, eb = evaluate(spec, a, idx), evaluate(spec, b, idx)
        assert evaluate(spec, c * a, idx) == pytest.approx(abs(c) * ea, rel=1e-12, abs=1e-12)
        assert evaluate(spec, a + b, idx) <= ea + eb + 1e-9


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.label())
def test_l1_sandwich(spec, rng):
    idx = InteractionIndex(6)
    d0 = spec.d0 if spec.family == "block" else 1
    for _ in range(300):
        theta = rng.standard_normal(idx.p1)
        l1 = np.abs(theta).sum()
        e = evaluate(spec, theta, idx)
        assert e >= l1 - 1e-9
        assert e <= 3 * d0 * l1 + 1e-9


@pytest.mark.parametrize("spec", [PenaltySpec("lasso"), PenaltySpec("cap", 2), PenaltySpec("bien"),
                                  PenaltySpec("nested", 2), PenaltySpec("cap", 3), PenaltySpec("block", 2, 1)],
                         ids=lambda s: s.label())
@pytest.mark.parametrize("p", [3, 5, 8])
def test_a3_holds_with_declared_constants(spec, p, rng):
    idx = InteractionIndex(p)
    for _ in range(300):
        theta = rng.standard_normal(idx.p1)
        S = random_hierarchical_support(p, rng)
        assert check_a3(spec, theta, S, idx, split=rng.standard_normal(idx.p1)).ok


@pytest.mark.parametrize("p", [3, 5, 8, 11])
def test_pairwise_declared_upper_constant_is_too_small(p):
    # an interaction alone in theta_S is charged 1 + 2/(p-1) times its size
    idx = InteractionIndex(p)
    spec = PenaltySpec("pairwise", 2)
    theta = np.zeros(idx.p1)
    theta[idx.pair_to_column(1, 2) - 1] = 1.0
    S = SupportSet({1, 2}, {(1, 2)})
    assert evaluate(spec, theta, idx) == pytest.approx(1 + 2 / (p - 1))
    assert not check_a3(spec, theta, S, idx).upper
    assert check_a3(spec, theta, S, idx, constants=a3_constants_sharp(spec, p)).upper


@pytest.mark.parametrize("p", [3, 5, 8])
def test_pairwise_sharp_constants_hold(p, rng):
    idx = InteractionIndex(p)
    spec = PenaltySpec("pairwise", 2)
    c = a3_constants_sharp(spec, p)
    for _ in range(500):
        theta = rng.standard_normal(idx.p1)
        S = random_hierarchical_support(p, rng)
        assert check_a3(spec, theta, S, idx, constants=c).ok


def test_block_lower_bound_counterexample():
    # main effect 2 shares its only window with a large in-support main effect 1
    idx = InteractionIndex(2)
    spec = PenaltySpec("block", 2, 2)
    theta = np.array([10.0, 1.0, 0.0])
    r = check_a3(spec, theta, SupportSet({1}), idx)
    assert r.slacks["lower"] == pytest.approx(np.sqrt(101) - 10 - 1)
    assert not r.lower
    assert a3_constants_sharp(spec, 2) is None


@pytest.mark.parametrize("text,expected", [
    ("cap:q=2", PenaltySpec("cap", 2)),
    ("block:q=2,d0=3", PenaltySpec("block", 2, 3)),
    ("lasso", PenaltySpec("lasso")),
    ("bien", PenaltySpec("bien")),
    ("nested:q=inf", PenaltySpec("nested", np.inf)),
])
def test_parse_and_json_roundtrip(text, expected):
    spec = PenaltySpec.parse(text)
    assert spec == expected
    assert PenaltySpec.from_json(spec.to_json()) == spec
    assert json.loads(spec.to_json())["family"] in FAMILIES
    assert PenaltySpec.parse(spec.label()) == spec


@pytest.mark.parametrize("text", ["foo", "cap:q", "cap:z=3", "cap:q=0.5"])
def test_parse_errors(text):
    with pytest.raises((DomainError, ValueError)):
        PenaltySpec.parse(text)
