import numpy as np
import pytest

from monofock.algebra import AlgebraSpec, StateSpec, dagger
from monofock.errors import AssumptionViolation, EmptyFamily, ShapeMismatch, UnknownIndex
from monofock.fock import (
    MonotoneFock,
    build_fock,
    decreasing_tuples,
    verify_cmonotone_rules,
    verify_structure,
    verify_vacuum_decomposition,
)
from monofock.moments import eval_cmonotone, pattern_sweep, random_words
from monofock.words import Letter, Word

from conftest import state_family

A2 = AlgebraSpec.full(2)


def unit_vectors(dims):
    return {i: np.eye(d)[0] for i, d in dims.items()}


@pytest.mark.parametrize("dims, total", [({1: 3}, 3), ({1: 2, 2: 2}, 4), ({1: 2, 2: 2, 3: 2}, 8)])
def test_fock_dimension(dims, total):
    assert MonotoneFock(unit_vectors(dims)).dim == total


def test_decreasing_tuples():
    assert decreasing_tuples((1, 2)) == [(), (2,), (1,), (2, 1)]


def test_empty_family():
    with pytest.raises(EmptyFamily):
        MonotoneFock({})


def test_V_on_vacuum_and_high_tuples():
    F = MonotoneFock(unit_vectors({1: 2, 2: 2, 3: 2}))
    V = F.make_V(2).matrix
    low = F.low_dim(2)
    # V_k xi = xi_k ⊗ xi
    want = np.kron(F.xis[2], np.eye(low)[0])
    assert np.allclose(V @ F.vacuum, want)
    for t in F.tuples:
        if t and t[0] > 2:
            assert np.allclose(V[:, F.block(t)], 0)


def test_V_star_V_is_complement_of_high_tuples():
    F = MonotoneFock(unit_vectors({1: 3, 2: 2, 3: 2}))
    for k in F.indices:
        V = F.make_V(k).matrix
        high = F.mask(lambda t: bool(t) and t[0] > k)
        assert np.allclose(dagger(V) @ V, np.diag((~high).astype(float)))
        assert np.allclose(F.omega(k, np.eye(F.local_dim(k))).matrix, dagger(V) @ V)


def test_unknown_index():
    F = MonotoneFock(unit_vectors({1: 2}))
    with pytest.raises(UnknownIndex):
        F.make_V(4)


def test_omega_shape_checked():
    F = MonotoneFock(unit_vectors({1: 2}))
    with pytest.raises(ShapeMismatch):
        F.omega(1, np.eye(3))


def test_vacuum_state_examples(rng):
    fam = state_family((1, 2, 3), rng)
    F = build_fock(fam)
    assert abs(F.vacuum_state(np.eye(F.dim)) - 1) < 1e-14
    for k in F.indices:
        assert abs(F.vacuum_state(F.P(k)) - 1) < 1e-14
        a = A2.random_element(rng)
        assert abs(F.vacuum_state(F.j(k, a)) - fam[k].phi(a)) < 1e-12


def test_structure(rng):
    F = build_fock(state_family((1, 2, 3), rng))
    rep = verify_structure(F, rng)
    assert rep.passed, rep.lines()


def test_j_basis_cache_matches_direct_formula(rng):
    fam = state_family((1, 2), rng)
    F = build_fock(fam)
    g = F.gns[2]
    a = A2.random_element(rng)
    assert np.allclose(F.j(2, a).matrix, F.j(2, a, pi=g.pi, sigma=g.sigma).matrix, atol=1e-13)


def test_vacuum_decomposition_identities_exact(rng):
    F = build_fock(state_family((1, 2, 3), rng))
    w = Word(tuple(Letter(i, np.eye(2)) for i in (3, 1, 2)))
    assert verify_vacuum_decomposition(F, [w]).cases[0].value == 0


def test_vacuum_decomposition_single_letter(rng):
    fam = state_family((1, 2, 3), rng)
    F = build_fock(fam)
    words = [Word(((k, A2.random_element(rng)),)) for k in fam.indices]
    assert verify_vacuum_decomposition(F, words).passed


def test_vacuum_decomposition_random(rng):
    fam = state_family((1, 2, 3), rng)
    F = build_fock(fam)
    assert verify_vacuum_decomposition(F, random_words(fam, 100, 5, rng)).passed


def test_first_rule(rng):
    fam = state_family((1, 2, 3), rng)
    F = build_fock(fam)
    a1, a2, a3 = (A2.random_element(rng) for _ in range(3))
    w = Word(((3, a1), (1, a2), (2, a3)))
    rest = Word(((1, a2), (2, a3)))
    assert abs(F.moment(w) - fam[3].phi(a1) * F.moment(rest)) < 1e-12


def test_rules_when_phi_equals_psi(rng):
    base = state_family((1, 2, 3), rng, with_phi=False)
    fam = base.with_members(phis={m.index: StateSpec(m.psi.map.matrix.reshape(2, 2).T) for m in base})
    F = build_fock(fam, strict=True)
    words = random_words(fam, 50, 5, rng)
    rep = verify_cmonotone_rules(F, fam, words)
    assert rep.passed, rep.lines()


def test_strict_mode_requires_matching_lowest_states(rng):
    fam = state_family((1, 2), rng)
    with pytest.raises(AssumptionViolation):
        build_fock(fam, strict=True)
    assert build_fock(fam).assumptions["lowest_phi_equals_psi"] is False


def test_full_sweep(scalar_scenario, rng):
    fam = scalar_scenario.family
    F = build_fock(fam)
    words = list(pattern_sweep(fam, 5, rng))
    rep = verify_cmonotone_rules(F, fam, words)
    assert rep.passed, rep.lines()
    assert max(abs(F.moment(w) - eval_cmonotone(w, fam)) for w in words) <= 1e-9


def test_family_without_phi_is_rejected(rng):
    with pytest.raises(ShapeMismatch):
        build_fock(state_family((1, 2), rng, with_phi=False))
