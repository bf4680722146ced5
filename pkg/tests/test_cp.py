import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from monofock.algebra import AlgebraSpec, LinearMap, dagger
from monofock.cp import (
    FreeProductMap,
    MonotoneProductMap,
    choi_matrix,
    cp_check_choi,
    cp_check_gram,
    random_correlation,
    random_ucp,
    reduction_map,
    schur_map,
    transpose_map,
    unitalize,
    verify_cfree_monot,
    verify_unitalization,
)
from monofock.errors import NotFullAlgebra
from monofock.words import Family, Letter, Member, NCPoly, Word, center, sample_random_word

from conftest import diagonal_family, state_family

A2 = AlgebraSpec.full(2)


def test_choi_identity_is_psd_and_rank_one():
    C = choi_matrix(LinearMap.identity(2))
    assert cp_check_choi(LinearMap.identity(2)) >= -1e-14
    assert np.linalg.matrix_rank(C) == 1


def test_choi_transpose_is_negative():
    # the Choi matrix of the transpose is the swap, eigenvalue -1
    assert abs(cp_check_choi(transpose_map(2)) + 1) < 1e-12


def test_choi_depolarizing_is_psd():
    f = LinearMap.from_function(lambda a: np.trace(a) / 2 * np.eye(2), 2, 2)
    assert cp_check_choi(f) >= -1e-14


def test_choi_reduction_is_negative():
    assert cp_check_choi(reduction_map(2)) < -0.5


def test_choi_needs_full_algebra():
    with pytest.raises(NotFullAlgebra):
        cp_check_choi(LinearMap.identity(2), AlgebraSpec.diagonal(2))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_maps_are_unital_cp(seed):
    r = np.random.default_rng(seed)
    th = random_ucp(A2, A2, r)
    assert cp_check_choi(th) >= -1e-12
    assert np.allclose(th(np.eye(2)), np.eye(2))
    S = random_correlation(3, r)
    sm = schur_map(S)
    assert cp_check_choi(sm) >= -1e-12
    assert np.allclose(sm(np.eye(3)), np.eye(3))


def test_gram_of_empty_word():
    fam = diagonal_family((1, 2))
    ev = MonotoneProductMap(fam, {i: schur_map(np.ones((2, 2)), A2) for i in (1, 2)})
    assert np.allclose(ev(Word()), np.eye(2))


def test_free_product_centered_letters(rng):
    fam = state_family((1, 2), rng, with_phi=False)
    thetas = {i: random_ucp(A2, A2, rng) for i in (1, 2)}
    free = FreeProductMap(fam, thetas)
    a, _ = center(Letter(1, A2.random_element(rng)), fam[1].psi)
    b, _ = center(Letter(2, A2.random_element(rng)), fam[2].psi)
    assert np.allclose(free(Word((a,))), thetas[1](a.element), atol=1e-12)
    assert np.allclose(free(Word((a, b))), thetas[1](a.element) @ thetas[2](b.element), atol=1e-12)


def test_free_product_is_identity_on_b(rng):
    fam = diagonal_family((1, 2))
    thetas = {i: schur_map(random_correlation(2, rng), A2) for i in (1, 2)}
    free = FreeProductMap(fam, thetas)
    b = np.diag(rng.standard_normal(2))
    assert np.allclose(free(Word(((1, b),))), b, atol=1e-12)


def test_unitalization_examples(rng):
    fam = diagonal_family((1, 2))
    th = schur_map(random_correlation(2, rng), A2)
    U = unitalize(A2, fam[2].psi, th, lowest=False)
    a = A2.random_element(rng)
    b = np.diag(rng.standard_normal(2)).astype(complex)
    zero = np.zeros((2, 2))
    assert np.allclose(U.theta(U.element(zero, a)), th(a))
    assert np.allclose(U.theta(U.element(b, zero * a)), b)
    assert verify_unitalization(U, th, rng) < 1e-12


def test_unitalized_expectation(rng):
    fam = state_family((1, 2), rng, with_phi=False)
    th = random_ucp(A2, A2, rng)
    lo = unitalize(A2, fam[1].psi, th, lowest=True)
    hi = unitalize(A2, fam[2].psi, th, lowest=False)
    a = A2.random_element(rng)
    b = np.array([[0.7]])
    assert np.allclose(lo.psi(lo.element(b, a)), b)
    assert np.allclose(hi.psi(hi.element(b, a)), b + fam[2].psi(a))


@pytest.mark.parametrize("which", ["scalar", "diagonal"])
def test_cfree_monotone(which, rng, scalar_scenario, diagonal_scenario):
    sc = scalar_scenario if which == "scalar" else diagonal_scenario
    fam = sc.family.subfamily((1, 2))
    rep = verify_cfree_monot(fam, {i: sc.thetas[i] for i in (1, 2)}, rng)
    assert rep.passed, rep.lines()


def test_cfree_words_with_outer_high_letters(rng, scalar_scenario):
    fam = scalar_scenario.family.subfamily((1, 2))
    thetas = {i: scalar_scenario.thetas[i] for i in (1, 2)}
    units = {1: unitalize(A2, fam[1].psi, thetas[1], True), 2: unitalize(A2, fam[2].psi, thetas[2], False)}
    ufam = Family(Member(i, u.algebra, u.psi) for i, u in units.items())
    free = FreeProductMap(ufam, {i: u.theta for i, u in units.items()})
    mono = MonotoneProductMap(fam, thetas)
    for _ in range(20):
        xs = [A2.random_element(rng) for _ in range(3)]
        w = Word(((2, xs[0]), (1, xs[1]), (2, xs[2])))
        lifted = Word(tuple(Letter(l.index, units[l.index].letter(l.element)) for l in w.letters))
        assert np.allclose(free(lifted), mono(w), atol=1e-12)


@pytest.mark.parametrize("which", ["scalar", "diagonal"])
def test_gram_positivity(which, scalar_scenario, diagonal_scenario):
    sc = scalar_scenario if which == "scalar" else diagonal_scenario
    res = cp_check_gram(MonotoneProductMap(sc.family, sc.thetas), sc.family, 2, 20, np.random.default_rng(3))
    assert res["min"] >= -1e-8
    assert res["hermitian"] < 1e-12


def test_gram_negative_control(scalar_scenario):
    fam = scalar_scenario.family
    bad = dict(scalar_scenario.thetas)
    bad[2] = reduction_map(2)
    res = cp_check_gram(MonotoneProductMap(fam, bad), fam, 2, 20, np.random.default_rng(3))
    assert res["min"] <= -1e-3


def test_gram_rounds_are_reproducible(scalar_scenario):
    ev = MonotoneProductMap(scalar_scenario.family, scalar_scenario.thetas)
    r1 = cp_check_gram(ev, scalar_scenario.family, 2, 5, np.random.default_rng(9))
    r2 = cp_check_gram(ev, scalar_scenario.family, 2, 5, np.random.default_rng(9))
    assert r1["per_round"] == r2["per_round"]


def test_product_map_accepts_polynomials(rng, scalar_scenario):
    fam = scalar_scenario.family
    ev = MonotoneProductMap(fam, scalar_scenario.thetas)
    w1, w2 = sample_random_word(rng, 4, fam), sample_random_word(rng, 4, fam)
    p = NCPoly([Word(w1.letters, 2.0), Word(w2.letters, -1j)])
    assert np.allclose(ev(p), 2 * ev(w1) - 1j * ev(w2))
    assert np.allclose(ev(Word(w1.letters)).conj().T, ev(Word(tuple(Letter(l.index, dagger(l.element))
                                                                          for l in reversed(w1.letters)))))
