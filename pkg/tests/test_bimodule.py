import numpy as np
import pytest

from monofock.algebra import AlgebraSpec, CondExpSpec, StateSpec, gns
from monofock.bimodule import (
    build_free_bimodule,
    build_monotone_bimodule,
    conditional_expectation_onto,
    free_peak_counterexample,
    induce_representation,
    verify_conditional_expectation,
    verify_free_restriction,
    verify_induced,
    verify_monotone_rules,
    verify_peak_identity,
    verify_structure,
    zero_module,
)
from monofock.errors import DegenerateChoice, DepthExceeded, MixedB, NotInImage
from monofock.fock import MonotoneFock
from monofock.moments import eval_monotone, pattern_sweep, random_words
from monofock.words import Family, Letter, Member, Word, alternating_patterns

from conftest import diagonal_family, state_family

A2 = AlgebraSpec.full(2)
# value of ||A1 A2 A3 (f3 ⊗ f2)|| for the bundled letters, from tools/free_peak_oracle.py
ORACLE_RHS = 6.708203932499369


def test_scalar_case_matches_fock_dimension(rng):
    fam = state_family((1, 2, 3), rng, with_phi=False)
    M = build_monotone_bimodule(fam)
    xis = {m.index: gns(m.algebra, StateSpec(m.psi.map.matrix.reshape(2, 2).T)).xi for m in fam}
    assert M.dim == MonotoneFock(xis).dim == 64


def _offdiag_tensor_rank():
    """rank of <x1⊗x2, y1⊗y2> = Δ(x2* Δ(x1* y1) y2) on off-diagonal 2x2 matrices."""
    e12 = np.array([[0, 1], [0, 0]], dtype=float)
    basis = [e12, e12.T]
    delta = lambda m: np.diag(np.diag(m))
    pairs = [(x, y) for x in basis for y in basis]
    G = np.array([[np.trace(delta(p[1].T @ delta(p[0].T @ q[0]) @ q[1])) for q in pairs] for p in pairs])
    return int(np.linalg.matrix_rank(G, tol=1e-10))


def test_diagonal_dimension_matches_brute_force():
    M = build_monotone_bimodule(diagonal_family((1, 2)))
    # B ⊕ E_1° ⊕ E_2° ⊕ E_2° ⊗ E_1°
    assert M.dim == 2 + 2 + 2 + _offdiag_tensor_rank()


def test_single_algebra(rng):
    fam = state_family((4,), rng, with_phi=False)
    M = build_monotone_bimodule(fam)
    assert M.dim == M.factory.modules[4].n


def test_mixed_b_is_rejected():
    A = AlgebraSpec.full(2)
    trace = StateSpec(np.eye(2) / 2).as_condexp(A)
    with pytest.raises(MixedB):
        Family([Member(1, A, trace), Member(2, A, CondExpSpec.diagonal_compression(2, A))])


@pytest.mark.parametrize("which", ["scalar", "diagonal"])
def test_structure(which, rng, scalar_scenario, diagonal_scenario):
    fam = (scalar_scenario if which == "scalar" else diagonal_scenario).family
    M = build_monotone_bimodule(fam)
    rep = verify_structure(M, fam, rng)
    assert rep.passed, rep.lines()


def test_vacuum_single_letter(rng, diagonal_scenario):
    fam = diagonal_scenario.family
    M = build_monotone_bimodule(fam)
    for k in fam.indices:
        a = A2.random_element(rng)
        assert np.allclose(M.vacuum_expectation(M.j(k, a)), fam[k].psi(a), atol=1e-12)


@pytest.mark.parametrize("which", ["scalar", "diagonal"])
def test_monotone_rules_sweep(which, rng, scalar_scenario, diagonal_scenario):
    fam = (scalar_scenario if which == "scalar" else diagonal_scenario).family
    M = build_monotone_bimodule(fam)
    rep = verify_monotone_rules(M, fam, list(pattern_sweep(fam, 5, rng)))
    assert rep.passed, rep.lines()


def test_first_rule_by_hand(rng, diagonal_scenario):
    fam = diagonal_scenario.family
    M = build_monotone_bimodule(fam)
    a1, a2, a3 = (A2.random_element(rng) for _ in range(3))
    w = Word(((3, a1), (2, a2), (1, a3)))
    rest = Word(((2, a2), (1, a3)))
    assert np.allclose(M.moment(w), fam[3].psi(a1) @ M.moment(rest), atol=1e-12)


def test_peak_identity_and_control(rng, diagonal_scenario):
    fam = diagonal_scenario.family
    M = build_monotone_bimodule(fam)
    rep = verify_peak_identity(M, fam, list(alternating_patterns(fam.indices, 3, 3)), rng)
    assert rep.passed, rep.lines()
    assert rep.case("peak-control").value >= 1e-3


def test_centered_b_annihilates_complement(rng, diagonal_scenario):
    fam = diagonal_scenario.family
    M = build_monotone_bimodule(fam)
    x = A2.random_element(rng)
    y = A2.random_element(rng)
    y = y - fam[3].psi.embed(fam[3].psi(y))
    keep = ~M.mask(lambda t: bool(t) and t[0] == 3)
    assert np.abs((M.j(1, x) @ M.j(3, y))[:, keep]).max() < 1e-12


def test_free_restriction(rng, scalar_scenario):
    fam = scalar_scenario.family
    M = build_monotone_bimodule(fam)
    Fr = build_free_bimodule(fam, 4, monotone=M)
    rep = verify_free_restriction(M, Fr, fam, rng, random_words(fam, 20, 4, rng))
    assert rep.passed, rep.lines()


def test_free_truncation_boundary(rng, scalar_scenario):
    fam = scalar_scenario.family
    Fr = build_free_bimodule(fam, 1)
    a = A2.random_element(rng)
    b = A2.random_element(rng)
    a = a - fam[1].psi.embed(fam[1].psi(a))
    b = b - fam[2].psi.embed(fam[2].psi(b))
    with pytest.raises(DepthExceeded):
        Fr.apply_word(Word(((2, b), (1, a))), Fr.vacuum())


def test_counterexample_value(remark_scenario):
    res = free_peak_counterexample(remark_scenario.family, remark_scenario.letters)
    assert res["lhs_norm"] <= 1e-10
    assert abs(res["rhs_norm"] - ORACLE_RHS) <= 1e-9
    deeper = free_peak_counterexample(remark_scenario.family, remark_scenario.letters, n_max=res["n_max"] + 1)
    assert abs(deeper["rhs_norm"] - res["rhs_norm"]) <= 1e-12


def test_counterexample_needs_centered_letters(remark_scenario):
    letters = list(remark_scenario.letters)
    letters[1] = Letter(letters[1].index, letters[1].element + np.eye(2))
    with pytest.raises(DegenerateChoice):
        free_peak_counterexample(remark_scenario.family, letters)


def test_counterexample_degenerate_f3(remark_scenario):
    letters = list(remark_scenario.letters)
    letters[1] = Letter(letters[1].index, np.zeros((2, 2)))
    with pytest.raises(DegenerateChoice):
        free_peak_counterexample(remark_scenario.family, letters)


def test_counterexample_needs_a_peak(remark_scenario):
    letters = list(remark_scenario.letters)
    letters = [Letter(i, l.element) for i, l in zip((3, 1, 2), letters)]
    with pytest.raises(DegenerateChoice):
        free_peak_counterexample(remark_scenario.family, letters)


@pytest.mark.parametrize("which", ["scalar", "diagonal"])
def test_conditional_expectation_lowest_index(which, rng, scalar_scenario, diagonal_scenario):
    fam = (scalar_scenario if which == "scalar" else diagonal_scenario).family
    M = build_monotone_bimodule(fam)
    rep = verify_conditional_expectation(M, fam, min(fam.indices), random_words(fam, 40, 5, rng), rng)
    assert rep.passed, rep.lines()


def test_conditional_expectation_identity_on_own_algebra(rng, scalar_scenario):
    fam = scalar_scenario.family
    M = build_monotone_bimodule(fam)
    Psi = conditional_expectation_onto(M, 2, fam)
    a = A2.random_element(rng)
    val, res = Psi(M.j(2, a))
    assert np.allclose(val, a, atol=1e-12) and res < 1e-12


def test_conditional_expectation_above_lowest_leaves_the_algebra(rng, scalar_scenario):
    # for i < i0 the compression of j_i(a) is psi_i(a) times the vacuum projection,
    # which is not of the form pi_{i0}(x)
    fam = scalar_scenario.family
    M = build_monotone_bimodule(fam)
    Psi = conditional_expectation_onto(M, max(fam.indices), fam)
    a = A2.random_element(rng)
    with pytest.raises(NotInImage):
        Psi(M.j(min(fam.indices), a))
    _, res = Psi(M.j(min(fam.indices), a), strict=False)
    assert res > 1e-3


def test_induced_from_gns(rng, diagonal_scenario):
    fam = diagonal_scenario.family
    M = build_monotone_bimodule(fam)
    rep = verify_induced(M, fam, min(fam.indices), random_words(fam, 30, 5, rng), rng)
    assert rep.passed, rep.lines()


def test_induced_from_zero_module(scalar_scenario):
    fam = scalar_scenario.family
    M = build_monotone_bimodule(fam)
    R = induce_representation(M, 1, zero_module(A2, fam.B))
    assert R.dim == 0
    assert R.rho(2, np.eye(2)).shape == (0, 0)


def test_moments_match_evaluator(rng, diagonal_scenario):
    fam = diagonal_scenario.family
    M = build_monotone_bimodule(fam)
    for w in random_words(fam, 30, 6, rng):
        assert np.allclose(M.moment(w), eval_monotone(w, fam), atol=1e-12)
