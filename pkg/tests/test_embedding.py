import numpy as np
import pytest

from monofock.algebra import AlgebraSpec, BimoduleMap, LinearMap, StateSpec, opnorm
from monofock.cp import random_ucp
from monofock.embedding import (
    build_cp_embedding,
    corner_nested_scenario,
    nested_embedding,
    property_residuals,
    tensor_nested_scenario,
    trivial_nested_scenario,
    verify_cp_embedding,
    verify_nested,
)
from monofock.errors import CompatibilityFail, InvalidCondExp, ShapeMismatch
from monofock.words import Letter, Word, sample_random_word

from conftest import state_family

A2 = AlgebraSpec.full(2)


def test_trivial_nesting(rng):
    fam = state_family((1, 2), rng, with_phi=False)
    sc = trivial_nested_scenario(fam)
    N = nested_embedding(sc)
    # same modules on both sides: J is a unitary
    assert N.J.shape[0] == N.J.shape[1]
    assert opnorm(N.J.conj().T @ N.J - np.eye(N.J.shape[0])) < 1e-12
    rep = verify_nested(sc, rng, n_polys=10, n_words=20)
    assert rep.passed, rep.lines()
    assert rep.case("nested-norms").value < 1e-12


def test_tensor_nesting(rng):
    sc = tensor_nested_scenario(rng)
    rep = verify_nested(sc, rng)
    assert rep.passed, rep.lines()


def test_corner_nesting_is_padded(rng):
    sc = corner_nested_scenario(rng)
    N = nested_embedding(sc)
    assert N.scenario.padded
    rep = verify_nested(sc, rng, n_polys=20, n_words=40)
    assert rep.passed, rep.lines()


def test_nested_scenario_needs_one_ambient_size(rng):
    sc = tensor_nested_scenario(rng)
    with pytest.raises(ShapeMismatch):
        type(sc)(sc.small, sc.large, AlgebraSpec.scalars(), sc.Bt, sc.psit)


def test_expectation_must_land_in_b(rng):
    sc = tensor_nested_scenario(rng)
    bad = type(sc)(sc.large, sc.large, sc.B, sc.Bt, sc.psit)
    with pytest.raises(InvalidCondExp):
        bad.small_family()


def identity_maps(fam):
    return {m.index: BimoduleMap(m.algebra, m.algebra, LinearMap.identity(2), m.psi.embedding,
                                 m.psi.embedding, fam.B) for m in fam}


def test_identity_maps_give_identity(rng):
    fam = state_family((1, 2), rng, with_phi=False)
    C = build_cp_embedding({m.index: m.algebra for m in fam}, fam, identity_maps(fam))
    for _ in range(20):
        w = sample_random_word(rng, 5, fam)
        assert opnorm(C(w) - C.E.word_operator(w)) < 1e-12


def test_compatibility_is_checked(rng):
    fam = state_family((1, 2), rng, with_phi=False)
    thetas = {m.index: random_ucp(A2, A2, rng) for m in fam}
    wrong = {m.index: StateSpec(np.eye(2) / 2).as_condexp(A2) for m in fam}
    with pytest.raises(CompatibilityFail):
        build_cp_embedding({m.index: m.algebra for m in fam}, fam, thetas, phis=wrong)


def test_local_isometries(rng, diagonal_scenario):
    fam = diagonal_scenario.family
    C = build_cp_embedding({m.index: m.algebra for m in fam}, fam, diagonal_scenario.thetas)
    for i, v in C.local_v.items():
        assert opnorm(v.conj().T @ v - np.eye(v.shape[1])) < 1e-12


def test_interior_peak_property(rng, diagonal_scenario):
    fam = diagonal_scenario.family
    C = build_cp_embedding({m.index: m.algebra for m in fam}, fam, diagonal_scenario.thetas)
    w = Word(tuple(Letter(i, A2.random_element(rng)) for i in (1, 3, 2, 1)))
    res = property_residuals(C, w)
    assert res["peak"] < 1e-12


def test_cp_embedding_diagonal(rng, diagonal_scenario):
    fam = diagonal_scenario.family
    C = build_cp_embedding({m.index: m.algebra for m in fam}, fam, diagonal_scenario.thetas)
    rep = verify_cp_embedding(C, rng, n_random=50, gram_rounds=10)
    assert rep.passed, rep.lines()


@pytest.mark.slow
def test_cp_embedding_scalar(rng, scalar_scenario):
    fam = scalar_scenario.family
    C = build_cp_embedding({m.index: m.algebra for m in fam}, fam, scalar_scenario.thetas)
    rep = verify_cp_embedding(C, rng, max_len=3, n_random=30, gram_rounds=3)
    assert rep.passed, rep.lines()
