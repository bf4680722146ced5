import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from monofock.algebra import (
    AlgebraSpec,
    CondExpSpec,
    LinearMap,
    SCALARS,
    StateSpec,
    centered,
    dagger,
    gns,
    gns_module,
    opnorm,
    paired_gns,
    random_density,
    tensor_over_B,
    unit_module,
)
from monofock.errors import InvalidAlgebra, InvalidCondExp, NonState, NotInAlgebra


def test_full_algebra_contains_products_and_adjoints(rng):
    A = AlgebraSpec.full(3)
    a, b = A.random_element(rng), A.random_element(rng)
    assert A.contains(a @ b) and A.contains(dagger(a))
    assert A.size == 9 and A.dim == 3


def test_diagonal_algebra_rejects_off_diagonal():
    D = AlgebraSpec.diagonal(2)
    with pytest.raises(NotInAlgebra):
        D.require(np.array([[0, 1], [0, 0]], dtype=complex))


def test_span_not_closed_under_product_is_rejected():
    x = np.array([[0, 1], [0, 0]], dtype=complex)
    with pytest.raises(InvalidAlgebra):
        AlgebraSpec([np.eye(2), x])


def test_coords_roundtrip(rng):
    A = AlgebraSpec.block_diagonal(AlgebraSpec.full(2), AlgebraSpec.scalars())
    a = A.random_element(rng)
    assert np.allclose(A.element(A.coords(a)), a)


def test_state_rejects_bad_densities():
    with pytest.raises(NonState):
        StateSpec(np.diag([1.5, -0.5]))
    with pytest.raises(NonState):
        StateSpec(np.eye(2))
    with pytest.raises(NonState):
        StateSpec(np.array([[0.5, 1], [0, 0.5]]))


def test_condexp_axioms(rng):
    A = AlgebraSpec.full(2)
    P = CondExpSpec.diagonal_compression(2, A)
    res = P.residuals(rng)
    assert max(v for k, v in res.items() if k != "positivity") < 1e-12
    assert res["positivity"] >= -1e-12


def test_condexp_not_idempotent_is_rejected():
    A = AlgebraSpec.full(2)
    D = AlgebraSpec.diagonal(2)
    bad = LinearMap.from_function(lambda a: 2 * np.diag(np.diag(a)), 2, 2)
    with pytest.raises(InvalidCondExp):
        CondExpSpec(A, D, LinearMap.identity(2), bad).validate()


@pytest.mark.parametrize("rho, dim", [(np.diag([1.0, 0.0]), 2), (np.eye(2) / 2, 4)])
def test_gns_dimension(rho, dim):
    assert gns(AlgebraSpec.full(2), StateSpec(rho)).dim == dim


def test_gns_of_scalars():
    r = gns(SCALARS, StateSpec(np.eye(1)))
    assert r.dim == 1
    assert np.allclose(r(np.array([[3.0]])), 3.0)


def test_gns_is_a_representation(rng):
    A = AlgebraSpec.full(2)
    phi = StateSpec(random_density(2, rng))
    res = gns(A, phi).residuals(phi)
    assert max(res.values()) < 1e-12


def test_gns_module_identity_condexp():
    A = AlgebraSpec.full(2)
    E = gns_module(A, CondExpSpec.identity(A))
    assert E.n == 4 and centered(E).n == 0


@pytest.mark.parametrize("kind, n, n0", [("trace", 4, 3), ("diagonal", 4, 2)])
def test_gns_module_dimensions(kind, n, n0):
    A = AlgebraSpec.full(2)
    psi = StateSpec(np.eye(2) / 2).as_condexp(A) if kind == "trace" else CondExpSpec.diagonal_compression(2, A)
    E = gns_module(A, psi)
    assert (E.n, centered(E).n) == (n, n0)
    res = E.check()
    assert res["orthonormal"] < 1e-12 and res["positivity"] > -1e-12 and res["adjointable"] < 1e-12


def test_paired_gns_equal_states_agree(rng):
    A = AlgebraSpec.full(2)
    s = StateSpec(random_density(2, rng))
    g = paired_gns(A, s, s)
    for _ in range(10):
        a = A.random_element(rng)
        assert abs(np.vdot(g.xi, g.pi(a) @ g.xi) - np.vdot(g.xi, g.sigma(a) @ g.xi)) < 1e-12


def test_paired_gns_vector_states():
    A = AlgebraSpec.full(2)
    g = paired_gns(A, StateSpec(np.diag([1.0, 0.0])), StateSpec(np.diag([0.0, 1.0])))
    e11 = np.diag([1.0, 0.0]).astype(complex)
    assert abs(np.vdot(g.xi, g.pi(e11) @ g.xi) - 1) < 1e-12
    assert abs(np.vdot(g.xi, g.sigma(e11) @ g.xi)) < 1e-12


def test_paired_gns_sigma_reproduces_psi(rng):
    A = AlgebraSpec.full(2)
    phi, psi = StateSpec(random_density(2, rng)), StateSpec(random_density(2, rng))
    g = paired_gns(A, phi, psi)
    worst = max(abs(np.vdot(g.xi, g.sigma(a) @ g.xi) - psi(a))
                for a in (A.random_element(rng) for _ in range(100)))
    assert worst <= 1e-12


def test_tensor_with_unit_module_keeps_dimension(rng):
    A = AlgebraSpec.full(2)
    P = CondExpSpec.diagonal_compression(2, A)
    F = gns_module(A, P)
    U = unit_module(P.target)
    T = tensor_over_B(U, F)
    assert T.n == F.n


def test_scalar_tensor_is_hilbert_tensor(rng):
    A = AlgebraSpec.full(2)
    E = gns_module(A, StateSpec(random_density(2, rng)).as_condexp(A))
    F = gns_module(A, StateSpec(np.diag([1.0, 0.0])).as_condexp(A))
    assert tensor_over_B(E, F).n == E.n * F.n


def _brute_force_rank(d=2):
    """dim of M_d ⊗_D M_d with <x1⊗x2, y1⊗y2> = Δ(x2* Δ(x1* y1) y2), Δ = diagonal part."""
    units = []
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d))
            e[i, j] = 1
            units.append(e)
    delta = lambda m: np.diag(np.diag(m))
    pairs = [(x, y) for x in units for y in units]
    G = np.array([[np.trace(delta(p[1].T @ delta(p[0].T @ q[0]) @ q[1])) for q in pairs] for p in pairs])
    return int(np.linalg.matrix_rank(G, tol=1e-10))


def test_diagonal_tensor_dimension_matches_brute_force():
    A = AlgebraSpec.full(2)
    E = gns_module(A, CondExpSpec.diagonal_compression(2, A))
    T = tensor_over_B(E, E)
    assert T.n == _brute_force_rank() == 8
    assert T.check()["positivity"] > -1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_density_is_a_faithful_state(seed):
    rho = random_density(3, np.random.default_rng(seed))
    s = StateSpec(rho)
    assert s.is_faithful()
    assert abs(s(np.eye(3)) - 1) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_opnorm_submultiplicative(seed):
    r = np.random.default_rng(seed)
    a, b = r.standard_normal((3, 3)), r.standard_normal((3, 3))
    assert opnorm(a @ b) <= opnorm(a) * opnorm(b) + 1e-12
