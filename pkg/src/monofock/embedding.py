"""Embeddings of monotone products: nested algebras and completely positive maps.

Two constructions are realized on the module level.

* Nested products. If A_i ⊆ Ã_i, B ⊆ B̃ and ψ̃_i(A_i) ⊆ B, the product module
  E of the (A_i, ψ̃_i|) sits isometrically in the product module Ẽ of the
  (Ã_i, ψ̃_i); the inclusion J intertwines the two representations, so the
  norms of σ(x) and σ̃(x) agree.
* Completely positive maps. For unital CP bimodule maps θ_i: A_i -> D_i with
  ψ_i∘θ_i = φ_i, the modules F_i = A_i ⊗_θ_i E_i with η_i = 1⊗ξ_i and the
  isometries v_i: ζ -> 1⊗ζ assemble into θ(x) = v* σ(x) v on E.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .algebra import (
    AlgebraSpec,
    BimoduleMap,
    BModule,
    CondExpSpec,
    LinearMap,
    _quotient,
    center_of,
    dagger,
    gns_module,
    matrix_units,
    opnorm,
    random_density,
)
from .bimodule import MonotoneBimodule, TupleModule
from .cp import cp_check_gram
from .errors import CompatibilityFail, InvalidCondExp, NotInAlgebra, ShapeMismatch
from .moments import Evaluator, Rules, eval_monotone
from .report import VerificationReport
from .words import (
    Family,
    Letter,
    Member,
    NCPoly,
    Word,
    alternating_patterns,
    random_poly,
    reduce,
    sample_random_word,
)


# ---------------------------------------------------------------------------
# shared plumbing


def raw_map(src: AlgebraSpec, dst: AlgebraSpec) -> np.ndarray:
    """Coordinates in ``dst`` of the basis of ``src`` (literal inclusion)."""
    cols = []
    for x in src.basis:
        cols.append(dst.coords(dst.require(x)))
    return np.stack(cols, axis=1)


def block_map(src: TupleModule, dst: TupleModule, local: Mapping[int, np.ndarray],
              base: np.ndarray) -> np.ndarray:
    """Assemble ⊕_t (u_{t_1}° ⊗ ... ⊗ u_{t_n}° ⊗ base) from maps u_i: E_i -> Ẽ_i.

    Both sides must be indexed by the same tuples. The centered parts are
    u_i° = C̃_i* u_i C_i with C_i the inclusions of E_i° into E_i.
    """
    fs, fd = src.factory, dst.factory
    centered_maps = {i: dagger(fd.centered[i].info["inclusion"]) @ u @ fs.centered[i].info["inclusion"]
                     for i, u in local.items()}
    blocks = {(): base}

    def get(t):
        if t not in blocks:
            Ts, Td = fs.block(t), fd.block(t)
            blocks[t] = Td.proj @ np.kron(centered_maps[t[0]], get(t[1:])) @ Ts.lift
        return blocks[t]

    M = np.zeros((dst.dim, src.dim), dtype=complex)
    for t in src.tuples:
        if t not in dst.index:
            raise ShapeMismatch(f"tuple {t} missing in the target module")
        M[dst.span(t), src.span(t)] = get(t)
    return M


def subalgebra_unit(A: AlgebraSpec) -> np.ndarray:
    """The unit of a (possibly non-unital in the ambient) matrix subalgebra."""
    rows, rhs = [], []
    for y in A.basis:
        rows.append(np.stack([(x @ y).reshape(-1) for x in A.basis], axis=1))
        rhs.append(y.reshape(-1))
        rows.append(np.stack([(y @ x).reshape(-1) for x in A.basis], axis=1))
        rhs.append(y.reshape(-1))
    c, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)
    u = A.element(c)
    if max(opnorm(u @ y - y) + opnorm(y @ u - y) for y in A.basis) > 1e-9:
        raise NotInAlgebra("subalgebra has no unit")
    return u


def pad(A: AlgebraSpec, tol: float = 1e-9) -> tuple:
    """A + C(1 - 1_A); returns (algebra, padded?)."""
    u = subalgebra_unit(A)
    e = np.eye(A.dim) - u
    if opnorm(e) <= tol:
        return A, False
    return AlgebraSpec(np.concatenate([A.basis, e[None]]), name=f"{A.name}+e", check=False), True


# ---------------------------------------------------------------------------
# nested products


@dataclass
class NestedScenario:
    """A_i ⊆ Ã_i and B ⊆ B̃, all realized in one ambient matrix size."""

    small: Mapping[int, AlgebraSpec]
    large: Mapping[int, AlgebraSpec]
    B: AlgebraSpec
    Bt: AlgebraSpec
    psit: Mapping[int, CondExpSpec]
    name: str = ""
    padded: bool = False

    def __post_init__(self):
        dims = {a.dim for a in list(self.small.values()) + list(self.large.values())}
        dims |= {self.B.dim, self.Bt.dim}
        if len(dims) != 1:
            raise ShapeMismatch("nested scenario must use one ambient matrix size")
        if set(self.small) != set(self.large) or set(self.small) != set(self.psit):
            raise ShapeMismatch("index sets differ")

    @property
    def indices(self) -> tuple:
        return tuple(sorted(self.small))

    def padded_version(self) -> "NestedScenario":
        """Unital inclusions: B + C(1 - 1_B) and A_i + C(1 - 1_{A_i})."""
        B, pb = pad(self.B)
        small = {}
        pa = False
        for i, A in self.small.items():
            small[i], p = pad(A)
            pa = pa or p
        return NestedScenario(small, self.large, B, self.Bt, self.psit, self.name, pb or pa or self.padded)

    def large_family(self) -> Family:
        return Family(Member(i, self.large[i], self.psit[i]) for i in self.indices)

    def small_family(self) -> Family:
        members = []
        for i in self.indices:
            A, pt = self.small[i], self.psit[i]
            for x in A.basis:
                if not self.B.contains(pt(x), 1e-9):
                    raise InvalidCondExp(f"psi~_{i} does not map A_{i} into B")
            f = lambda a, pt=pt: self.B.project(pt(a))
            members.append(Member(i, A, CondExpSpec.from_function(A, self.B, f)))
        return Family(members)


@dataclass
class NestedEmbedding:
    scenario: NestedScenario
    small: MonotoneBimodule
    large: MonotoneBimodule
    J: np.ndarray
    family: Family

    def sigma(self, x) -> np.ndarray:
        return _poly_operator(self.small, x)

    def sigma_t(self, x) -> np.ndarray:
        return _poly_operator(self.large, x)


def _poly_operator(M: MonotoneBimodule, x) -> np.ndarray:
    if isinstance(x, Word):
        return M.word_operator(x)
    out = np.zeros((M.dim, M.dim), dtype=complex)
    for w in x.terms:
        out = out + M.word_operator(w)
    return out


def _unital(A: AlgebraSpec) -> bool:
    return A.contains(np.eye(A.dim))


def nested_embedding(sc: NestedScenario) -> NestedEmbedding:
    """Build E ⊆ Ẽ with the inclusion J, padding non-unital inclusions first."""
    if not (_unital(sc.B) and all(_unital(A) for A in sc.small.values())):
        sc = sc.padded_version()
    fam = sc.small_family()
    famt = sc.large_family()
    small = MonotoneBimodule({m.index: gns_module(m.algebra, m.psi) for m in fam}, family=fam)
    large = MonotoneBimodule({m.index: gns_module(m.algebra, m.psi) for m in famt}, family=famt)
    local = {}
    for i in sc.indices:
        E, Et = small.factory.modules[i], large.factory.modules[i]
        local[i] = Et.proj @ raw_map(sc.small[i], sc.large[i]) @ E.lift
    b, bt = small.factory.base, large.factory.base
    base = bt.proj @ raw_map(sc.B, sc.Bt) @ b.lift
    J = block_map(small, large, local, base)
    return NestedEmbedding(sc, small, large, J, fam)


def verify_nested(sc: NestedScenario, rng: np.random.Generator, n_polys: int = 50,
                  n_words: int = 100, maxlen: int = 5, tol: float = 1e-9, norm_tol: float = 1e-7,
                  report: Optional[VerificationReport] = None, prefix: str = "nested") -> VerificationReport:
    """Checks of the embedding E ⊆ Ẽ and of the norm equality ||σ(x)|| = ||σ̃(x)||."""
    report = report or VerificationReport("embedding")
    N = nested_embedding(sc)
    fam, J = N.family, N.J
    padded = N.scenario.padded
    report.add(f"{prefix}-isometry", "E ⊆ Ẽ as a submodule", "residual",
               opnorm(dagger(J) @ J - np.eye(J.shape[1])), tol, dim_E=N.small.dim, dim_Et=N.large.dim,
               padded=padded)
    report.add(f"{prefix}-vacuum", "J xi = xi~", "residual", float(np.linalg.norm(J @ N.small.xi - N.large.xi)), tol)
    inter = 0.0
    for m in fam:
        for x in m.algebra.basis:
            inter = max(inter, opnorm(N.large.j(m.index, x) @ J - J @ N.small.j(m.index, x)))
    report.add(f"{prefix}-intertwining", "σ̃(a) J = J σ(a): E is invariant and σ̃|E = σ", "residual", inter, tol)
    words = [sample_random_word(rng, maxlen, fam) for _ in range(n_words)]
    mom = 0.0
    oracle = 0.0
    for w in words:
        lhs = N.large.moment(w)
        rhs = N.small.moment(w)
        mom = max(mom, opnorm(lhs - rhs))
        oracle = max(oracle, opnorm(rhs - eval_monotone(w, fam)))
    report.add(f"{prefix}-moments", "ψ̃∘σ̃ = ψ∘σ on words (the diagram commutes)", "residual", mom, tol,
               words=n_words)
    report.add(f"{prefix}-oracle", "ψ∘σ agrees with the recursive monotone moment", "residual", oracle, tol)
    dev, below = 0.0, 0.0
    for _ in range(n_polys):
        x = random_poly(rng, fam, 4, 3)
        s = float(np.linalg.norm(N.sigma(x), 2))
        st = float(np.linalg.norm(N.sigma_t(x), 2))
        dev = max(dev, abs(st - s))
        below = max(below, s - st)
    report.add(f"{prefix}-norms", "||σ(x)|| = ||σ̃(x)|| on random polynomials", "max_deviation", dev, norm_tol,
               polys=n_polys)
    report.add(f"{prefix}-norm-lower", "||σ̃(x)|| >= ||σ(x)||", "max_shortfall", below, 1e-12)
    return report


def tensor_nested_scenario(rng: np.random.Generator, indices=(1, 2), d: int = 2,
                           k: int = 2) -> NestedScenario:
    """A_i = M_d ⊗ 1 ⊂ Ã_i = M_{dk}, B = C ⊂ B̃ = 1 ⊗ D_k.

    ψ̃_i(X) = 1 ⊗ Δ((tr_ρ_i ⊗ id) X) with a full-rank density ρ_i; it maps
    A_i into B.
    """

    n = d * k
    small_basis = [np.kron(u, np.eye(k)) for u in matrix_units(d)]
    Bt_basis = [np.kron(np.eye(d), np.diag(np.eye(k)[r])) for r in range(k)]
    B = AlgebraSpec([np.eye(n)], name="C", check=False)
    Bt = AlgebraSpec(Bt_basis, name=f"1⊗D{k}", check=False)
    small, large, psit = {}, {}, {}
    for i in indices:
        rho = random_density(d, rng)
        small[i] = AlgebraSpec(small_basis, name=f"M{d}⊗1", check=False)
        large[i] = AlgebraSpec.full(n)

        def f(X, rho=rho):
            part = np.einsum("ab,bjak->jk", rho, X.reshape(d, k, d, k))
            return np.kron(np.eye(d), np.diag(np.diag(part)))

        psit[i] = CondExpSpec.from_function(large[i], Bt, f)
    return NestedScenario(small, large, B, Bt, psit, name="tensor")


def corner_nested_scenario(rng: np.random.Generator, indices=(1, 2, 3), d: int = 2) -> NestedScenario:
    """Non-unital inclusions: A_i = M_d ⊕ 0 ⊂ Ã_i = M_{d+1}, B = C(1_d ⊕ 0).

    B̃ = span{1_d ⊕ 0, 0 ⊕ 1} and ψ̃_i(X) = tr(ρ_i X_11)(1_d ⊕ 0) + X_22 (0 ⊕ 1).
    """

    n = d + 1
    P = np.diag([1.0] * d + [0.0]).astype(complex)
    e = np.eye(n) - P
    small_basis = []
    for u in matrix_units(d):
        m = np.zeros((n, n), dtype=complex)
        m[:d, :d] = u
        small_basis.append(m)
    B = AlgebraSpec([P], name="C·p", check=False)
    Bt = AlgebraSpec([P, e], name="C⊕C", check=False)
    small, large, psit = {}, {}, {}
    for i in indices:
        rho = random_density(d, rng)
        small[i] = AlgebraSpec(small_basis, name=f"M{d}⊕0", check=False)
        large[i] = AlgebraSpec.full(n)
        f = lambda X, rho=rho: np.trace(rho @ X[:d, :d]) * P + X[d, d] * e
        psit[i] = CondExpSpec.from_function(large[i], Bt, f)
    return NestedScenario(small, large, B, Bt, psit, name="corner")


def trivial_nested_scenario(family: Family) -> NestedScenario:
    """Ã_i = A_i and B̃ = B (scalars are realized as multiples of the identity)."""
    alg = {m.index: m.algebra for m in family}
    d = next(iter(alg.values())).dim
    if family.B.dim == d:
        return NestedScenario(alg, alg, family.B, family.B, {m.index: m.psi for m in family}, name="trivial")
    if not family.scalar:
        raise ShapeMismatch("B must be realized in the ambient matrix size")
    B = AlgebraSpec.scalars(d)
    psit = {m.index: CondExpSpec.from_function(m.algebra, B, lambda a, p=m.psi: p(a)[0, 0] * np.eye(d))
            for m in family}
    return NestedScenario(alg, alg, B, B, psit, name="trivial")


# ---------------------------------------------------------------------------
# completely positive maps


def cp_tensor(A: AlgebraSpec, theta: BimoduleMap, E: BModule) -> tuple:
    """F = A ⊗_θ E with <a⊗ζ, a'⊗ζ'> = <ζ, θ(a*a') ζ'>, and v: ζ -> 1⊗ζ.

    Returns (F, v). F carries the left A-action by multiplication and
    eta = 1⊗xi as distinguished vector.
    """
    nA, nE = A.size, E.n
    raw = np.zeros((nA, nE, nA, nE, E.right.dim, E.right.dim), dtype=complex)
    for p, x in enumerate(A.basis):
        for q, y in enumerate(A.basis):
            P = E.act(theta(dagger(x) @ y))
            raw[p, :, q] = np.einsum("ut,suab->stab", P, E.gram)
    raw = raw.reshape(nA * nE, nA * nE, E.right.dim, E.right.dim)
    lift, proj, gram = _quotient(raw)
    eye_A, eye_E = np.eye(nA), np.eye(nE)
    left_action = np.stack([proj @ np.kron(A.left_mult(x), eye_E) @ lift for x in A.basis])
    right_action = np.stack([proj @ np.kron(eye_A, R) @ lift for R in E.right_action])
    B = E.balg
    bleft = np.stack([proj @ np.kron(A.left_mult(theta.b_source(b)), eye_E) @ lift for b in B.basis])
    one = A.coords(A.identity)
    xi = proj @ np.kron(one, E.xi)
    F = BModule(gram, E.right, right_action, balg=B, bleft=bleft, left=A, left_action=left_action,
                xi=xi, lift=lift, proj=proj)
    v = proj @ np.kron(one[:, None], eye_E)
    return F, v


SUFFIX_CACHE = 256


class _OperatorRules(Rules):
    """Monotone product of the maps a -> j_i(θ_i(a)) into operators on E."""

    def __init__(self, family: Family, E: MonotoneBimodule, thetas: Mapping[int, BimoduleMap]):
        super().__init__(family)
        self.monotone = False
        self.E = E
        self.maps = dict(thetas)

    def theta(self, i, x):
        return self.E.j(i, self.maps[i](x))

    def embed_D(self, b):
        return self.E.left_b(b)

    @property
    def unit_D(self):
        return np.eye(self.E.dim, dtype=complex)


@dataclass
class CPEmbedding:
    """θ(x) = v* σ(x) v for the product of unital CP bimodule maps."""

    family_A: Family      # (A_i, φ_i)
    family_D: Family      # (D_i, ψ_i)
    thetas: Mapping[int, BimoduleMap]
    E: MonotoneBimodule   # product of GNS(D_i, ψ_i)
    F: MonotoneBimodule   # product of A_i ⊗_θ_i E_i
    v: np.ndarray
    local_v: Mapping[int, np.ndarray] = field(default_factory=dict)
    _suffix: OrderedDict = field(default_factory=OrderedDict, repr=False)

    def sigma(self, w: Word) -> np.ndarray:
        return self.F.word_operator(w)

    def __call__(self, x) -> np.ndarray:
        if isinstance(x, NCPoly):
            out = np.zeros((self.E.dim, self.E.dim), dtype=complex)
            for w in x.terms:
                out = out + self(w)
            return out
        w = reduce(x, self.family_A)
        return w.coeff * (dagger(self.v) @ self._apply(w.letters))

    def _apply(self, letters: tuple) -> np.ndarray:
        """σ(letters) v, reusing cached suffixes."""
        keys = [b"".join(np.int64(l.index).tobytes() + l.element.tobytes() for l in letters[k:])
                for k in range(len(letters))]
        m, start = self.v, len(letters)
        for k, key in enumerate(keys):
            hit = self._suffix.get(key)
            if hit is not None:
                self._suffix.move_to_end(key)
                m, start = hit, k
                break
        for k in range(start - 1, -1, -1):
            l = letters[k]
            m = self.F.j(l.index, l.element) @ m
            self._suffix[keys[k]] = m
            if len(self._suffix) > SUFFIX_CACHE:
                self._suffix.popitem(last=False)
        return m

    def j_D(self, i: int, d: np.ndarray) -> np.ndarray:
        return self.E.j(i, d)

    def recursive(self, w: Word) -> np.ndarray:
        """Monotone product of the θ_i evaluated by the recursion rules."""
        w = reduce(w, self.family_A)
        rules = _OperatorRules(self.family_A, self.E, self.thetas)
        return w.coeff * Evaluator(rules)(tuple((l.index, l.element) for l in w.letters))


def build_cp_embedding(algebras: Mapping[int, AlgebraSpec], family_D: Family,
                       thetas: Mapping[int, BimoduleMap],
                       phis: Optional[Mapping[int, CondExpSpec]] = None,
                       tol: float = 1e-9) -> CPEmbedding:
    """Construct θ on the product of the (A_i, φ_i) with φ_i = ψ_i∘θ_i."""
    B = family_D.B
    members = []
    for m in family_D:
        i = m.index
        A, th = algebras[i], thetas[i]
        if th.target.dim != m.algebra.dim or th.source.dim != A.dim:
            raise ShapeMismatch(f"theta_{i} does not map A_{i} into D_{i}")
        comp = LinearMap(m.psi.map.matrix @ th.map.matrix, A.dim, B.dim)
        if phis is not None:
            phi = phis[i]
            gap = float(np.abs(phi.map.matrix - comp.matrix).max())
            if gap > tol:
                raise CompatibilityFail(f"psi_{i}∘theta_{i} differs from phi_{i} by {gap:.3e}")
        else:
            phi = CondExpSpec(A, B, th.b_source, comp)
        members.append(Member(i, A, phi, theta=th))
    family_A = Family(members)
    E = MonotoneBimodule({m.index: gns_module(m.algebra, m.psi) for m in family_D}, family=family_D)
    Fmods, local = {}, {}
    for m in family_A:
        Fmods[m.index], local[m.index] = cp_tensor(m.algebra, thetas[m.index], E.factory.modules[m.index])
    F = MonotoneBimodule(Fmods, family=family_A)
    base = np.eye(E.factory.base.n, dtype=complex)
    v = block_map(E, F, local, base)
    return CPEmbedding(family_A, family_D, dict(thetas), E, F, v, local)


def _peak_reduced(w: Word, l: int, family: Family) -> Word:
    """a_1 ... a_{l-1} φ(a_l) a_{l+1} ... a_n with the B-element absorbed on the left."""
    ls = list(w.letters)
    b = family[ls[l].index].psi(ls[l].element)
    left = ls[l - 1]
    ls[l - 1] = Letter(left.index, left.element @ family[left.index].psi.embed(b))
    del ls[l]
    return reduce(ls, family, coeff=w.coeff)


def property_residuals(C: CPEmbedding, w: Word) -> dict:
    """Residuals of the three factorization properties applicable to w."""
    fam = C.family_A
    w = reduce(w, fam)
    idx = w.indices
    n = len(idx)
    out = {"first": 0.0, "last": 0.0, "peak": 0.0}
    if n < 2:
        return out
    full = C(w)
    if idx[0] > idx[1]:
        out["first"] = opnorm(full - C(Word(w.letters[:1])) @ C(Word(w.letters[1:], w.coeff)))
    if idx[-1] > idx[-2]:
        out["last"] = opnorm(full - C(Word(w.letters[:-1], w.coeff)) @ C(Word(w.letters[-1:])))
    for l in range(1, n - 1):
        if idx[l - 1] < idx[l] > idx[l + 1]:
            out["peak"] = max(out["peak"], opnorm(full - C(_peak_reduced(w, l, fam))))
    return out


def verify_cp_embedding(C: CPEmbedding, rng: np.random.Generator, max_len: int = 4, n_random: int = 100,
                        random_len: int = 6, gram_rounds: int = 50, tol: float = 1e-9,
                        eig_tol: float = 1e-8, report: Optional[VerificationReport] = None,
                        prefix: str = "cp-embedding") -> VerificationReport:
    report = report or VerificationReport("embedding")
    fam = C.family_A
    E = C.E
    vloc = 0.0
    cent = 0.0
    for i, vi in C.local_v.items():
        vloc = max(vloc, opnorm(dagger(vi) @ vi - np.eye(vi.shape[1])))
        Fi, Ei = C.F.factory.modules[i], E.factory.modules[i]
        S = center_of(Fi)
        off = vi @ center_of(Ei)
        cent = max(cent, opnorm(off - S @ (dagger(S) @ off)))
    report.add(f"{prefix}-local-isometry", "v_i* v_i = 1", "residual", vloc, tol)
    report.add(f"{prefix}-local-centered", "v_i(E_i°) ⊆ F_i°", "residual", cent, tol)
    report.add(f"{prefix}-isometry", "v* v = 1 and v xi = eta", "residual",
               max(opnorm(dagger(C.v) @ C.v - np.eye(E.dim)),
                   float(np.linalg.norm(C.v @ E.xi - C.F.xi))), tol, dim_E=E.dim, dim_F=C.F.dim)
    restr = 0.0
    for m in fam:
        for _ in range(4):
            a = m.algebra.random_element(rng)
            restr = max(restr, opnorm(C(Word(((m.index, a),))) - C.j_D(m.index, C.thetas[m.index](a))))
    report.add(f"{prefix}-restriction", "θ restricted to A_i is θ_i", "residual", restr, tol)

    words = [Word(tuple(Letter(i, fam[i].algebra.random_element(rng)) for i in p))
             for p in alternating_patterns(fam.indices, max_len)]
    words += [sample_random_word(rng, random_len, fam) for _ in range(n_random)]
    compat = rec = 0.0
    props = {"first": 0.0, "last": 0.0, "peak": 0.0}
    bim = 0.0
    B = fam.B
    for w in words:
        t = C(w)
        compat = max(compat, opnorm(E.vacuum_expectation(t) - eval_monotone(w, fam)))
        rec = max(rec, opnorm(t - C.recursive(w)))
        for k, val in property_residuals(C, w).items():
            props[k] = max(props[k], val)
        b1, b2 = B.random_element(rng), B.random_element(rng)
        ls = list(w.letters)
        ls[0] = Letter(ls[0].index, fam[ls[0].index].psi.embed(b1) @ ls[0].element)
        ls[-1] = Letter(ls[-1].index, ls[-1].element @ fam[ls[-1].index].psi.embed(b2))
        bim = max(bim, opnorm(C(Word(tuple(ls), w.coeff)) - E.left_b(b1) @ t @ E.left_b(b2)))
    n = len(words)
    report.add(f"{prefix}-compatibility", "ψ∘θ = φ on words", "residual", compat, tol, words=n)
    report.add(f"{prefix}-first", "θ(a_1...a_n) = θ(a_1)θ(a_2...a_n) if i_1 > i_2", "residual",
               props["first"], tol, words=n)
    report.add(f"{prefix}-last", "θ(a_1...a_n) = θ(a_1...a_{n-1})θ(a_n) if i_n > i_{n-1}", "residual",
               props["last"], tol, words=n)
    report.add(f"{prefix}-peak", "θ(...a_l...) = θ(...φ(a_l)...) at an interior peak", "residual",
               props["peak"], tol, words=n)
    report.add(f"{prefix}-recursion", "θ equals the monotone product of the θ_i", "residual", rec, tol, words=n)
    report.add(f"{prefix}-bimodule", "θ(b w b') = b θ(w) b'", "residual", bim, tol)
    report.add(f"{prefix}-unital", "θ(1) = 1", "residual", opnorm(C(Word()) - np.eye(E.dim)), tol)
    g = cp_check_gram(C, fam, E.dim, gram_rounds, rng, m_max=6, maxlen=3)
    report.add(f"{prefix}-gram", "θ is completely positive (Gram blocks)", "min_eigenvalue", g["min"], -eig_tol,
               sense="ge", rounds=gram_rounds)
    return report
