"""Monotone and free products of Hilbert bimodules over a common algebra B.

Given pointed modules (E_i, xi_i) with E_i = xi_i B ⊕ E_i°, the monotone
product is

    E = xi B  ⊕  ⊕_{i_1 > ... > i_n}  E_{i_1}° ⊗_B ... ⊗_B E_{i_n}°

and an operator T on E_k acts on E through V_k: E -> E_k ⊗_B E(k-1),
j_k(T) = V_k* (T ⊗ 1) V_k. The same machinery with merely alternating tuples
gives the (truncated) free product module.

Every block is a BModule built by iterated ``tensor_over_B``; blocks are
orthogonal, so the coordinates of E are the concatenated block coordinates.
"""
from __future__ import annotations

import itertools
from collections import OrderedDict
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .algebra import (
    AlgebraSpec,
    BModule,
    SCALARS,
    center_of,
    centered,
    dagger,
    gns_module,
    opnorm,
    tensor_over_B,
    unit_module,
)
from .errors import (
    DegenerateChoice,
    DepthExceeded,
    EmptyFamily,
    MixedB,
    NotInImage,
    ShapeMismatch,
    UnknownIndex,
)
from .moments import eval_monotone, local_peaks
from .report import VerificationReport
from .words import Family, Letter, Word, center, reduce


CACHE_SIZE = 64


class BlockFactory:
    """Builds and caches E_{t_1}° ⊗_B ... ⊗_B E_{t_n}° ⊗_B base."""

    def __init__(self, modules: Mapping[int, BModule], base: BModule):
        if not modules:
            raise EmptyFamily("no modules given")
        B = base.balg
        for i, E in modules.items():
            if not E.right.same_as(B):
                raise MixedB(f"module {i} is not over the common algebra")
            if E.xi is None:
                raise ShapeMismatch(f"module {i} has no distinguished vector")
        self.modules = dict(modules)
        self.base = base
        self.B = B
        self.centered = {i: centered(E) for i, E in self.modules.items()}
        self._blocks = {(): base}
        self._creations = {}

    def block(self, t: tuple) -> BModule:
        got = self._blocks.get(t)
        if got is None:
            got = tensor_over_B(self.centered[t[0]], self.block(t[1:]))
            self._blocks[t] = got
        return got

    def creation(self, k: int, X: tuple, with_tail: bool):
        """(T, V) with T = E_k ⊗ block(X) and V: block(X) ⊕ block((k,)+X) -> T.

        V = [x -> xi_k ⊗ x | the inclusion of E_k° ⊗ block(X)]; it is unitary
        when the tail block is present.
        """
        key = (k, X, with_tail)
        got = self._creations.get(key)
        if got is not None:
            return got
        E = self.modules[k]
        Xb = self.block(X)
        T = tensor_over_B(E, Xb)
        eye = np.eye(Xb.n, dtype=complex)
        parts = [T.proj @ np.kron(E.xi[:, None], eye)]
        if with_tail:
            Y = self.block((k,) + X)
            parts.append(T.proj @ np.kron(center_of(E), eye) @ Y.lift)
        V = np.hstack(parts) if parts[0].size or len(parts) > 1 else parts[0]
        got = (T, V)
        self._creations[key] = got
        return got


class TupleModule:
    """Direct sum of blocks indexed by a finite set of index tuples."""

    def __init__(self, factory: BlockFactory, tuples: Sequence[tuple]):
        self.factory = factory
        self.tuples = list(tuples)
        self.index = {t: n for n, t in enumerate(self.tuples)}
        self.offsets = {}
        off = 0
        for t in self.tuples:
            self.offsets[t] = off
            off += factory.block(t).n
        self.dim = off

    @property
    def B(self) -> AlgebraSpec:
        return self.factory.B

    @property
    def indices(self) -> tuple:
        return tuple(sorted(self.factory.modules))

    def block(self, t: tuple) -> BModule:
        return self.factory.block(t)

    def span(self, t: tuple) -> slice:
        o = self.offsets[t]
        return slice(o, o + self.block(t).n)

    def mask(self, pred: Callable[[tuple], bool]) -> np.ndarray:
        m = np.zeros(self.dim, dtype=bool)
        for t in self.tuples:
            if pred(t):
                m[self.span(t)] = True
        return m

    def _place(self, M: np.ndarray, k: int, A: np.ndarray, X: tuple) -> None:
        Y = (k,) + X
        has_tail = Y in self.index
        T, V = self.factory.creation(k, X, has_tail)
        nX = self.block(X).n
        if V.size == 0:
            return
        local = dagger(V) @ T.push(np.kron(A, np.eye(nX))) @ V
        idx = np.r_[np.arange(self.span(X).start, self.span(X).stop),
                    np.arange(self.span(Y).start, self.span(Y).stop) if has_tail else np.array([], int)]
        M[np.ix_(idx, idx)] = local

    def lift(self, k: int, A: np.ndarray, sources: Iterable[tuple]) -> np.ndarray:
        """Operator acting as V*(A ⊗ 1)V on block(X) ⊕ block((k,)+X) for X in sources."""
        M = np.zeros((self.dim, self.dim), dtype=complex)
        for X in sources:
            self._place(M, k, A, X)
        return M

    def left_b(self, b: np.ndarray) -> np.ndarray:
        """Left action of b in B, block by block."""
        M = np.zeros((self.dim, self.dim), dtype=complex)
        for t in self.tuples:
            s = self.span(t)
            M[s, s] = self.block(t).act_b(b)
        return M

    def right_b(self, b: np.ndarray) -> np.ndarray:
        M = np.zeros((self.dim, self.dim), dtype=complex)
        for t in self.tuples:
            s = self.span(t)
            M[s, s] = self.block(t).ract(b)
        return M

    def inner(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """B-valued inner product, linear in the second variable."""
        d = self.factory.base.right.dim
        out = np.zeros((d, d), dtype=complex)
        for t in self.tuples:
            s = self.span(t)
            if s.stop > s.start:
                out = out + self.block(t).inner(x[s], y[s])
        return out

    def gram_positivity(self) -> float:
        worst = np.inf
        for t in self.tuples:
            Bk = self.block(t)
            if Bk.n:
                worst = min(worst, Bk.check()["positivity"])
        return float(worst)


class MonotoneBimodule(TupleModule):
    """Monotone product of pointed bimodules (strictly decreasing tuples)."""

    def __init__(self, modules: Mapping[int, BModule], base: Optional[BModule] = None,
                 family: Optional[Family] = None):
        modules = dict(modules)
        if not modules:
            raise EmptyFamily("no modules given")
        B = next(iter(modules.values())).right
        factory = BlockFactory(modules, base or unit_module(B))
        idx = sorted(modules, reverse=True)
        tuples = [()] + [t for n in range(1, len(idx) + 1) for t in itertools.combinations(idx, n)]
        super().__init__(factory, tuples)
        self.family = family
        self._cache: OrderedDict = OrderedDict()
        self._basis_ops = {}

    @property
    def xi(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.span(())] = self.factory.base.xi
        return v

    def sub_mask(self, k: float) -> np.ndarray:
        """E(k): xi B and tuples starting at or below k."""
        return self.mask(lambda t: not t or t[0] <= k)

    def j_op(self, k: int, A: np.ndarray) -> np.ndarray:
        """j_k(A) = V_k*(A ⊗ 1)V_k for an adjointable operator A on E_k."""
        if k not in self.factory.modules:
            raise UnknownIndex(f"index {k} not in {self.indices}")
        sources = [X for X in self.tuples if not X or X[0] < k]
        return self.lift(k, A, sources)

    def j(self, k: int, a: np.ndarray) -> np.ndarray:
        if k not in self.factory.modules:
            raise UnknownIndex(f"index {k} not in {self.indices}")
        key = (k, a.tobytes())
        got = self._cache.get(key)
        if got is not None:
            self._cache.move_to_end(key)
        else:
            E = self.factory.modules[k]
            basis = self._basis_ops.get(k)
            if basis is None:
                basis = np.stack([self.j_op(k, L) for L in E.left_action])
                self._basis_ops[k] = basis
            got = np.tensordot(E.left.coords(E.left.require(a)), basis, axes=1)
            self._cache[key] = got
            if len(self._cache) > CACHE_SIZE:
                self._cache.popitem(last=False)
        return got

    def word_operator(self, w: Word) -> np.ndarray:
        m = np.eye(self.dim, dtype=complex)
        for l in w.letters:
            m = m @ self.j(l.index, l.element)
        return w.coeff * m

    def vacuum_expectation(self, T: np.ndarray) -> np.ndarray:
        """psi(T) = <xi, T xi> in B."""
        return self.inner(self.xi, T @ self.xi)

    def moment(self, w: Word) -> np.ndarray:
        v = self.xi
        for l in reversed(w.letters):
            v = self.j(l.index, l.element) @ v
        return w.coeff * self.inner(self.xi, v)


def build_monotone_bimodule(family: Family) -> MonotoneBimodule:
    """Monotone product of L^2(A_i, psi_i) over the family's B."""
    modules = {m.index: gns_module(m.algebra, m.psi) for m in family}
    return MonotoneBimodule(modules, family=family)


# free product module -----------------------------------------------------------


def alternating_tuples(indices: Sequence[int], depth: int) -> list:
    out = [()]
    frontier = [()]
    for _ in range(depth):
        nxt = [(i,) + t for t in frontier for i in indices if not t or t[0] != i]
        out.extend(nxt)
        frontier = nxt
    return out


class FreeBimodule:
    """The free product of pointed bimodules, truncated at tensor length n_max.

    Operators are applied to vectors block by block (the space grows
    quickly). Applying a letter to a vector with weight on tuples of length
    n_max raises DepthExceeded, so every returned value is exact.
    """

    def __init__(self, modules: Mapping[int, BModule], n_max: int,
                 monotone: Optional[MonotoneBimodule] = None):
        modules = dict(modules)
        B = next(iter(modules.values())).right
        self.factory = monotone.factory if monotone is not None else BlockFactory(modules, unit_module(B))
        self.indices = tuple(sorted(modules))
        self.n_max = n_max
        self.tuples = alternating_tuples(self.indices, n_max)
        self.tupleset = set(self.tuples)

    def block(self, t: tuple) -> BModule:
        return self.factory.block(t)

    def vacuum(self) -> dict:
        return {(): self.factory.base.xi.copy()}

    def _check_depth(self, vec: dict, tol: float = 0.0) -> None:
        for t, v in vec.items():
            if len(t) >= self.n_max and np.linalg.norm(v) > tol:
                raise DepthExceeded(f"vector reaches tensor length {len(t)} = n_max")

    def lam(self, k: int, A: np.ndarray, vec: dict, kill_above: bool) -> dict:
        """The free-product action of A on E_k; with kill_above the input is first
        restricted to the tuples starting at or below k (u_k = lambda_k P)."""
        if k not in self.factory.modules:
            raise UnknownIndex(f"index {k} not in {self.indices}")
        self._check_depth(vec)
        out: dict = {}
        done = set()
        for t in list(vec):
            X = t[1:] if t and t[0] == k else t
            if X in done:
                continue
            done.add(X)
            Y = (k,) + X
            nX, nY = self.block(X).n, self.block(Y).n
            vX = vec.get(X)
            if vX is None or (kill_above and X and X[0] > k):
                vX = np.zeros(nX, dtype=complex)
            vY = vec.get(Y, np.zeros(nY, dtype=complex))
            T, V = self.factory.creation(k, X, True)
            local = dagger(V) @ T.push(np.kron(A, np.eye(nX))) @ V
            r = local @ np.concatenate([vX, vY])
            out[X] = out.get(X, 0) + r[:nX]
            out[Y] = out.get(Y, 0) + r[nX:]
        return out

    def u(self, k: int, a: np.ndarray, vec: dict) -> dict:
        return self.lam(k, self.factory.modules[k].act(a), vec, kill_above=True)

    def apply_word(self, w: Word, vec: dict) -> dict:
        for l in reversed(w.letters):
            vec = self.u(l.index, l.element, vec)
        return {t: w.coeff * v for t, v in vec.items()}

    def inner(self, x: dict, y: dict) -> np.ndarray:
        d = self.factory.base.right.dim
        out = np.zeros((d, d), dtype=complex)
        for t, v in x.items():
            if t in y and self.block(t).n:
                out = out + self.block(t).inner(v, y[t])
        return out

    def norm(self, x: dict) -> float:
        return float(np.sqrt(max(0.0, sum(float(np.vdot(v, v).real) for v in x.values()))))

    def moment(self, w: Word) -> np.ndarray:
        return self.inner(self.vacuum(), self.apply_word(w, self.vacuum()))

    def simple_tensor(self, t: tuple, vectors: Sequence[np.ndarray]) -> dict:
        """zeta_1 ⊗ ... ⊗ zeta_n ⊗ xi with zeta_s in E_{t_s}° coordinates."""
        y = self.factory.base.xi
        for s in range(len(t) - 1, -1, -1):
            y = self.block(t[s:]).proj @ np.kron(vectors[s], y)
        return {t: y}

    def from_monotone(self, M: MonotoneBimodule, x: np.ndarray) -> dict:
        return {t: x[M.span(t)].copy() for t in M.tuples}

    def to_monotone(self, M: MonotoneBimodule, vec: dict, tol: float = 1e-12) -> tuple:
        """Coordinates on the decreasing tuples and the norm of the rest."""
        x = np.zeros(M.dim, dtype=complex)
        rest = 0.0
        for t, v in vec.items():
            if t in M.index:
                x[M.span(t)] = v
            else:
                rest += float(np.vdot(v, v).real)
        return x, float(np.sqrt(rest))


def build_free_bimodule(family: Family, n_max: int, monotone: Optional[MonotoneBimodule] = None):
    modules = monotone.factory.modules if monotone is not None else {
        m.index: gns_module(m.algebra, m.psi) for m in family}
    return FreeBimodule(modules, n_max, monotone)


# verifiers ----------------------------------------------------------------------


def _bnorm(x: np.ndarray) -> float:
    return opnorm(x)


def verify_monotone_rules(M: MonotoneBimodule, family: Family, words: Sequence[Word],
                          tol: float = 1e-9, report: Optional[VerificationReport] = None) -> VerificationReport:
    """B-valued vacuum moments against the three monotone rules and the evaluator."""
    report = report or VerificationReport("bimodule")
    res = {"first": 0.0, "last": 0.0, "interior": 0.0, "evaluator": 0.0}
    counts = dict.fromkeys(res, 0)
    for w in words:
        w = reduce(w, family)
        lhs = M.moment(w)
        res["evaluator"] = max(res["evaluator"], _bnorm(lhs - eval_monotone(w, family)))
        counts["evaluator"] += 1
        ls, n = w.letters, len(w.letters)
        if n < 2:
            continue
        for k in local_peaks(list(w.indices)):
            m = family[ls[k].index]
            b = m.psi(ls[k].element)
            if k == 0:
                rhs = b @ M.moment(Word(ls[1:], w.coeff))
                key = "first"
            elif k == n - 1:
                rhs = M.moment(Word(ls[:-1], w.coeff)) @ b
                key = "last"
            else:
                prev = ls[k - 1]
                shrunk = ls[:k - 1] + (Letter(prev.index, prev.element @ family[prev.index].psi.embed(b)),) + ls[k + 1:]
                rhs = M.moment(reduce(Word(shrunk, w.coeff), family))
                key = "interior"
            res[key] = max(res[key], _bnorm(lhs - rhs))
            counts[key] += 1
    anchors = {"first": "monotone rule (a): i_1 > i_2",
               "last": "monotone rule (c): i_n > i_{n-1}",
               "interior": "monotone rule (b): interior peak",
               "evaluator": "vacuum expectation = recursive monotone evaluator"}
    for key, val in res.items():
        report.add(f"monotone-{key}", anchors[key], "residual", val, tol, checked=counts[key])
    return report


def verify_structure(M: MonotoneBimodule, family: Family, rng: np.random.Generator,
                     tol: float = 1e-9, report: Optional[VerificationReport] = None) -> VerificationReport:
    """j_k multiplicative and *-preserving, psi o j_k = psi_k, j_k(1) = 1 on E(k)."""
    report = report or VerificationReport("bimodule")
    mul = star = vac = unit = 0.0
    for k in M.indices:
        A = family[k].algebra
        a, b = A.random_element(rng), A.random_element(rng)
        ja, jb = M.j(k, a), M.j(k, b)
        mul = max(mul, opnorm(M.j(k, a @ b) - ja @ jb))
        star = max(star, opnorm(M.j(k, dagger(a)) - dagger(ja)))
        vac = max(vac, _bnorm(M.vacuum_expectation(ja) - family[k].psi(a)))
        P = np.diag(M.sub_mask(k).astype(complex))
        unit = max(unit, opnorm(M.j(k, A.identity) - P))
    report.add("j-multiplicative", "j_k(ab) = j_k(a) j_k(b)", "residual", mul, tol)
    report.add("j-star", "j_k(a*) = j_k(a)*", "residual", star, tol)
    report.add("vacuum-single", "psi(j_k(a)) = psi_k(a)", "residual", vac, tol)
    report.add("j-unit", "j_k(1) is the projection onto E(k)", "residual", unit, tol)
    return report


def verify_peak_identity(M: MonotoneBimodule, family: Family, patterns: Sequence[tuple],
                         rng: np.random.Generator, tol: float = 1e-9, control_min: float = 1e-3,
                         samples: int = 3, report: Optional[VerificationReport] = None) -> VerificationReport:
    """a_1 a_2 a_3 = a_1 psi(a_2) a_3 as operators when k_1 < k_2 > k_3.

    Non-peak patterns are run as a negative control: their largest deviation
    must exceed ``control_min``. Also checks ab = a psi(b) on the complement of
    E_l° ⊗ E(l-1) for k < l.
    """
    report = report or VerificationReport("bimodule")
    peak = 0.0
    control = 0.0
    n_peak = n_ctrl = 0
    for p in patterns:
        for _ in range(samples):
            xs = [family[i].algebra.random_element(rng) for i in p]
            ops = [M.j(i, x) for i, x in zip(p, xs)]
            lhs = ops[0] @ ops[1] @ ops[2]
            rhs = ops[0] @ M.left_b(family[p[1]].psi(xs[1])) @ ops[2]
            d = opnorm(lhs - rhs)
            if p[0] < p[1] > p[2]:
                peak = max(peak, d)
                n_peak += 1
            else:
                control = max(control, d)
                n_ctrl += 1
    report.add("peak-identity", "a1 a2 a3 = a1 psi(a2) a3 for k1 < k2 > k3", "residual", peak, tol,
               checked=n_peak)
    if n_ctrl:
        report.add("peak-control", "non-peak patterns violate the identity", "max_deviation",
                   control, control_min, sense="ge", checked=n_ctrl)
    pair = 0.0
    for k in M.indices:
        for l in M.indices:
            if k >= l:
                continue
            x = family[k].algebra.random_element(rng)
            y = family[l].algebra.random_element(rng)
            a, b = M.j(k, x), M.j(l, y)
            keep = ~M.mask(lambda t: bool(t) and t[0] == l)
            D = (a @ b - a @ M.left_b(family[l].psi(y)))[:, keep]
            pair = max(pair, opnorm(D))
    report.add("pair-identity", "ab = a psi(b) off E_l° ⊗ E(l-1) for k < l", "residual", pair, tol)
    return report


def verify_free_restriction(M: MonotoneBimodule, Fr: FreeBimodule, family: Family,
                            rng: np.random.Generator, words: Sequence[Word], tol: float = 1e-9,
                            report: Optional[VerificationReport] = None) -> VerificationReport:
    """u_i(a) leaves E invariant and restricts to j_i(a); vacuum u-moments are monotone."""
    report = report or VerificationReport("bimodule")
    restr = 0.0
    for k in M.indices:
        a = family[k].algebra.random_element(rng)
        J = M.j(k, a)
        for col in range(M.dim):
            e = np.zeros(M.dim, dtype=complex)
            e[col] = 1
            out = Fr.u(k, a, Fr.from_monotone(M, e))
            x, rest = Fr.to_monotone(M, out)
            restr = max(restr, float(np.linalg.norm(x - J[:, col])) + rest)
    report.add("free-restriction", "u_i(a) restricted to E equals j_i(a)", "residual", restr, tol)
    mom = 0.0
    for w in words:
        mom = max(mom, _bnorm(Fr.moment(w) - eval_monotone(w, family)))
    report.add("free-moments", "vacuum moments of u-words are monotone", "residual", mom, tol,
               words=len(words))
    return report


def free_peak_counterexample(family: Family, letters: Sequence[Letter], n_max: Optional[int] = None,
                             tol: float = 1e-10) -> dict:
    """Peak identity failing for the free-product operators u_i.

    letters = (a_1, a_2, a_3) with indices i_1 < i_2 > i_3, all centered.
    With f_2 = (a_2*)^ and f_3 = <f_2, f_2> (a_3*)^ the vector f_3 ⊗ f_2 lies
    on the tuple (i_3, i_2), outside the monotone module. The operator
    A_1 psi(A_2) A_3 vanishes while A_1 A_2 A_3 (f_3 ⊗ f_2) does not.
    """
    if len(letters) != 3:
        raise ShapeMismatch("three letters are needed")
    (i1, a1), (i2, a2), (i3, a3) = [(l.index, l.element) for l in letters]
    if not (i1 < i2 > i3):
        raise DegenerateChoice(f"indices {(i1, i2, i3)} do not form a peak")
    for l in letters:
        c, mean = center(l, family[l.index].psi)
        if opnorm(mean) > tol:
            raise DegenerateChoice(f"letter of index {l.index} is not centered (psi = {opnorm(mean):.3e})")
    n_max = n_max or 5
    Fr = build_free_bimodule(family, n_max)
    E2, E3 = Fr.factory.modules[i2], Fr.factory.modules[i3]
    S2, S3 = center_of(E2), center_of(E3)
    f2 = dagger(S2) @ E2.proj @ family[i2].algebra.coords(dagger(a2))
    g22 = Fr.factory.centered[i2].inner(f2, f2)
    f3 = dagger(S3) @ E3.act_b(g22) @ E3.proj @ family[i3].algebra.coords(dagger(a3))
    g33 = Fr.factory.centered[i3].inner(f3, f3)
    if opnorm(g33) <= tol:
        raise DegenerateChoice("<f_3, f_3> = 0")
    vec = Fr.simple_tensor((i3, i2), [f3, f2])
    out = Fr.u(i1, a1, Fr.u(i2, a2, Fr.u(i3, a3, vec)))
    rhs_norm = Fr.norm(out)
    psi_a2 = Fr.inner(Fr.vacuum(), Fr.u(i2, a2, Fr.vacuum()))
    # A_1 psi(A_2) A_3 applied to the same vector
    mid = Fr.u(i3, a3, vec)
    mid = {t: Fr.block(t).act_b(psi_a2) @ v for t, v in mid.items()}
    lhs_vec = Fr.u(i1, a1, mid)
    return {"lhs_norm": Fr.norm(lhs_vec), "psi_A2_norm": opnorm(psi_a2), "rhs_norm": rhs_norm,
            "f2_f2": g22, "f3_f3": g33, "n_max": n_max, "indices": (i1, i2, i3)}


# conditional expectation onto one algebra -------------------------------------------


class ConditionalExpectation:
    """Psi_{i0}(x) = Q x Q, with Q the projection onto xi B ⊕ E_{i0}° ≅ E_{i0}.

    The compressed operator is identified with pi_{i0}(a) by least squares.
    """

    def __init__(self, M: MonotoneBimodule, i0: int, family: Family, accept: float = 1e-8):
        if i0 not in M.factory.modules:
            raise UnknownIndex(f"index {i0} not in {M.indices}")
        self.M, self.i0, self.family, self.accept = M, i0, family, accept
        E = M.factory.modules[i0]
        base = M.factory.base
        B = M.B
        blk = M.block((i0,))
        S = center_of(E)
        bs = [B.element(base.lift[:, p]) for p in range(base.n)]
        Z = np.stack([E.ract(b) @ E.xi for b in bs], axis=1) if bs else np.zeros((E.n, 0))
        nb = base.n
        cols = np.zeros((E.n, S.shape[1] * nb), dtype=complex)
        for c in range(S.shape[1]):
            for p, b in enumerate(bs):
                cols[:, c * nb + p] = E.ract(b) @ S[:, c]
        G = np.hstack([Z, cols @ blk.lift])  # Q-range coordinates -> E_{i0}
        self.G = G
        self.idx = np.r_[np.arange(M.span(()).start, M.span(()).stop),
                         np.arange(M.span((i0,)).start, M.span((i0,)).stop)]
        self.A = family[i0].algebra
        self._frame = E.left_action.reshape(E.left_action.shape[0], -1).T
        self.unitarity = opnorm(dagger(G) @ G - np.eye(G.shape[1]))

    def compress(self, x: np.ndarray) -> np.ndarray:
        sub = x[np.ix_(self.idx, self.idx)]
        return self.G @ sub @ dagger(self.G)

    def __call__(self, x: np.ndarray, strict: bool = True):
        m = self.compress(x)
        c, *_ = np.linalg.lstsq(self._frame, m.reshape(-1), rcond=None)
        res = float(np.linalg.norm(self._frame @ c - m.reshape(-1)))
        if strict and res > self.accept:
            raise NotInImage(f"compression is off pi_{self.i0}(A) by {res:.3e}")
        return self.A.element(c), res


def conditional_expectation_onto(M: MonotoneBimodule, i0: int, family: Family) -> ConditionalExpectation:
    return ConditionalExpectation(M, i0, family)


def verify_conditional_expectation(M: MonotoneBimodule, family: Family, i0: int, words: Sequence[Word],
                                   rng: np.random.Generator, tol: float = 1e-9,
                                   report: Optional[VerificationReport] = None) -> VerificationReport:
    """Bimodule property, restrictions and the three factorization rules of Psi_{i0}."""
    report = report or VerificationReport("bimodule")
    Psi = ConditionalExpectation(M, i0, family)
    A0 = family[i0].algebra
    emb0 = family[i0].psi.embed
    restr_self = restr_other = 0.0
    for k in M.indices:
        a = family[k].algebra.random_element(rng)
        val, _ = Psi(M.j(k, a))
        want = a if k == i0 else emb0(family[k].psi(a))
        d = opnorm(val - want)
        if k == i0:
            restr_self = max(restr_self, d)
        else:
            restr_other = max(restr_other, d)
    report.add("Psi-identity", "Psi_{i0} restricted to A_{i0} is the identity", "residual", restr_self, tol)
    report.add("Psi-restriction", "Psi_{i0} restricted to A_i is psi_i (i != i0)", "residual", restr_other, tol)
    bim = pos = 0.0
    rules = {"first": 0.0, "interior": 0.0, "last": 0.0}
    for w in words:
        x = M.word_operator(w)
        a, b = A0.random_element(rng), A0.random_element(rng)
        px, _ = Psi(x)
        pa, _ = Psi(M.j(i0, a) @ x @ M.j(i0, b))
        bim = max(bim, opnorm(pa - a @ px @ b))
        q, _ = Psi(dagger(x) @ x)
        pos = min(pos, float(np.linalg.eigvalsh((q + dagger(q)) / 2).min()))
        ls, n = w.letters, len(w.letters)
        if n < 2:
            continue
        for k in local_peaks(list(w.indices)):
            if k == 0:
                rhs = Psi(M.j(ls[0].index, ls[0].element))[0] @ Psi(M.word_operator(Word(ls[1:], w.coeff)))[0]
                key = "first"
            elif k == n - 1:
                rhs = Psi(M.word_operator(Word(ls[:-1], w.coeff)))[0] @ Psi(M.j(ls[-1].index, ls[-1].element))[0]
                key = "last"
            else:
                prev = ls[k - 1]
                bk = family[ls[k].index].psi(ls[k].element)
                shrunk = ls[:k - 1] + (Letter(prev.index, prev.element @ family[prev.index].psi.embed(bk)),) + ls[k + 1:]
                rhs = Psi(M.word_operator(reduce(Word(shrunk, w.coeff), family)))[0]
                key = "interior"
            rules[key] = max(rules[key], opnorm(px - rhs))
    report.add("Psi-bimodule", "Psi(a x b) = a Psi(x) b for a, b in A_{i0}", "residual", bim, tol)
    report.add("Psi-positive", "Psi(x* x) >= 0", "min_eigenvalue", pos, -tol, sense="ge")
    for key, val in rules.items():
        report.add(f"Psi-{key}", f"Psi_{{i0}} factorization ({key} peak)", "residual", val, tol)
    report.add("Psi-identification", "Q-range identified unitarily with E_{i0}", "residual", Psi.unitarity, tol)
    return report


# induced representations ------------------------------------------------------------


class InducedRepresentation:
    """Representation of the monotone product induced from rho on K.

    K is a module carrying a left action of A_{i0} (``left_action``) and of
    B (``bleft``). The space is K ⊕ ⊕ E_{t_1}° ⊗ ... ⊗ E_{t_n}° ⊗ K over
    decreasing tuples whose last index is not i0.
    """

    def __init__(self, M: MonotoneBimodule, i0: int, K: BModule):
        if i0 not in M.factory.modules:
            raise UnknownIndex(f"index {i0} not in {M.indices}")
        self.M, self.i0, self.K = M, i0, K
        self.factory = BlockFactory(M.factory.modules, K)
        tuples = [t for t in M.tuples if not t or t[-1] != i0]
        self.space = TupleModule(self.factory, tuples)
        self.dim = self.space.dim

    def rho(self, k: int, a: np.ndarray) -> np.ndarray:
        sp = self.space
        if k != self.i0:
            A = self.factory.modules[k].act(a)
            return sp.lift(k, A, [X for X in sp.tuples if not X or X[0] < k])
        A = self.factory.modules[k].act(a)
        out = sp.lift(k, A, [X for X in sp.tuples if X and X[0] < k])
        s = sp.span(())
        out[s, s] = self.K.act(a) if self.K.n else out[s, s]
        return out

    def word_operator(self, w: Word) -> np.ndarray:
        m = np.eye(self.dim, dtype=complex)
        for l in w.letters:
            m = m @ self.rho(l.index, l.element)
        return w.coeff * m

    def vector(self, k_vec: np.ndarray) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.space.span(())] = k_vec
        return v


def induce_representation(M: MonotoneBimodule, i0: int, K: BModule) -> InducedRepresentation:
    return InducedRepresentation(M, i0, K)


def zero_module(A: AlgebraSpec, B: AlgebraSpec, right: AlgebraSpec = SCALARS) -> BModule:
    c = right.dim
    return BModule(np.zeros((0, 0, c, c), dtype=complex), right, np.zeros((right.size, 0, 0), dtype=complex),
                   balg=B, bleft=np.zeros((B.size, 0, 0), dtype=complex), left=A,
                   left_action=np.zeros((A.size, 0, 0), dtype=complex), xi=np.zeros(0, dtype=complex))


def verify_induced(M: MonotoneBimodule, family: Family, i0: int, words: Sequence[Word],
                   rng: np.random.Generator, tol: float = 1e-9,
                   report: Optional[VerificationReport] = None) -> VerificationReport:
    """Induced from the GNS module of psi_{i0}: a *-representation with the vacuum moments of E."""
    report = report or VerificationReport("bimodule")
    K = M.factory.modules[i0]
    R = InducedRepresentation(M, i0, K)
    mul = star = unit = 0.0
    for k in M.indices:
        A = family[k].algebra
        a, b = A.random_element(rng), A.random_element(rng)
        ra, rb = R.rho(k, a), R.rho(k, b)
        mul = max(mul, opnorm(R.rho(k, a @ b) - ra @ rb))
        star = max(star, opnorm(R.rho(k, dagger(a)) - dagger(ra)))
        P = R.rho(k, A.identity)
        unit = max(unit, opnorm(P @ P - P), opnorm(P - dagger(P)))
    report.add("induced-multiplicative", "rho_i(ab) = rho_i(a) rho_i(b)", "residual", mul, tol)
    report.add("induced-star", "rho_i(a*) = rho_i(a)*", "residual", star, tol)
    report.add("induced-unit", "rho_i(1) is a projection", "residual", unit, tol)
    xi = R.vector(K.xi)
    mom = 0.0
    for w in words:
        v = R.word_operator(w) @ xi
        val = R.space.inner(xi, v)
        mom = max(mom, opnorm(val - eval_monotone(w, family)))
    report.add("induced-moments", "induced from L^2(A_{i0}) reproduces the vacuum moments", "residual",
               mom, tol, words=len(words), dim=R.dim)
    return report
