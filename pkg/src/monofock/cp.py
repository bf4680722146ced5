"""Free and monotone products of B-bimodule maps and complete positivity checks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .algebra import (
    AlgebraSpec,
    BimoduleMap,
    CondExpSpec,
    LinearMap,
    SCALARS,
    block_psd_min,
    dagger,
    embedding_map,
    matrix_units,
    opnorm,
)
from .errors import ContextMismatch, NotFullAlgebra
from .moments import Rules, eval_with
from .report import VerificationReport
from .words import (
    Family,
    Letter,
    Member,
    NCPoly,
    Word,
    adjoint,
    multiply,
    random_poly,
    reduce,
    sample_random_word,
)


# building blocks ------------------------------------------------------------


def kraus_map(A: AlgebraSpec, D: AlgebraSpec, V: np.ndarray, B: AlgebraSpec = SCALARS) -> BimoduleMap:
    """theta(a) = V* (a ⊗ 1_r) V for V: C^{d_D} -> C^{d_A} ⊗ C^r."""
    r = V.shape[0] // A.dim
    f = lambda a: dagger(V) @ np.kron(a, np.eye(r)) @ V
    return BimoduleMap(A, D, LinearMap.from_function(f, A.dim, D.dim),
                       embedding_map(B, A), embedding_map(B, D), B, name="kraus")


def random_isometry(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    g = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    q, _ = np.linalg.qr(g)
    return q[:, :cols]


def random_ucp(A: AlgebraSpec, D: AlgebraSpec, rng: np.random.Generator, rank: int = 2) -> BimoduleMap:
    """Unital CP map between full matrix algebras (B = C) with Kraus rank ``rank``."""
    return kraus_map(A, D, random_isometry(rng, A.dim * rank, D.dim))


def schur_map(S: np.ndarray, A: Optional[AlgebraSpec] = None) -> BimoduleMap:
    """a -> S ∘ a on M_d; unital and CP when S >= 0 with unit diagonal; diag-bimodular."""
    d = S.shape[0]
    A = A or AlgebraSpec.full(d)
    B = AlgebraSpec.diagonal(d)
    return BimoduleMap(A, A, LinearMap(np.diag(S.reshape(-1)), d, d),
                       embedding_map(B, A), embedding_map(B, A), B, name="schur")


def random_correlation(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    g = g / np.linalg.norm(g, axis=1, keepdims=True)
    return g @ dagger(g)


def reduction_map(d: int) -> BimoduleMap:
    """a -> tr(a) 1 - a: unital and positive but not completely positive."""
    A = AlgebraSpec.full(d)
    f = lambda a: np.trace(a) * np.eye(d) - a
    return BimoduleMap(A, A, LinearMap.from_function(f, d, d), embedding_map(SCALARS, A),
                       embedding_map(SCALARS, A), SCALARS, name="reduction")


def transpose_map(d: int) -> LinearMap:
    return LinearMap.from_function(lambda a: a.T, d, d)


# complete positivity ----------------------------------------------------------


def choi_matrix(f: Union[LinearMap, BimoduleMap], source: Optional[AlgebraSpec] = None) -> np.ndarray:
    lm = f.map if isinstance(f, BimoduleMap) else f
    src = source or (f.source if isinstance(f, BimoduleMap) else None)
    d = lm.d_in
    if src is not None and src.size != d * d:
        raise NotFullAlgebra(f"source has dimension {src.size}, not {d * d}")
    units = matrix_units(d)
    return sum(np.kron(units[p], lm(units[p])) for p in range(d * d))


def cp_check_choi(f: Union[LinearMap, BimoduleMap], source: Optional[AlgebraSpec] = None) -> float:
    """Minimal eigenvalue of the Choi matrix sum_pq E_pq ⊗ f(E_pq)."""
    C = choi_matrix(f, source)
    return float(np.linalg.eigvalsh((C + dagger(C)) / 2).min())


def poly_value(evaluate: Callable[[Word], np.ndarray], p: NCPoly, d: int) -> np.ndarray:
    out = np.zeros((d, d), dtype=complex)
    for w in p.terms:
        out = out + evaluate(w)
    return out


def gram_blocks(evaluate: Callable[[Word], np.ndarray], polys: Sequence[NCPoly], family: Family,
                d: int) -> np.ndarray:
    """[theta(p_a* p_b)]_{a,b} as an (m, m, d, d) array."""
    m = len(polys)
    G = np.zeros((m, m, d, d), dtype=complex)
    for a in range(m):
        for b in range(a, m):
            val = np.zeros((d, d), dtype=complex)
            for u in polys[a].terms:
                for v in polys[b].terms:
                    val = val + evaluate(multiply(adjoint(u), v, family))
            G[a, b] = val
            if a != b:
                G[b, a] = dagger(val)
    return G


def cp_check_gram(evaluate: Callable[[Word], np.ndarray], family: Family, d: int, rounds: int,
                  rng: np.random.Generator, m_max: int = 6, maxlen: int = 3, n_terms: int = 2) -> dict:
    """Minimal eigenvalue of [theta(w_p* w_q)] over random rounds.

    Each round draws m <= m_max polynomials (the empty word is allowed) and
    uses its own generator split from ``rng``.
    """
    seeds = rng.integers(2**63, size=rounds)
    mins = []
    herm = 0.0
    for s in seeds:
        r = np.random.default_rng(s)
        m = int(r.integers(1, m_max + 1))
        polys = [random_poly(r, family, maxlen, n_terms) for _ in range(m)]
        G = gram_blocks(evaluate, polys, family, d)
        big = G.transpose(0, 2, 1, 3).reshape(m * d, m * d)
        herm = max(herm, float(np.abs(big - dagger(big)).max()))
        mins.append(block_psd_min(G))
    return {"min": float(min(mins)), "per_round": mins, "hermitian": herm}


def histogram(values: Sequence[float], bins: int = 8) -> dict:
    counts, edges = np.histogram(np.asarray(values), bins=bins)
    return {"counts": counts.tolist(), "edges": [float(e) for e in edges]}


# products of maps --------------------------------------------------------------


class FreeProductMap:
    """theta_*(a_1 ... a_n) = theta_{i_1}(a_1) ... theta_{i_n}(a_n) on centered words.

    General words are expanded by splitting off the mean of the first
    non-centered letter; the mean is absorbed into a neighbour.
    """

    def __init__(self, family: Family, thetas: Mapping[int, BimoduleMap]):
        self.rules = Rules(family, thetas)
        self.family = family

    def _eval(self, letters: tuple, start: int, memo: dict) -> np.ndarray:
        """Letters before position ``start`` are already centered."""
        r = self.rules
        if not letters:
            return r.unit_D
        key = np.int64(start).tobytes() + r.key(letters)
        if key in memo:
            return memo[key]
        k = start
        while k < len(letters):
            b = r.psi(*letters[k])
            if opnorm(b) > 0:
                break
            k += 1
        if k == len(letters):
            out = r.unit_D
            for i, x in letters:
                out = out @ r.theta(i, x)
            memo[key] = out
            return out
        i, x = letters[k]
        xc = x - self.family[i].psi.embed(b)
        out = self._eval(letters[:k] + ((i, xc),) + letters[k + 1:], k + 1, memo)
        if len(letters) == 1:
            out = out + r.embed_D(b)
        else:
            rest = list(letters[:k]) + list(letters[k + 1:])
            if k > 0:
                j, y = rest[k - 1]
                rest[k - 1] = (j, r.times_b(j, y, b))
            else:
                j, y = rest[0]
                rest[0] = (j, r.b_times(j, b, y))
            merged: list = []
            for j, y in rest:
                if merged and merged[-1][0] == j:
                    merged[-1] = (j, merged[-1][1] @ y)
                else:
                    merged.append((j, y))
            out = out + self._eval(tuple(merged), max(k - 1, 0), memo)
        memo[key] = out
        return out

    def __call__(self, w: Union[Word, NCPoly]) -> np.ndarray:
        if isinstance(w, NCPoly):
            return poly_value(self, w, self.rules.D.dim)
        w = reduce(w, self.family)
        return w.coeff * self._eval(tuple((l.index, l.element) for l in w.letters), 0, {})


class MonotoneProductMap:
    """theta = monotone product of the theta_i (recursive rules)."""

    def __init__(self, family: Family, thetas: Mapping[int, BimoduleMap]):
        self.rules = Rules(family, thetas)
        self.family = family

    def __call__(self, w: Union[Word, NCPoly]) -> np.ndarray:
        if isinstance(w, NCPoly):
            return poly_value(self, w, self.rules.D.dim)
        return eval_with(w, self.rules)


def free_product_maps(family: Family, thetas: Mapping[int, BimoduleMap]) -> FreeProductMap:
    return FreeProductMap(family, thetas)


def monotone_product_maps(family: Family, thetas: Mapping[int, BimoduleMap]) -> MonotoneProductMap:
    return MonotoneProductMap(family, thetas)


# unitalization -----------------------------------------------------------------


@dataclass
class Unitalization:
    """A~ = B 1~ ⊕ A realized as block matrices diag(a + b, b).

    b 1~ + a  ->  diag(a + emb(b), b);  the old unit is diag(1, 0) and
    e = 1~ - 1 = diag(0, 1).
    """

    algebra: AlgebraSpec
    inner: AlgebraSpec
    psi: CondExpSpec
    theta: BimoduleMap
    lowest: bool
    b_in_A: LinearMap

    @property
    def e(self) -> np.ndarray:
        d = self.inner.dim
        m = np.zeros((self.algebra.dim, self.algebra.dim), dtype=complex)
        m[d:, d:] = np.eye(self.algebra.dim - d)
        return m

    def element(self, b: np.ndarray, a: np.ndarray) -> np.ndarray:
        """The matrix of b 1~ + a."""
        d = self.inner.dim
        m = np.zeros((self.algebra.dim, self.algebra.dim), dtype=complex)
        m[:d, :d] = a + self.b_in_A(b)
        m[d:, d:] = b
        return m

    def letter(self, a: np.ndarray) -> np.ndarray:
        return self.element(np.zeros((self.algebra.dim - self.inner.dim,) * 2), a)


def unitalize(A: AlgebraSpec, psi: CondExpSpec, theta: BimoduleMap, lowest: bool) -> Unitalization:
    """psi~(b1 + a) = b (lowest) or b + psi(a); theta~(b1 + a) = b + theta(a)."""
    B = psi.target
    d, dB = A.dim, B.dim
    At = AlgebraSpec.block_diagonal(A, B)

    def emb(b):
        m = np.zeros((d + dB, d + dB), dtype=complex)
        m[:d, :d] = psi.embed(b)
        m[d:, d:] = b
        return m

    def alpha(x):
        return x[:d, :d]

    def beta(x):
        return x[d:, d:]

    if lowest:
        psi_t = lambda x: beta(x)
    else:
        psi_t = lambda x: psi(alpha(x))  # = b + psi(a) with alpha = a + b
    Pt = CondExpSpec(At, B, LinearMap.from_function(emb, dB, d + dB),
                     LinearMap.from_function(psi_t, d + dB, dB))
    Tt = BimoduleMap(At, theta.target, LinearMap.from_function(lambda x: theta(alpha(x)), d + dB,
                                                                 theta.target.dim),
                     Pt.embedding, theta.b_target, B, name="unitalized")
    return Unitalization(At, A, Pt, Tt, lowest, psi.embedding)


def verify_unitalization(U: Unitalization, theta: BimoduleMap, rng: np.random.Generator,
                         samples: int = 20) -> float:
    """max |theta~(b1 + a) - (b + theta(a))| and |theta~(alpha + b e) - theta(alpha)|."""
    B = U.psi.target
    worst = 0.0
    emb_D = theta.b_target
    for _ in range(samples):
        a = U.inner.random_element(rng)
        b = B.random_element(rng)
        x = U.element(b, a)
        worst = max(worst, opnorm(U.theta(x) - (emb_D(b) + theta(a))))
        alpha = a + U.b_in_A(b)
        worst = max(worst, opnorm(U.theta(x) - theta(alpha)))
    return worst


def verify_cfree_monot(family: Family, thetas: Mapping[int, BimoduleMap], rng: np.random.Generator,
                       n_words: int = 200, maxlen: int = 6, tol: float = 1e-9,
                       report: Optional[VerificationReport] = None) -> VerificationReport:
    """Free product of the unitalized maps, restricted to the non-unital free
    product, equals the monotone product (two algebras, lower index first)."""
    report = report or VerificationReport("cp")
    if len(family) != 2:
        raise ContextMismatch("this comparison needs exactly two algebras")
    lo, hi = family.indices
    units = {lo: unitalize(family[lo].algebra, family[lo].psi, thetas[lo], lowest=True),
             hi: unitalize(family[hi].algebra, family[hi].psi, thetas[hi], lowest=False)}
    ufam = Family(Member(i, u.algebra, u.psi) for i, u in units.items())
    free = FreeProductMap(ufam, {i: u.theta for i, u in units.items()})
    mono = MonotoneProductMap(family, thetas)

    def lift(w: Word) -> Word:
        return Word(tuple(Letter(l.index, units[l.index].letter(l.element)) for l in w.letters), w.coeff)

    worst = 0.0
    for _ in range(n_words):
        w = sample_random_word(rng, maxlen, family)
        worst = max(worst, opnorm(free(lift(w)) - mono(w)))
    report.add("cfree-monotone", "free product of unitalized maps restricts to the monotone product",
               "residual", worst, tol, words=n_words)
    centered_case = 0.0
    for _ in range(10):
        a1 = family[lo].algebra.random_element(rng)
        a3 = family[lo].algebra.random_element(rng)
        a2 = family[hi].algebra.random_element(rng)
        a2 = a2 - family[hi].psi.embed(family[hi].psi(a2))
        w = Word(((lo, a1), (hi, a2), (lo, a3)))
        rhs = thetas[lo](a1) @ thetas[hi](a2) @ thetas[lo](a3)
        centered_case = max(centered_case, opnorm(mono(w) - rhs), opnorm(free(lift(w)) - rhs))
    report.add("cfree-centered-middle", "centered middle letter factorizes", "residual", centered_case, tol)
    unit = max(verify_unitalization(units[i], thetas[i], rng) for i in units)
    report.add("unitalization", "theta~(b1 + a) = b + theta(a) = theta(alpha)", "residual", unit, tol)
    return report
