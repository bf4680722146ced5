"""Finite-dimensional *-algebras, states, conditional expectations and GNS.

Every algebra is a concrete unital *-subalgebra of M_d given by a basis.
Linear maps between matrix algebras are stored as superoperator matrices
acting on row-major vectorizations, so ``f(x) = unvec(M @ vec(x))``.

Hilbert modules are finite-dimensional complex vector spaces carrying an
algebra-valued inner product that is linear in the second variable. Their
coordinates are always orthonormal for the scalar product ``tr <x, y>``, so
module adjoints of adjointable maps are plain conjugate transposes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg as sla

from .errors import (
    InvalidAlgebra,
    InvalidCondExp,
    NonPositive,
    NonState,
    NotInAlgebra,
    ShapeMismatch,
)

TOL = 1e-10


def dagger(x: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(x, -1, -2))


def opnorm(x: np.ndarray) -> float:
    """Largest singular value (0 for empty matrices)."""
    x = np.atleast_2d(x)
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x, 2))


def matrix_units(d: int) -> np.ndarray:
    return np.eye(d * d, dtype=complex).reshape(d * d, d, d)


class LinearMap:
    """A linear map M_{d_in} -> M_{d_out} stored as a superoperator."""

    def __init__(self, matrix: np.ndarray, d_in: int, d_out: int):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (d_out * d_out, d_in * d_in):
            raise ShapeMismatch(
                f"superoperator shape {matrix.shape} != {(d_out**2, d_in**2)}"
            )
        self.matrix = matrix
        self.d_in = d_in
        self.d_out = d_out

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], d_in: int, d_out: int):
        cols = [np.asarray(f(e), dtype=complex).reshape(-1) for e in matrix_units(d_in)]
        return cls(np.stack(cols, axis=1), d_in, d_out)

    @classmethod
    def identity(cls, d: int):
        return cls(np.eye(d * d, dtype=complex), d, d)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        return (self.matrix @ x.reshape(-1)).reshape(self.d_out, self.d_out)

    def compose(self, other: "LinearMap") -> "LinearMap":
        """Return ``self o other``."""
        if other.d_out != self.d_in:
            raise ShapeMismatch("cannot compose maps of mismatched sizes")
        return LinearMap(self.matrix @ other.matrix, other.d_in, self.d_out)

    def __add__(self, other: "LinearMap") -> "LinearMap":
        return LinearMap(self.matrix + other.matrix, self.d_in, self.d_out)

    def __sub__(self, other: "LinearMap") -> "LinearMap":
        return LinearMap(self.matrix - other.matrix, self.d_in, self.d_out)

    def scaled(self, c: complex) -> "LinearMap":
        return LinearMap(c * self.matrix, self.d_in, self.d_out)


class AlgebraSpec:
    """A unital *-subalgebra of M_d spanned by ``basis``."""

    def __init__(self, basis, *, name: str = "", check: bool = True, tol: float = TOL):
        b = np.array(basis, dtype=complex)
        if b.ndim == 2:
            b = b[None]
        if b.ndim != 3 or b.shape[1] != b.shape[2]:
            raise ShapeMismatch("basis must be a list of square matrices")
        self.basis = b
        self.size, self.dim = b.shape[0], b.shape[1]
        self.name = name
        self._frame = b.reshape(self.size, -1).T
        if np.linalg.matrix_rank(self._frame, tol=1e-9) != self.size:
            raise InvalidAlgebra("basis is linearly dependent")
        self._pinv = np.linalg.pinv(self._frame)
        if check:
            self.validate(tol)

    # constructors -------------------------------------------------------
    @classmethod
    def full(cls, d: int, name: str = ""):
        return cls(matrix_units(d), name=name or f"M{d}", check=False)

    @classmethod
    def diagonal(cls, d: int, name: str = ""):
        units = matrix_units(d)[[i * d + i for i in range(d)]]
        return cls(units, name=name or f"D{d}", check=False)

    @classmethod
    def scalars(cls, d: int = 1, name: str = "C"):
        return cls([np.eye(d)], name=name, check=False)

    @classmethod
    def block_diagonal(cls, *algebras: "AlgebraSpec", name: str = ""):
        """Direct sum realized on the block diagonal."""
        dims = [a.dim for a in algebras]
        n = sum(dims)
        basis = []
        off = 0
        for a in algebras:
            for x in a.basis:
                m = np.zeros((n, n), dtype=complex)
                m[off:off + a.dim, off:off + a.dim] = x
                basis.append(m)
            off += a.dim
        return cls(basis, name=name, check=False)

    # coordinates --------------------------------------------------------
    def coords(self, x: np.ndarray) -> np.ndarray:
        return self._pinv @ np.asarray(x, dtype=complex).reshape(-1)

    def element(self, c: np.ndarray) -> np.ndarray:
        return np.tensordot(np.asarray(c, dtype=complex), self.basis, axes=1)

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.element(self.coords(x))

    def residual(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=complex)
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x: np.ndarray, tol: float = TOL) -> bool:
        return self.residual(x) <= tol * max(1.0, float(np.linalg.norm(x)))

    def require(self, x: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        if not self.contains(x, tol):
            raise NotInAlgebra(f"element off {self.name or 'algebra'} by {self.residual(x):.3e}")
        return np.asarray(x, dtype=complex)

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)

    @property
    def unit(self) -> Optional[int]:
        for i, x in enumerate(self.basis):
            if np.allclose(x, self.identity, atol=1e-12):
                return i
        return None

    def left_mult(self, a: np.ndarray) -> np.ndarray:
        """Matrix of x -> a x in basis coordinates."""
        return np.stack([self.coords(a @ x) for x in self.basis], axis=1)

    def right_mult(self, a: np.ndarray) -> np.ndarray:
        return np.stack([self.coords(x @ a) for x in self.basis], axis=1)

    def random_element(self, rng: np.random.Generator) -> np.ndarray:
        """Standard complex Gaussian coordinates, scaled to unit operator norm."""
        c = rng.standard_normal(self.size) + 1j * rng.standard_normal(self.size)
        x = self.element(c)
        return x / opnorm(x)

    def same_as(self, other: "AlgebraSpec", tol: float = 1e-9) -> bool:
        if other is self:
            return True
        if other.dim != self.dim or other.size != self.size:
            return False
        return all(self.contains(x, tol) for x in other.basis)

    def validate(self, tol: float = TOL) -> None:
        if self.residual(self.identity) > tol:
            raise InvalidAlgebra("identity is not in the span of the basis")
        for x in self.basis:
            if self.residual(dagger(x)) > tol:
                raise InvalidAlgebra("span is not closed under adjoints")
            for y in self.basis:
                if self.residual(x @ y) > tol * max(1.0, np.linalg.norm(x @ y)):
                    raise InvalidAlgebra("span is not closed under products")

    def __repr__(self) -> str:
        return f"AlgebraSpec({self.name or '?'}, d={self.dim}, size={self.size})"


SCALARS = AlgebraSpec.scalars()


class StateSpec:
    """The state a -> tr(rho a)."""

    def __init__(self, density, tol: float = 1e-9):
        rho = np.asarray(density, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise NonState("density must be a square matrix")
        if np.linalg.norm(rho - dagger(rho)) > tol:
            raise NonState("density is not Hermitian")
        if abs(np.trace(rho) - 1) > tol:
            raise NonState(f"density has trace {np.trace(rho).real:.6g}")
        if np.linalg.eigvalsh((rho + dagger(rho)) / 2).min() < -tol:
            raise NonState("density is not positive semidefinite")
        self.density = rho

    def __call__(self, a: np.ndarray) -> complex:
        return complex(np.trace(self.density @ a))

    @property
    def dim(self) -> int:
        return self.density.shape[0]

    def is_faithful(self, tol: float = 1e-9) -> bool:
        return np.linalg.eigvalsh(self.density).min() > tol

    def as_condexp(self, algebra: AlgebraSpec) -> "CondExpSpec":
        d = algebra.dim
        if self.dim != d:
            raise ShapeMismatch("state and algebra sizes differ")
        rho = self.density
        return CondExpSpec(
            algebra,
            SCALARS,
            LinearMap(np.eye(d, dtype=complex).reshape(-1, 1), 1, d),
            LinearMap(rho.T.reshape(1, -1), d, 1),
        )


def embedding_map(inner: AlgebraSpec, outer: AlgebraSpec, images=None) -> LinearMap:
    """Unital *-embedding inner -> outer given by images of the inner basis.

    Without ``images``: 1x1 scalars embed as multiples of the identity, and an
    algebra of the same matrix size embeds literally.
    """
    if images is None:
        if inner.dim == 1:
            return LinearMap(outer.identity.reshape(-1, 1), 1, outer.dim)
        if inner.dim == outer.dim:
            return LinearMap.identity(inner.dim)
        raise ShapeMismatch("no canonical embedding between these algebras")
    images = np.asarray(images, dtype=complex)
    coeff = np.linalg.pinv(inner._frame)  # basis coords
    vecs = images.reshape(inner.size, -1).T
    return LinearMap(vecs @ coeff, inner.dim, outer.dim)


class CondExpSpec:
    """A B-bimodule map psi: A -> B with psi o embedding = id on B."""

    def __init__(self, source: AlgebraSpec, target: AlgebraSpec, embedding: LinearMap,
                 map: LinearMap):
        if embedding.d_in != target.dim or embedding.d_out != source.dim:
            raise ShapeMismatch("embedding sizes do not match the algebras")
        if map.d_in != source.dim or map.d_out != target.dim:
            raise ShapeMismatch("map sizes do not match the algebras")
        self.source = source
        self.target = target
        self.embedding = embedding
        self.map = map

    def __call__(self, a: np.ndarray) -> np.ndarray:
        return self.map(a)

    def embed(self, b: np.ndarray) -> np.ndarray:
        return self.embedding(b)

    @classmethod
    def from_function(cls, source, target, f, embed=None):
        emb = embedding_map(target, source) if embed is None else (
            embed if isinstance(embed, LinearMap)
            else LinearMap.from_function(embed, target.dim, source.dim))
        return cls(source, target, emb, LinearMap.from_function(f, source.dim, target.dim))

    @classmethod
    def diagonal_compression(cls, d: int, source: Optional[AlgebraSpec] = None):
        source = source or AlgebraSpec.full(d)
        target = AlgebraSpec.diagonal(d)
        return cls.from_function(source, target, lambda a: np.diag(np.diag(a)))

    @classmethod
    def identity(cls, algebra: AlgebraSpec):
        return cls(algebra, algebra, LinearMap.identity(algebra.dim),
                   LinearMap.identity(algebra.dim))

    def residuals(self, rng: Optional[np.random.Generator] = None, samples: int = 8) -> dict:
        rng = rng or np.random.default_rng(0)
        A, B = self.source, self.target
        unit = max(opnorm(self(self.embed(b)) - b) for b in B.basis)
        bim = 0.0
        for b1 in B.basis:
            e1 = self.embed(b1)
            for b2 in B.basis:
                e2 = self.embed(b2)
                for a in A.basis:
                    bim = max(bim, opnorm(self(e1 @ a @ e2) - b1 @ self(a) @ b2))
        pos = 0.0
        for _ in range(samples):
            a = A.random_element(rng)
            v = self(dagger(a) @ a)
            pos = min(pos, float(np.linalg.eigvalsh((v + dagger(v)) / 2).min()))
        range_ = max(B.residual(self(a)) for a in A.basis)
        return {"unit": unit, "bimodule": bim, "positivity": pos, "range": range_}

    def validate(self, tol: float = 1e-9) -> "CondExpSpec":
        r = self.residuals()
        if r["unit"] > tol or r["bimodule"] > tol or r["range"] > tol:
            raise InvalidCondExp(f"conditional expectation axioms fail: {r}")
        if r["positivity"] < -tol:
            raise NonPositive(f"psi(a*a) has eigenvalue {r['positivity']:.3e}")
        return self


# ---------------------------------------------------------------------------
# Hilbert modules


@dataclass
class BModule:
    """Finite-dimensional Hilbert module with orthonormal scalarized basis.

    gram[p, q] is <e_p, e_q>, a matrix in ``right``. ``right_action[r]`` is
    x -> x c_r for the r-th basis element of ``right``. ``bleft[r]`` is the
    left action of the r-th basis element of ``balg`` (the algebra the module
    is tensored over on the left). ``left``/``left_action`` optionally carry
    a larger left algebra.
    """

    gram: np.ndarray
    right: AlgebraSpec
    right_action: np.ndarray
    balg: Optional[AlgebraSpec] = None
    bleft: Optional[np.ndarray] = None
    left: Optional[AlgebraSpec] = None
    left_action: Optional[np.ndarray] = None
    xi: Optional[np.ndarray] = None
    lift: Optional[np.ndarray] = None
    proj: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.gram.shape[0]

    def inner(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.einsum("p,q,pqab->ab", np.conj(x), y, self.gram)

    def act(self, a: np.ndarray) -> np.ndarray:
        """Left action of an element of ``left``."""
        if self.left is None:
            raise ShapeMismatch("module has no left algebra action")
        return np.tensordot(self.left.coords(a), self.left_action, axes=1)

    def act_b(self, b: np.ndarray) -> np.ndarray:
        if self.balg is None:
            raise ShapeMismatch("module has no left B action")
        return np.tensordot(self.balg.coords(b), self.bleft, axes=1)

    def ract(self, c: np.ndarray) -> np.ndarray:
        return np.tensordot(self.right.coords(c), self.right_action, axes=1)

    def push(self, raw_op: np.ndarray) -> np.ndarray:
        """Induce a raw-coordinate operator onto this quotient."""
        return self.proj @ raw_op @ self.lift

    def scalar_gram(self) -> np.ndarray:
        return np.einsum("pqaa->pq", self.gram)

    def check(self, tol: float = 1e-9) -> dict:
        """Residuals of the module axioms in this basis."""
        n = self.n
        res = {"orthonormal": float(np.abs(self.scalar_gram() - np.eye(n)).max(initial=0.0))}
        res["hermitian"] = float(np.abs(self.gram - np.conj(
            np.transpose(self.gram, (1, 0, 3, 2)))).max(initial=0.0))
        rl = 0.0
        for r, c in enumerate(self.right.basis):
            R = self.right_action[r]
            g2 = np.einsum("uq,puab->pqab", R, self.gram)
            g1 = np.einsum("pqab,bc->pqac", self.gram, c)
            rl = max(rl, float(np.abs(g2 - g1).max(initial=0.0)))
        res["right_linear"] = rl
        big = self.gram.transpose(0, 2, 1, 3).reshape(n * self.right.dim, -1)
        res["positivity"] = float(np.linalg.eigvalsh((big + dagger(big)) / 2).min()) if n else 0.0
        res["adjointable"] = self.adjoint_residual()
        return res

    def adjoint_residual(self) -> float:
        """max over left generators L of |<Lx, y> - <x, L^dagger y>| on basis pairs."""
        worst = 0.0
        for acts in (self.left_action, self.bleft):
            if acts is None:
                continue
            for L in acts:
                # <L e_p, e_q> = sum_u conj(L_up) G_uq ; <e_p, L^dag e_q> = sum_v G_pv conj(L_qv)
                lhs = np.einsum("up,uqab->pqab", np.conj(L), self.gram)
                rhs = np.einsum("pvab,qv->pqab", self.gram, np.conj(L))
                worst = max(worst, float(np.abs(lhs - rhs).max(initial=0.0)))
        return worst


def _quotient(raw_gram: np.ndarray, tol: float = TOL):
    """Orthonormal coordinates for the quotient by the null space.

    Returns (lift, proj, gram) with lift: new -> raw, proj: raw -> new.
    """
    N = raw_gram.shape[0]
    if N == 0:
        z = np.zeros((0, 0), dtype=complex)
        return z, z, raw_gram
    g = np.einsum("pqaa->pq", raw_gram)
    g = (g + dagger(g)) / 2
    w, U = np.linalg.eigh(g)
    c = raw_gram.shape[2]
    big = raw_gram.transpose(0, 2, 1, 3).reshape(N * c, N * c)
    wmin = np.linalg.eigvalsh((big + dagger(big)) / 2).min()
    scale = max(1.0, float(w.max()))
    if wmin < -1e-8 * scale:
        raise NonPositive(f"Gram table has eigenvalue {wmin:.3e}")
    keep = w > tol * scale
    lift = U[:, keep] / np.sqrt(w[keep])
    proj = dagger(lift) @ g
    gram = np.einsum("pa,pqxy,qb->abxy", np.conj(lift), raw_gram, lift, optimize=True)
    return lift, proj, gram


def gns_module(A: AlgebraSpec, psi: CondExpSpec, tol: float = TOL) -> BModule:
    """L^2(A, psi): the quotient of A by {a : psi(a*a) = 0}.

    The result carries the left A-action, the right B-action, xi = class of 1,
    and ``info['center']``, an isometry onto the orthocomplement of xi B
    (the image of Ker psi).
    """
    B = psi.target
    raw = np.stack([np.stack([psi(dagger(x) @ y) for y in A.basis]) for x in A.basis])
    lift, proj, gram = _quotient(raw, tol)
    left_action = np.stack([proj @ A.left_mult(x) @ lift for x in A.basis])
    right_action = np.stack([proj @ A.right_mult(psi.embed(b)) @ lift for b in B.basis])
    bleft = np.stack([proj @ A.left_mult(psi.embed(b)) @ lift for b in B.basis])
    xi = proj @ A.coords(A.identity)
    E = BModule(gram, B, right_action, balg=B, bleft=bleft, left=A,
                left_action=left_action, xi=xi, lift=lift, proj=proj)
    E.info["raw_basis"] = A
    E.info["center"] = _complement(np.stack([R @ xi for R in right_action], axis=1))
    return E


def _complement(vectors: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthocomplement of the span of the columns."""
    n = vectors.shape[0]
    if vectors.size == 0:
        return np.eye(n, dtype=complex)
    return sla.null_space(dagger(vectors), rcond=1e-10).astype(complex)


def center_of(E: BModule) -> np.ndarray:
    """Isometry onto E ⊖ xi B (the scalar and the B-valued complements agree)."""
    if "center" not in E.info:
        E.info["center"] = _complement(np.stack([R @ E.xi for R in E.right_action], axis=1))
    return E.info["center"]


def centered(E: BModule) -> BModule:
    """The submodule E° = E ⊖ xi B, with ``info['inclusion']`` into E."""
    S = center_of(E)
    Sd = dagger(S)
    gram = np.einsum("pa,pqxy,qb->abxy", np.conj(S), E.gram, S, optimize=True)
    sub = BModule(
        gram, E.right, np.stack([Sd @ R @ S for R in E.right_action]) if len(E.right_action) else E.right_action,
        balg=E.balg, bleft=None if E.bleft is None else np.stack([Sd @ L @ S for L in E.bleft]),
    )
    sub.info["inclusion"] = S
    return sub


def unit_module(B: AlgebraSpec) -> BModule:
    """B as a Hilbert bimodule over itself, <b, c> = b* c, xi = 1."""
    return gns_module(B, CondExpSpec.identity(B))


def tensor_over_B(E: BModule, F: BModule, tol: float = TOL) -> BModule:
    """Interior tensor product E ⊗_B F, quotiented by its null space.

    <e1⊗f1, e2⊗f2> = <f1, <e1, e2>·f2>. ``info['factors']`` keeps (E, F);
    operators S on E and T on F induce ``result.push(np.kron(S, T))``.
    """
    if F.balg is None or not E.right.same_as(F.balg):
        raise ShapeMismatch("right algebra of E does not act on the left of F")
    B = F.balg
    nE, nF = E.n, F.n
    if nE == 0 or nF == 0:
        c = F.right.dim
        empty = np.zeros((0, 0, c, c), dtype=complex)
        T = BModule(empty, F.right, np.zeros((F.right.size, 0, 0), dtype=complex),
                    balg=E.balg, bleft=None if E.bleft is None else np.zeros((len(E.bleft), 0, 0)),
                    lift=np.zeros((nE * nF, 0), dtype=complex),
                    proj=np.zeros((0, nE * nF), dtype=complex))
        T.info["factors"] = (E, F)
        return T
    beta = np.stack([np.stack([B.coords(E.gram[p, q]) for q in range(nE)]) for p in range(nE)])
    # H[r, s, t] = <f_s, b_r f_t>
    H = np.einsum("rut,suab->rstab", F.bleft, F.gram)
    raw = np.einsum("pqr,rstab->psqtab", beta, H).reshape(nE * nF, nE * nF, F.right.dim, F.right.dim)
    lift, proj, gram = _quotient(raw, tol)
    eye_E, eye_F = np.eye(nE), np.eye(nF)
    right_action = np.stack([proj @ np.kron(eye_E, R) @ lift for R in F.right_action])
    bleft = None if E.bleft is None else np.stack([proj @ np.kron(L, eye_F) @ lift for L in E.bleft])
    left_action = None if E.left_action is None else np.stack(
        [proj @ np.kron(L, eye_F) @ lift for L in E.left_action])
    T = BModule(gram, F.right, right_action, balg=E.balg, bleft=bleft, left=E.left,
                left_action=left_action, lift=lift, proj=proj)
    T.info["factors"] = (E, F)
    return T


# ---------------------------------------------------------------------------
# scalar GNS


@dataclass
class Representation:
    """A *-representation on C^dim with a unit vector xi."""

    algebra: AlgebraSpec
    mats: np.ndarray  # (size, dim, dim), images of the basis
    xi: np.ndarray

    @property
    def dim(self) -> int:
        return self.mats.shape[1]

    def __call__(self, a: np.ndarray) -> np.ndarray:
        return np.tensordot(self.algebra.coords(a), self.mats, axes=1)

    def residuals(self, state: Optional[Callable] = None) -> dict:
        A = self.algebra
        mult = star = 0.0
        for x in A.basis:
            px = self(x)
            star = max(star, opnorm(self(dagger(x)) - dagger(px)))
            for y in A.basis:
                mult = max(mult, opnorm(self(x @ y) - px @ self(y)))
        out = {"multiplicative": mult, "star": star}
        if state is not None:
            out["state"] = max(abs(np.vdot(self.xi, self(x) @ self.xi) - state(x)) for x in A.basis)
        return out


def gns(A: AlgebraSpec, phi: StateSpec) -> Representation:
    """GNS representation of a state; dimension is the rank of [phi(b_i* b_j)]."""
    if phi.dim != A.dim:
        raise NonState("state acts on matrices of another size")
    E = gns_module(A, phi.as_condexp(A))
    return Representation(A, E.left_action, E.xi)


@dataclass
class PairedGNS:
    pi: Representation
    sigma: Representation
    xi: np.ndarray

    @property
    def dim(self) -> int:
        return self.xi.shape[0]


def paired_gns(A: AlgebraSpec, phi: StateSpec, psi: StateSpec) -> PairedGNS:
    """Two representations on one space sharing the vector xi.

    H = H_phi ⊕ H_psi, xi = xi_phi ⊕ 0, pi = pi_phi ⊕ pi_psi and
    sigma = U (pi_phi ⊕ pi_psi) U with U the self-adjoint unitary swapping
    xi_phi ⊕ 0 and 0 ⊕ xi_psi. xi need not be cyclic.
    """
    rp, rq = gns(A, phi), gns(A, psi)
    n1, n2 = rp.dim, rq.dim
    n = n1 + n2
    mats = np.zeros((A.size, n, n), dtype=complex)
    mats[:, :n1, :n1] = rp.mats
    mats[:, n1:, n1:] = rq.mats
    x = np.concatenate([rp.xi, np.zeros(n2)]).astype(complex)
    y = np.concatenate([np.zeros(n1), rq.xi]).astype(complex)
    U = np.eye(n, dtype=complex) - np.outer(x, x.conj()) - np.outer(y, y.conj()) \
        + np.outer(x, y.conj()) + np.outer(y, x.conj())
    sig = np.einsum("ij,rjk,kl->ril", U, mats, U)
    return PairedGNS(Representation(A, mats, x), Representation(A, sig, x), x)


def random_density(d: int, rng: np.random.Generator, floor: float = 0.05) -> np.ndarray:
    """A full-rank density matrix (Ginibre sample mixed with the identity)."""
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ dagger(g)
    rho = rho / np.trace(rho)
    rho = (1 - floor) * rho + floor * np.eye(d) / d
    return (rho + dagger(rho)) / 2


def block_psd_min(blocks: np.ndarray) -> float:
    """Minimal eigenvalue of the block matrix [blocks[p, q]]."""
    m, _, d, _ = blocks.shape
    big = blocks.transpose(0, 2, 1, 3).reshape(m * d, m * d)
    return float(np.linalg.eigvalsh((big + dagger(big)) / 2).min())


class BimoduleMap:
    """A linear map theta: A -> D that fixes a common subalgebra B.

    ``b_source`` and ``b_target`` embed B into A and D. The map is expected
    to be B-bimodular and to restrict to the identity on B; ``residuals``
    measures both.
    """

    def __init__(self, source: AlgebraSpec, target: AlgebraSpec, map: LinearMap,
                 b_source: LinearMap, b_target: LinearMap, balg: AlgebraSpec, name: str = ""):
        if map.d_in != source.dim or map.d_out != target.dim:
            raise ShapeMismatch("map sizes do not match the algebras")
        self.source, self.target, self.map = source, target, map
        self.b_source, self.b_target, self.balg = b_source, b_target, balg
        self.name = name

    def __call__(self, a: np.ndarray) -> np.ndarray:
        return self.map(a)

    @classmethod
    def from_condexp(cls, psi: CondExpSpec) -> "BimoduleMap":
        """psi viewed as a map into B (D = B)."""
        B = psi.target
        return cls(psi.source, B, psi.map, psi.embedding, LinearMap.identity(B.dim), B)

    @classmethod
    def from_state(cls, A: AlgebraSpec, phi: StateSpec) -> "BimoduleMap":
        return cls.from_condexp(phi.as_condexp(A))

    def residuals(self, rng: Optional[np.random.Generator] = None, samples: int = 4) -> dict:
        rng = rng or np.random.default_rng(0)
        B = self.balg
        unit = max(opnorm(self(self.b_source(b)) - self.b_target(b)) for b in B.basis)
        bim = 0.0
        for _ in range(samples):
            a = self.source.random_element(rng)
            b1, b2 = B.random_element(rng), B.random_element(rng)
            lhs = self(self.b_source(b1) @ a @ self.b_source(b2))
            rhs = self.b_target(b1) @ self(a) @ self.b_target(b2)
            bim = max(bim, opnorm(lhs - rhs))
        return {"unit": unit, "bimodule": bim}
