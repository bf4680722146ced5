"""The scalar monotone Fock space of a finite ordered family of Hilbert spaces.

    H = C xi  ⊕  ⊕_{i_1 > ... > i_n}  H_{i_1}° ⊗ ... ⊗ H_{i_n}°

Every space is C^n with a distinguished unit vector xi_i and H_i° its
orthocomplement. H(k) is the span of xi and the tuples starting at or below
k. V_k: H -> H_k ⊗ H(k-1) sends a tuple starting above k to 0, splits off
the first factor when it starts at k, and prepends xi_k otherwise.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy import linalg as sla

from .algebra import PairedGNS, StateSpec, dagger, opnorm, paired_gns
from .errors import AssumptionViolation, EmptyFamily, ShapeMismatch, UnknownIndex
from .moments import eval_cmonotone, local_peaks
from .report import VerificationReport
from .words import Family, Letter, Word, reduce


def decreasing_tuples(indices: Sequence[int]) -> list:
    """(), then all strictly decreasing tuples by length and lexicographically."""
    desc = sorted(indices, reverse=True)
    out = [()]
    for n in range(1, len(desc) + 1):
        out.extend(itertools.combinations(desc, n))
    return out


@dataclass
class FockOperator:
    matrix: np.ndarray
    tag: str = "generic"

    def __matmul__(self, other):
        m = other.matrix if isinstance(other, FockOperator) else other
        return FockOperator(self.matrix @ m)

    @property
    def H(self) -> "FockOperator":
        return FockOperator(dagger(self.matrix), self.tag + "*")


class MonotoneFock:
    """Enumerated basis, embeddings and structural operators of H."""

    def __init__(self, xis: Mapping[int, np.ndarray], gns: Optional[Mapping[int, PairedGNS]] = None):
        if not xis:
            raise EmptyFamily("no Hilbert spaces given")
        self.indices = tuple(sorted(xis))
        self.xis = {}
        self.centered = {}
        for i in self.indices:
            x = np.asarray(xis[i], dtype=complex).reshape(-1)
            if abs(np.linalg.norm(x) - 1) > 1e-10:
                raise ShapeMismatch(f"xi_{i} is not a unit vector")
            self.xis[i] = x
            # orthonormal basis of H_i° (Gram-Schmidt against xi_i via an SVD)
            self.centered[i] = sla.null_space(x.conj()[None, :], rcond=1e-12).astype(complex)
        self.gns = dict(gns) if gns is not None else None
        self.tuples = decreasing_tuples(self.indices)
        self.offsets = {}
        self.block_dims = {}
        off = 0
        for t in self.tuples:
            d = int(np.prod([self.centered[i].shape[1] for i in t])) if t else 1
            self.offsets[t] = off
            self.block_dims[t] = d
            off += d
        self.dim = off
        self._V = {}
        self._jbasis = {}

    # basis bookkeeping ---------------------------------------------------
    def block(self, t: tuple) -> slice:
        o = self.offsets[t]
        return slice(o, o + self.block_dims[t])

    def local_dim(self, k: int) -> int:
        self._check(k)
        return self.xis[k].shape[0]

    def _check(self, k: int) -> None:
        if k not in self.xis:
            raise UnknownIndex(f"index {k} not in {self.indices}")

    def mask(self, pred) -> np.ndarray:
        m = np.zeros(self.dim, dtype=bool)
        for t in self.tuples:
            if pred(t):
                m[self.block(t)] = True
        return m

    def sub_mask(self, k: float) -> np.ndarray:
        """Basis mask of H(k): xi and tuples whose first index is <= k."""
        return self.mask(lambda t: not t or t[0] <= k)

    def sub_centered_mask(self, k: float) -> np.ndarray:
        """H(k)° = H(k) ⊖ C xi."""
        return self.mask(lambda t: bool(t) and t[0] <= k)

    @property
    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1
        return v

    def projector(self, mask: np.ndarray) -> np.ndarray:
        return np.diag(mask.astype(complex))

    def embedding(self, k: int) -> np.ndarray:
        """Isometry H_k -> H as C xi ⊕ H_k°."""
        self._check(k)
        n = self.local_dim(k)
        J = np.zeros((self.dim, n), dtype=complex)
        J[0] = self.xis[k].conj()
        J[self.block((k,))] = dagger(self.centered[k])
        return J

    # structural operators -------------------------------------------------
    def make_V(self, k: int) -> FockOperator:
        self._check(k)
        if k in self._V:
            return self._V[k]
        low = np.flatnonzero(self.sub_mask(k - 0.5))  # H(k-1) inside H
        pos = {int(p): r for r, p in enumerate(low)}
        D = len(low)
        n = self.local_dim(k)
        V = np.zeros((n * D, self.dim), dtype=complex)
        for t in self.tuples:
            cols = self.block(t)
            if t and t[0] > k:
                continue
            if t and t[0] == k:
                rest = t[1:]
                rows_rest = [pos[p] for p in range(self.offsets[rest], self.offsets[rest] + self.block_dims[rest])]
                E = np.zeros((D, len(rows_rest)))
                E[rows_rest, np.arange(len(rows_rest))] = 1
                V[:, cols] = np.kron(self.centered[k], E)
            else:
                rows_t = [pos[p] for p in range(self.offsets[t], self.offsets[t] + self.block_dims[t])]
                E = np.zeros((D, len(rows_t)))
                E[rows_t, np.arange(len(rows_t))] = 1
                V[:, cols] = np.kron(self.xis[k][:, None], E)
        op = FockOperator(V, f"V_{k}")
        self._V[k] = op
        return op

    def low_dim(self, k: int) -> int:
        return int(self.sub_mask(k - 0.5).sum())

    def omega(self, k: int, T: np.ndarray) -> FockOperator:
        """omega_k(T) = V_k* (T ⊗ Id_{H(k-1)}) V_k."""
        n = self.local_dim(k)
        T = np.asarray(T, dtype=complex)
        if T.shape != (n, n):
            raise ShapeMismatch(f"T has shape {T.shape}, expected {(n, n)}")
        V = self.make_V(k).matrix
        return FockOperator(dagger(V) @ np.kron(T, np.eye(self.low_dim(k))) @ V, f"omega_{k}")

    def P(self, k: int) -> FockOperator:
        """Projection onto C xi ⊕ H_k° (xi_k identified with xi)."""
        self._check(k)
        return FockOperator(self.projector(self.mask(lambda t: t in ((), (k,)))), f"P_{k}")

    def j(self, k: int, a: np.ndarray, pi=None, sigma=None) -> FockOperator:
        """j_k(a) = omega_k(pi_k(a)) P_k + omega_k(sigma_k(a)) P_k^perp."""
        self._check(k)
        if pi is None or sigma is None:
            if self.gns is None:
                raise ShapeMismatch("no representations attached; pass pi and sigma")
            g = self.gns[k]
            if k not in self._jbasis:
                # j_k is linear: images of the algebra basis, combined by coordinates
                self._jbasis[k] = np.stack([self._j_matrix(k, x, y) for x, y in zip(g.pi.mats, g.sigma.mats)])
            c = g.pi.algebra.coords(np.asarray(a, dtype=complex))
            return FockOperator(np.tensordot(c, self._jbasis[k], axes=1), f"j_{k}")
        return FockOperator(self._j_matrix(k, pi(a), sigma(a)), f"j_{k}")

    def _j_matrix(self, k: int, pa: np.ndarray, sa: np.ndarray) -> np.ndarray:
        keep = self.mask(lambda t: t in ((), (k,)))
        return np.where(keep[None, :], self.omega(k, pa).matrix, self.omega(k, sa).matrix)

    def vacuum_state(self, T) -> complex:
        m = T.matrix if isinstance(T, FockOperator) else np.asarray(T)
        return complex(m[0, 0])

    def word_operator(self, w: Word) -> np.ndarray:
        m = np.eye(self.dim, dtype=complex)
        for l in w.letters:
            m = m @ self.j(l.index, l.element).matrix
        return w.coeff * m

    def moment(self, w: Word) -> complex:
        """Phi(j_{i_1}(a_1) ... j_{i_n}(a_n)), applied to the vacuum right-to-left."""
        v = self.vacuum
        for l in reversed(w.letters):
            v = self.j(l.index, l.element).matrix @ v
        return complex(w.coeff * v[0])


def scalar_state(psi) -> StateSpec:
    """The density of a C-valued conditional expectation."""
    d = psi.source.dim
    return StateSpec(psi.map.matrix.reshape(d, d).T)


def build_fock(family: Union[Family, Mapping[int, np.ndarray]], strict: bool = False) -> MonotoneFock:
    """Monotone Fock space of a family.

    A Family with (phi_i, psi_i) per index is turned into paired GNS
    representations first. In strict mode the lowest index must carry
    phi = psi; otherwise the mismatch is only recorded in ``assumptions``.
    """
    if isinstance(family, Family):
        gns = {}
        for m in family:
            if m.phi is None:
                raise ShapeMismatch(f"algebra {m.index} has no phi")
            gns[m.index] = paired_gns(m.algebra, m.phi, scalar_state(m.psi))
        F = MonotoneFock({i: g.xi for i, g in gns.items()}, gns)
        low = family[family.indices[0]]
        gap = float(np.abs(low.phi.density - scalar_state(low.psi).density).max())
        F.assumptions = {"lowest_phi_equals_psi": gap <= 1e-12, "gap": gap}
        if strict and gap > 1e-12:
            raise AssumptionViolation(f"phi and psi differ on the lowest index by {gap:.3e}")
        return F
    F = MonotoneFock(family)
    F.assumptions = {}
    return F


# verifiers -----------------------------------------------------------------


def verify_vacuum_decomposition(F: MonotoneFock, words: Sequence[Word], tol: float = 1e-9,
                                report: Optional[VerificationReport] = None) -> VerificationReport:
    """A_1 ... A_n xi - Phi(A_1 ... A_n) xi lies in H(i_1)°.

    The statement leaves the level unbound; the proof gives H(i_1)°, which
    is what is tested.
    """
    report = report or VerificationReport("fock-scalar")
    worst = 0.0
    for w in words:
        if not w.letters:
            continue
        v = F.vacuum
        for l in reversed(w.letters):
            v = F.j(l.index, l.element).matrix @ v
        eta = v - v[0] * F.vacuum
        outside = ~F.sub_centered_mask(w.letters[0].index)
        worst = max(worst, float(np.linalg.norm(eta[outside])))
    report.add("vacuum-decomposition", "lemma: A xi - Phi(A) xi in H(i_1)°", "residual", worst, tol,
               words=len(words), level="H(i_1)°")
    return report


def verify_cmonotone_rules(F: MonotoneFock, family: Family, words: Sequence[Word], tol: float = 1e-9,
                           report: Optional[VerificationReport] = None) -> VerificationReport:
    """Vacuum moments against the three peak rules and the recursive evaluator."""
    report = report or VerificationReport("fock-scalar")
    res = {"first": 0.0, "last": 0.0, "interior": 0.0, "evaluator": 0.0}
    counts = dict.fromkeys(res, 0)
    for w in words:
        w = reduce(w, family)
        lhs = F.moment(w)
        res["evaluator"] = max(res["evaluator"], abs(lhs - eval_cmonotone(w, family)))
        counts["evaluator"] += 1
        ls, n = w.letters, len(w.letters)
        if n < 2:
            continue
        for k in local_peaks(list(w.indices)):
            m = family[ls[k].index]
            a = ls[k].element
            phi, psi = m.phi(a), complex(m.psi(a)[0, 0])
            if k == 0:
                rhs = phi * F.moment(Word(ls[1:], w.coeff))
                key = "first"
            elif k == n - 1:
                rhs = F.moment(Word(ls[:-1], w.coeff)) * phi
                key = "last"
            else:
                prev = ls[k - 1]
                shrunk = ls[:k - 1] + (Letter(prev.index, psi * prev.element),) + ls[k + 1:]
                rhs = (F.moment(Word(ls[:k], w.coeff)) * (phi - psi) * F.moment(Word(ls[k + 1:]))
                       + F.moment(reduce(Word(shrunk, w.coeff), family)))
                key = "interior"
            res[key] = max(res[key], abs(lhs - rhs))
            counts[key] += 1
    anchors = {"first": "c-monotone rule (i): i_1 > i_2",
               "last": "c-monotone rule (ii): i_n > i_{n-1}",
               "interior": "c-monotone rule (iii): interior peak",
               "evaluator": "vacuum moments = recursive c-monotone evaluator"}
    for key, val in res.items():
        report.add(f"cmonotone-{key}", anchors[key], "residual", val, tol, checked=counts[key])
    return report


def verify_structure(F: MonotoneFock, rng: np.random.Generator, tol: float = 1e-10,
                     report: Optional[VerificationReport] = None) -> VerificationReport:
    """Partial isometries V_k, multiplicativity of omega_k and j_k, Phi o j_k = phi_k."""
    report = report or VerificationReport("fock-scalar")
    piso = omul = ostar = jmul = jstar = state = 0.0
    for k in F.indices:
        V = F.make_V(k).matrix
        piso = max(piso, opnorm(V @ dagger(V) @ V - V))
        n = F.local_dim(k)
        T1 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        T2 = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        omul = max(omul, opnorm(F.omega(k, T1 @ T2).matrix - F.omega(k, T1).matrix @ F.omega(k, T2).matrix))
        ostar = max(ostar, opnorm(F.omega(k, dagger(T1)).matrix - dagger(F.omega(k, T1).matrix)))
        if F.gns is not None:
            g = F.gns[k]
            A = g.pi.algebra
            a, b = A.random_element(rng), A.random_element(rng)
            ja, jb = F.j(k, a).matrix, F.j(k, b).matrix
            jmul = max(jmul, opnorm(F.j(k, a @ b).matrix - ja @ jb))
            jstar = max(jstar, opnorm(F.j(k, dagger(a)).matrix - dagger(ja)))
            # Phi o j_k = phi_k with phi_k read off the GNS data
            state = max(state, abs(F.vacuum_state(F.j(k, a)) - np.vdot(g.xi, g.pi(a) @ g.xi)))
    report.add("V-partial-isometry", "V_k V_k* V_k = V_k", "residual", piso, tol)
    report.add("omega-multiplicative", "omega_k(T1 T2) = omega_k(T1) omega_k(T2)", "residual", omul, tol)
    report.add("omega-star", "omega_k(T*) = omega_k(T)*", "residual", ostar, tol)
    if F.gns is not None:
        report.add("j-multiplicative", "j_k(ab) = j_k(a) j_k(b)", "residual", jmul, 10 * tol)
        report.add("j-star", "j_k(a*) = j_k(a)*", "residual", jstar, 10 * tol)
        report.add("vacuum-single", "Phi o j_k = phi_k", "residual", state, 10 * tol)
    return report
