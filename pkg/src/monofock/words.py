"""Alternating words over an indexed family of algebras.

A family is a finite totally ordered (by integer index) collection of
algebras A_i, each with a conditional expectation psi_i onto a common
subalgebra B. Words are sequences of letters (index, matrix) with numeric
entries; reduction multiplies adjacent letters from the same algebra.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .algebra import (
    AlgebraSpec,
    BimoduleMap,
    CondExpSpec,
    StateSpec,
    dagger,
)
from .errors import EmptyFamily, MixedB, ShapeMismatch, UnknownIndex


@dataclass(frozen=True)
class Member:
    index: int
    algebra: AlgebraSpec
    psi: CondExpSpec
    phi: Optional[StateSpec] = None
    theta: Optional[BimoduleMap] = None


class Family:
    """Algebras indexed by integers, all amalgamated over one B."""

    def __init__(self, members: Iterable[Member]):
        members = sorted(members, key=lambda m: m.index)
        if not members:
            raise EmptyFamily("family has no algebras")
        idx = [m.index for m in members]
        if len(set(idx)) != len(idx):
            raise ShapeMismatch(f"duplicate indices in {idx}")
        self.B = members[0].psi.target
        for m in members:
            if not m.psi.target.same_as(self.B):
                raise MixedB(f"algebra {m.index} has a different B")
            if m.psi.source is not m.algebra and not m.psi.source.same_as(m.algebra):
                raise ShapeMismatch(f"psi of algebra {m.index} acts on another algebra")
        self._members = {m.index: m for m in members}
        self.indices = tuple(idx)

    @classmethod
    def from_states(cls, algebras: Mapping[int, AlgebraSpec], psis: Mapping[int, StateSpec],
                    phis: Optional[Mapping[int, StateSpec]] = None) -> "Family":
        """Scalar family (B = C) from states."""
        members = []
        for i, A in algebras.items():
            phi = None if phis is None else phis[i]
            members.append(Member(i, A, psis[i].as_condexp(A), phi))
        return cls(members)

    def __getitem__(self, i: int) -> Member:
        try:
            return self._members[i]
        except KeyError:
            raise UnknownIndex(f"index {i} not in family {self.indices}") from None

    def __contains__(self, i) -> bool:
        return i in self._members

    def __iter__(self):
        return iter(self._members[i] for i in self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def scalar(self) -> bool:
        return self.B.dim == 1

    def subfamily(self, indices: Iterable[int]) -> "Family":
        return Family(self[i] for i in indices)

    def with_members(self, **changes) -> "Family":
        """Copy with per-member fields replaced: ``thetas={i: map}`` etc."""
        out = []
        for m in self:
            kw = {k[:-1]: v[m.index] for k, v in changes.items() if m.index in v}
            out.append(Member(m.index, kw.get("algebra", m.algebra), kw.get("psi", m.psi),
                              kw.get("phi", m.phi), kw.get("theta", m.theta)))
        return Family(out)


@dataclass(frozen=True)
class Letter:
    index: int
    element: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "element", np.asarray(self.element, dtype=complex))


@dataclass(frozen=True)
class Word:
    letters: tuple = ()
    coeff: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple(
            l if isinstance(l, Letter) else Letter(*l) for l in self.letters))
        object.__setattr__(self, "coeff", complex(self.coeff))

    def __len__(self) -> int:
        return len(self.letters)

    @property
    def indices(self) -> tuple:
        return tuple(l.index for l in self.letters)

    def is_alternating(self) -> bool:
        ind = self.indices
        return all(a != b for a, b in zip(ind, ind[1:]))

    def same_letters(self, other: "Word", tol: float = 1e-12) -> bool:
        return self.indices == other.indices and all(
            np.allclose(a.element, b.element, atol=tol, rtol=0)
            for a, b in zip(self.letters, other.letters))

    def key(self) -> bytes:
        parts = [np.int64(l.index).tobytes() + l.element.tobytes() for l in self.letters]
        return b"|".join(parts)


def _check(letter: Letter, family: Family) -> AlgebraSpec:
    A = family[letter.index].algebra
    if letter.element.shape != (A.dim, A.dim):
        raise ShapeMismatch(f"letter of index {letter.index} has shape {letter.element.shape}")
    return A


def _b_part(letter: Letter, family: Family, tol: float = 1e-12):
    """The B-element a letter equals, or None."""
    psi = family[letter.index].psi
    b = psi(letter.element)
    if np.linalg.norm(psi.embed(b) - letter.element) <= tol * max(1.0, np.linalg.norm(b)):
        return b
    return None


def reduce(letters, family: Family, amalgamated: bool = False, coeff: complex = 1.0) -> Word:
    """Multiply adjacent same-index letters so the result alternates.

    With ``amalgamated`` letters lying in the copy of B are absorbed into
    their left neighbour (the right one at the start of the word). Without it
    the units of different algebras stay distinct, which is what a monotone
    product needs: there j_i(1) is a projection, not the identity.
    """
    if isinstance(letters, Word):
        coeff = coeff * letters.coeff
        letters = letters.letters
    out: list[Letter] = []
    pending_b = None
    for l in letters:
        l = l if isinstance(l, Letter) else Letter(*l)
        _check(l, family)
        if amalgamated:
            b = _b_part(l, family)
            if b is not None:
                if out:
                    prev = out[-1]
                    out[-1] = Letter(prev.index, prev.element @ family[prev.index].psi.embed(b))
                else:
                    pending_b = b if pending_b is None else pending_b @ b
                continue
            if pending_b is not None:
                l = Letter(l.index, family[l.index].psi.embed(pending_b) @ l.element)
                pending_b = None
        if out and out[-1].index == l.index:
            out[-1] = Letter(l.index, out[-1].element @ l.element)
        else:
            out.append(l)
    if pending_b is not None:
        # a word made of B alone: keep it as a letter of the first index
        i = family.indices[0]
        if family.B.dim == 1:
            coeff = coeff * complex(pending_b[0, 0])
        else:
            out.append(Letter(i, family[i].psi.embed(pending_b)))
    return Word(tuple(out), coeff)


def center(letter: Letter, psi: CondExpSpec):
    """Split a = a° + psi(a) with psi(a°) = 0."""
    mean = psi(letter.element)
    return Letter(letter.index, letter.element - psi.embed(mean)), mean


def adjoint(w: Word) -> Word:
    return Word(tuple(Letter(l.index, dagger(l.element)) for l in reversed(w.letters)),
                np.conj(w.coeff))


def multiply(w1: Word, w2: Word, family: Family, amalgamated: bool = False) -> Word:
    return reduce(w1.letters + w2.letters, family, amalgamated, w1.coeff * w2.coeff)


def random_indices(rng: np.random.Generator, length: int, indices: Sequence[int]) -> tuple:
    out: list[int] = []
    for _ in range(length):
        choices = [i for i in indices if not out or i != out[-1]]
        out.append(int(choices[rng.integers(len(choices))]))
    return tuple(out)


def sample_random_word(rng: np.random.Generator, maxlen: int, family: Family,
                       length: Optional[int] = None, centered: bool = False) -> Word:
    """Alternating word with random indices and unit-norm Gaussian letters."""
    if length is None:
        length = int(rng.integers(1, maxlen + 1))
    if len(family) == 1:
        length = min(length, 1)
    letters = []
    for i in random_indices(rng, length, family.indices):
        l = Letter(i, family[i].algebra.random_element(rng))
        if centered:
            l = center(l, family[i].psi)[0]
        letters.append(l)
    return Word(tuple(letters))


def word_for_pattern(pattern: Sequence[int], family: Family, rng: np.random.Generator) -> Word:
    return Word(tuple(Letter(i, family[i].algebra.random_element(rng)) for i in pattern))


def alternating_patterns(indices: Sequence[int], max_len: int, min_len: int = 1):
    """All alternating index sequences of length min_len..max_len."""
    def grow(prefix, n):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for i in indices:
            if not prefix or prefix[-1] != i:
                yield from grow(prefix + [i], n)
    for n in range(min_len, max_len + 1):
        yield from grow([], n)


@dataclass
class NCPoly:
    """Formal linear combination of words."""

    terms: list = field(default_factory=list)

    def add(self, w: Word, tol: float = 1e-14) -> "NCPoly":
        for k, t in enumerate(self.terms):
            if t.same_letters(w, tol):
                self.terms[k] = Word(t.letters, t.coeff + w.coeff)
                return self
        self.terms.append(w)
        return self

    @classmethod
    def from_words(cls, words: Iterable[Word]) -> "NCPoly":
        p = cls()
        for w in words:
            p.add(w)
        return p

    def adjoint(self) -> "NCPoly":
        return NCPoly([adjoint(w) for w in self.terms])

    def multiply(self, other: "NCPoly", family: Family, amalgamated: bool = False) -> "NCPoly":
        return NCPoly.from_words(multiply(a, b, family, amalgamated)
                                 for a in self.terms for b in other.terms)


def random_poly(rng: np.random.Generator, family: Family, maxlen: int, n_terms: int,
                allow_empty: bool = True) -> NCPoly:
    words = []
    for _ in range(n_terms):
        n = int(rng.integers(0 if allow_empty else 1, maxlen + 1))
        w = Word() if n == 0 else sample_random_word(rng, maxlen, family, length=n)
        c = rng.standard_normal() + 1j * rng.standard_normal()
        words.append(Word(w.letters, c))
    return NCPoly.from_words(words)


# JSON -------------------------------------------------------------------

def complex_to_json(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def matrix_to_json(m: np.ndarray) -> list:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    return [[complex_to_json(z) for z in row] for row in m]


def complex_from_json(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v):
        return complex(v[0], v[1])
    raise ValueError(f"not a complex number: {v!r}")


def matrix_from_json(rows) -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ValueError("matrix must be a non-empty list of rows")
    m = np.array([[complex_from_json(z) for z in r] for r in rows], dtype=complex)
    if m.ndim != 2:
        raise ValueError("matrix rows have different lengths")
    return m


def word_to_json(w: Word) -> dict:
    return {"coeff": complex_to_json(w.coeff),
            "letters": [{"index": l.index, "element": matrix_to_json(l.element)} for l in w.letters]}


def word_from_json(d: dict) -> Word:
    letters = tuple(Letter(int(l["index"]), matrix_from_json(l["element"])) for l in d.get("letters", []))
    return Word(letters, complex_from_json(d.get("coeff", [1.0, 0.0])))
