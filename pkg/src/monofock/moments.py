"""Recursive evaluation of monotone moments and monotone products of maps.

One evaluator covers three rules. For a reduced word a_1 ... a_n with
indices i_1 != i_2 != ... the value theta(a_1 ... a_n) is computed by peeling
off a local maximum of the index sequence:

* first position, i_1 > i_2:   theta_{i_1}(a_1) theta(a_2 ... a_n)
* last position, i_n > i_{n-1}: theta(a_1 ... a_{n-1}) theta_{i_n}(a_n)
* interior peak i_{k-1} < i_k > i_{k+1}:
      theta(a_1 ... a_{k-1} psi(a_k) a_{k+1} ... a_n)
      + theta(a_1 ... a_{k-1}) [theta_{i_k}(a_k) - psi(a_k)] theta(a_{k+1} ... a_n)

With theta_i = psi_i the correction term vanishes and this is the monotone
moment rule; with B = D = C and theta_i = phi_i it is the conditionally
monotone rule. The canonical order uses the leftmost occurrence of the
largest index; any local maximum is admissible and gives the same value.
"""
from __future__ import annotations

from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .algebra import AlgebraSpec, BimoduleMap, LinearMap, opnorm
from .errors import ContextMismatch
from .report import VerificationReport
from .words import Family, Letter, Word, alternating_patterns, reduce, sample_random_word


class Rules:
    """Callbacks the evaluator needs; letters are (index, payload) pairs.

    The default implementation works with matrix letters of a Family.
    Subclasses may use other payloads (e.g. whole sub-words).
    """

    def __init__(self, family: Family, thetas: Optional[Mapping[int, BimoduleMap]] = None,
                 D: Optional[AlgebraSpec] = None, b_in_D: Optional[LinearMap] = None):
        self.family = family
        self.B = family.B
        self.monotone = thetas is None
        if thetas is None:
            self.D = self.B
            self.b_in_D = LinearMap.identity(self.B.dim)
            self.thetas = None
        else:
            missing = [i for i in family.indices if i not in thetas]
            if missing:
                raise ContextMismatch(f"no theta for indices {missing}")
            first = thetas[family.indices[0]]
            self.D = D or first.target
            self.b_in_D = b_in_D or first.b_target
            for i, t in thetas.items():
                if t.target.dim != self.D.dim:
                    raise ContextMismatch(f"theta_{i} has target of size {t.target.dim}")
                if t.source.dim != family[i].algebra.dim:
                    raise ContextMismatch(f"theta_{i} acts on matrices of size {t.source.dim}")
            self.thetas = dict(thetas)

    def psi(self, i, x):
        return self.family[i].psi(x)

    def theta(self, i, x):
        if self.thetas is None:
            return self.family[i].psi(x)
        return self.thetas[i](x)

    def embed_D(self, b):
        return self.b_in_D(b)

    def times_b(self, i, x, b):
        return x @ self.family[i].psi.embed(b)

    def b_times(self, i, b, x):
        return self.family[i].psi.embed(b) @ x

    def mul(self, i, x, y):
        return x @ y

    def key(self, letters) -> bytes:
        return b"|".join(np.int64(i).tobytes() + x.tobytes() for i, x in letters)

    @property
    def unit_D(self):
        return np.eye(self.D.dim, dtype=complex)


def _merge(letters: list, rules: Rules) -> list:
    out: list = []
    for i, x in letters:
        if out and out[-1][0] == i:
            out[-1] = (i, rules.mul(i, out[-1][1], x))
        else:
            out.append((i, x))
    return out


def local_peaks(indices: Sequence[int]) -> list:
    """Positions where one of the three rules applies."""
    n = len(indices)
    out = []
    for k in range(n):
        left = k == 0 or indices[k - 1] < indices[k]
        right = k == n - 1 or indices[k + 1] < indices[k]
        if left and right:
            out.append(k)
    return out


class Evaluator:
    def __init__(self, rules: Rules, rng: Optional[np.random.Generator] = None,
                 memo: bool = True):
        self.rules = rules
        self.rng = rng
        self.memo: Optional[dict] = {} if (memo and rng is None) else None
        self.trace: list = []

    def position(self, indices) -> int:
        if self.rng is None:
            return indices.index(max(indices))
        peaks = local_peaks(indices)
        k = peaks[int(self.rng.integers(len(peaks)))]
        self.trace.append(k)
        return k

    def __call__(self, letters) -> np.ndarray:
        letters = tuple(letters)
        r = self.rules
        n = len(letters)
        if n == 0:
            return r.unit_D
        if n == 1:
            i, x = letters[0]
            return r.theta(i, x)
        if self.memo is not None:
            key = r.key(letters)
            hit = self.memo.get(key)
            if hit is not None:
                return hit
        indices = [i for i, _ in letters]
        k = self.position(indices)
        i, x = letters[k]
        if k == 0:
            val = r.theta(i, x) @ self(letters[1:])
        elif k == n - 1:
            val = self(letters[:-1]) @ r.theta(i, x)
        else:
            b = r.psi(i, x)
            j, y = letters[k - 1]
            shrunk = list(letters[:k - 1]) + [(j, r.times_b(j, y, b))] + list(letters[k + 1:])
            val = self(_merge(shrunk, r))
            if not r.monotone:
                corr = r.theta(i, x) - r.embed_D(b)
                if opnorm(corr) > 0:
                    val = val + self(letters[:k]) @ corr @ self(letters[k + 1:])
        if self.memo is not None:
            self.memo[key] = val
        return val


def _letters(w: Word, family: Family):
    w = reduce(w, family)
    return w.coeff, tuple((l.index, l.element) for l in w.letters)


def eval_with(w: Word, rules: Rules, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    c, letters = _letters(w, rules.family)
    return c * Evaluator(rules, rng)(letters)


def eval_monotone(w: Word, family: Family) -> np.ndarray:
    """B-valued monotone moment psi(a_1 ... a_n)."""
    return eval_with(w, Rules(family))


def eval_map_product(w: Word, family: Family, thetas: Optional[Mapping[int, BimoduleMap]] = None,
                     D: Optional[AlgebraSpec] = None) -> np.ndarray:
    """Monotone product of the maps theta_i (taken from the family if omitted)."""
    if thetas is None:
        thetas = {m.index: m.theta for m in family}
        if any(t is None for t in thetas.values()):
            raise ContextMismatch("family members carry no theta")
    return eval_with(w, Rules(family, thetas, D))


def cmonotone_rules(family: Family) -> Rules:
    if not family.scalar:
        raise ContextMismatch("conditionally monotone moments need B = C")
    thetas = {}
    for m in family:
        if m.phi is None:
            raise ContextMismatch(f"algebra {m.index} has no phi")
        thetas[m.index] = BimoduleMap.from_state(m.algebra, m.phi)
    return Rules(family, thetas)


def eval_cmonotone(w: Word, family: Family) -> complex:
    """Scalar phi-moment of the conditionally monotone product of (phi_i, psi_i)."""
    return complex(eval_with(w, cmonotone_rules(family))[0, 0])


def check_order_independence(w: Word, rules: Rules, n_orders: int = 10,
                             rng: Optional[np.random.Generator] = None,
                             tol: float = 1e-9, report: Optional[VerificationReport] = None,
                             case_id: str = "order") -> VerificationReport:
    """Evaluate w along random admissible rule orders; record max deviation."""
    rng = rng or np.random.default_rng(0)
    report = report or VerificationReport("moments")
    ref = eval_with(w, rules)
    dev = 0.0
    orders = set()
    for _ in range(n_orders):
        ev_rng = np.random.default_rng(rng.integers(2**63))
        c, letters = _letters(w, rules.family)
        ev = Evaluator(rules, ev_rng, memo=False)
        val = c * ev(letters)
        orders.add(tuple(ev.trace))
        dev = max(dev, opnorm(val - ref))
    report.add(case_id, "associativity of the monotone product", "max_deviation", dev, tol,
               orders=len(orders), length=len(w))
    return report


# nested products -----------------------------------------------------------


class NestedRules(Rules):
    """Letters are whole sub-words over consecutive blocks of the index set.

    Block g carries psi'_g = monotone moment of its subfamily and
    theta'_g = monotone map product of its subfamily.
    """

    def __init__(self, family: Family, groups: Sequence[Sequence[int]],
                 thetas: Optional[Mapping[int, BimoduleMap]] = None):
        super().__init__(family, thetas)
        flat = [i for g in groups for i in g]
        if sorted(flat) != list(family.indices):
            raise ContextMismatch("groups must partition the index set")
        for a, b in zip(groups, groups[1:]):
            if max(a) >= min(b):
                raise ContextMismatch("groups must be consecutive blocks of the order")
        self.groups = [tuple(g) for g in groups]
        self.sub = [Rules(family.subfamily(g),
                          None if thetas is None else {i: thetas[i] for i in g}) for g in self.groups]
        self.sub_psi = [Rules(family.subfamily(g)) for g in self.groups]
        self.where = {i: gi for gi, g in enumerate(self.groups) for i in g}

    def psi(self, g, x):
        return Evaluator(self.sub_psi[g])(x)

    def theta(self, g, x):
        return Evaluator(self.sub[g])(x)

    def times_b(self, g, x, b):
        i, y = x[-1]
        return x[:-1] + ((i, y @ self.family[i].psi.embed(b)),)

    def b_times(self, g, b, x):
        i, y = x[0]
        return ((i, self.family[i].psi.embed(b) @ y),) + x[1:]

    def mul(self, g, x, y):
        return _plain_merge(x + y)

    def key(self, letters) -> bytes:
        return b"#".join(np.int64(g).tobytes() + Rules.key(self, x) for g, x in letters)

    def group(self, w: Word):
        """Cut a reduced word into maximal runs inside one block."""
        c, letters = _letters(w, self.family)
        out: list = []
        for i, x in letters:
            g = self.where[i]
            if out and out[-1][0] == g:
                out[-1] = (g, out[-1][1] + ((i, x),))
            else:
                out.append((g, ((i, x),)))
        return c, tuple(out)


def _plain_merge(letters):
    out: list = []
    for i, x in letters:
        if out and out[-1][0] == i:
            out[-1] = (i, out[-1][1] @ x)
        else:
            out.append((i, x))
    return tuple(out)


def eval_nested(w: Word, family: Family, groups: Sequence[Sequence[int]],
                thetas: Optional[Mapping[int, BimoduleMap]] = None) -> np.ndarray:
    """Evaluate w as an iterated product: first inside each block, then across."""
    rules = NestedRules(family, groups, thetas)
    c, letters = rules.group(w)
    return c * Evaluator(rules)(letters)


def pattern_sweep(family: Family, max_len: int, rng: np.random.Generator):
    """One word with fresh random letters for every alternating index pattern."""
    for p in alternating_patterns(family.indices, max_len):
        yield Word(tuple(Letter(i, family[i].algebra.random_element(rng)) for i in p))


def random_words(family: Family, count: int, maxlen: int, rng: np.random.Generator):
    return [sample_random_word(rng, maxlen, family) for _ in range(count)]


def check_linearity(w: Word, family: Family, evaluate: Callable, rng: np.random.Generator,
                    trials: int = 5) -> float:
    """max |f(.., x + t y, ..) - f(.., x, ..) - t f(.., y, ..)| over random slots."""
    if not w.letters:
        return 0.0
    worst = 0.0
    for _ in range(trials):
        k = int(rng.integers(len(w)))
        l = w.letters[k]
        y = family[l.index].algebra.random_element(rng)
        t = complex(rng.standard_normal(), rng.standard_normal())
        def at(e):
            ls = list(w.letters)
            ls[k] = Letter(l.index, e)
            return np.asarray(evaluate(Word(tuple(ls), w.coeff)))
        worst = max(worst, opnorm(np.atleast_2d(at(l.element + t * y) - at(l.element) - t * at(y))))
    return worst
