"""Brute-force value of the free-product peak counterexample.

Standalone: uses no code from the package. B = C, three copies of M_2, each
with the normalized trace state; vectors of the truncated free product space
are dicts mapping an index tuple to a list of simple tensors (coeff, [2x2]).

    python tools/free_peak_oracle.py
"""
import numpy as np

IDX = (1, 3, 2)
A1 = np.array([[0, 1], [3, 0]], dtype=complex)
A2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
A3 = np.array([[1, 2], [0, -1]], dtype=complex)


def tr(x):
    return np.trace(x) / 2


def inner(x, y):
    return tr(x.conj().T @ y)


def act(k, a, vec, literal=False):
    """Apply the letter a of index k to vec.

    With literal=False the vacuum component produced from a first slot of
    index k is returned to the tail whatever the tail's first index is.
    With literal=True that component is kept only when the tail is empty or
    starts below k.
    """
    out = {}

    def add(t, c, mats):
        out.setdefault(t, []).append((c, mats))

    eye = np.eye(2, dtype=complex)
    for t, terms in vec.items():
        for c, mats in terms:
            if not t:
                m = tr(a)
                add((), c * m, [])
                add((k,), c, [a - m * eye])
            elif t[0] > k:
                continue
            elif t[0] == k:
                x = a @ mats[0]
                m = tr(x)
                rest = t[1:]
                if not literal or not rest or rest[0] < k:
                    add(rest, c * m, mats[1:])
                add(t, c, [x - m * eye] + mats[1:])
            else:
                m = tr(a)
                add(t, c * m, mats)
                add((k,) + t, c, [a - m * eye] + mats)
    return out


def norm(vec):
    total = 0.0
    for t, terms in vec.items():
        for c1, m1 in terms:
            for c2, m2 in terms:
                p = np.conj(c1) * c2
                for x, y in zip(m1, m2):
                    p *= inner(x, y)
                total += p
    return float(np.sqrt(abs(total)))


def main():
    for a in (A1, A2, A3):
        assert abs(tr(a)) < 1e-15
    f2 = A2.conj().T
    g22 = inner(f2, f2)
    f3 = g22 * A3.conj().T
    start = {(IDX[2], IDX[1]): [(1.0, [f3, f2])]}
    for literal in (False, True):
        v = act(IDX[2], A3, start, literal)
        v = act(IDX[1], A2, v, literal)
        v = act(IDX[0], A1, v, literal)
        print(f"literal={literal}: |A1 A2 A3 (f3 x f2)| = {norm(v)!r}")
    closed = np.sqrt(inner(A1, A1).real) * abs(inner(f3, f3)) * abs(g22)
    print(f"closed form |a1^| <f3,f3> <f2,f2> = {closed!r}")


if __name__ == "__main__":
    main()
