"""Regenerate the bundled scenario files in src/monofock/data.

    python3 tools/make_scenarios.py
"""
import json
from pathlib import Path

import numpy as np

from monofock.algebra import random_density
from monofock.cp import random_correlation, random_isometry
from monofock.words import matrix_to_json

OUT = Path(__file__).resolve().parents[1] / "src" / "monofock" / "data"
INDICES = (1, 2, 3)


def rounded(m, digits=12):
    m = np.round(np.asarray(m, dtype=complex), digits)
    return m


def density(rng):
    rho = rounded(random_density(2, rng))
    rho = (rho + rho.conj().T) / 2
    rho = rho / np.trace(rho).real
    return matrix_to_json(rho)


def kraus(rng, rank=2):
    V = random_isometry(rng, 2 * rank, 2)
    return [matrix_to_json(V.reshape(2, rank, 2)[:, r, :]) for r in range(rank)]


def scalar(rng):
    algebras = []
    for i in INDICES:
        psi = density(rng)
        phi = psi if i == INDICES[0] else density(rng)
        algebras.append({"index": i, "basis": {"kind": "full", "dim": 2},
                         "psi": {"density": psi}, "phi": {"density": phi}})
    return {"name": "scalar", "seed": 7, "B": {"kind": "scalar"}, "algebras": algebras,
            "thetas": {str(i): {"kraus": kraus(rng)} for i in INDICES}}


def diagonal(rng):
    algebras = [{"index": i, "basis": {"kind": "full", "dim": 2}, "psi": {"kind": "diagonal"}}
                for i in INDICES]
    thetas = {}
    for i in INDICES:
        S = rounded(random_correlation(2, rng))
        np.fill_diagonal(S, 1)
        thetas[str(i)] = {"schur": matrix_to_json(S)}
    return {"name": "diagonal", "seed": 7, "B": {"kind": "diagonal", "dim": 2}, "algebras": algebras,
            "thetas": thetas}


def remark45():
    half = matrix_to_json(np.eye(2) / 2)
    algebras = [{"index": i, "basis": {"kind": "full", "dim": 2}, "psi": {"density": half},
                 "phi": {"density": half}} for i in INDICES]
    letters = [(1, [[0, 1], [3, 0]]), (3, [[0, -1j], [1j, 0]]), (2, [[1, 2], [0, -1]])]
    ce = {"letters": [{"index": i, "element": matrix_to_json(np.array(m, dtype=complex))} for i, m in letters],
          "expected_rhs": 6.708203932499369}
    return {"name": "remark45", "seed": 7, "B": {"kind": "scalar"}, "algebras": algebras,
            "counterexample": ce}


def main():
    rng = np.random.default_rng(20240601)
    OUT.mkdir(parents=True, exist_ok=True)
    for name, data in (("scalar", scalar(rng)), ("diagonal", diagonal(rng)), ("remark45", remark45())):
        (OUT / f"{name}.json").write_text(json.dumps(data, indent=1) + "\n")
        print("wrote", OUT / f"{name}.json")


if __name__ == "__main__":
    main()
