"""Scenario files: a family of algebras over B, optional maps and demo letters.

Schema (complex numbers are [re, im] pairs, matrices row-major nested lists)::

    {
      "name": "scalar",
      "seed": 7,                                  # optional
      "B": {"kind": "scalar"} | {"kind": "diagonal", "dim": 2} | {"basis": [M, ...]},
      "algebras": [
        {"index": 1,
         "basis": {"kind": "full", "dim": 2} | [M, ...],
         "psi": {"density": M} | {"kind": "diagonal"},
         "phi": {"density": M}}                   # optional, B = C only
      ],
      "thetas": {"1": {"kraus": [M, ...]} | {"schur": M} | {"kind": "identity"}},   # optional
      "counterexample": {"letters": [{"index": i, "element": M}, ...],
                         "expected_rhs": float},  # optional
      "tolerances": {"eq": 1e-9, "eig": 1e-8}     # optional
    }
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .algebra import (
    AlgebraSpec,
    BimoduleMap,
    CondExpSpec,
    LinearMap,
    SCALARS,
    StateSpec,
    embedding_map,
    opnorm,
)
from .cp import schur_map
from .errors import MixedB, MonofockError, ScenarioError
from .words import Family, Letter, Member, matrix_from_json

BUNDLED = ("scalar", "diagonal", "remark45")
DEFAULT_TOLERANCES = {"eq": 1e-9, "eig": 1e-8}


@dataclass
class Scenario:
    name: str
    family: Family
    thetas: Optional[dict] = None
    letters: Optional[list] = None
    expected_rhs: Optional[float] = None
    seed: Optional[int] = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    source: Optional[str] = None

    @property
    def scalar(self) -> bool:
        return self.family.scalar

    @property
    def has_phi(self) -> bool:
        return all(m.phi is not None for m in self.family)


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise ScenarioError(f"no bundled scenario {name!r}; choose from {', '.join(BUNDLED)}")
    return Path(str(resources.files("monofock") / "data" / f"{name}.json"))


def _matrix(v, what: str) -> np.ndarray:
    try:
        m = matrix_from_json(v)
    except (TypeError, ValueError, IndexError, KeyError) as e:
        raise ScenarioError(f"{what}: not a matrix ({e})") from None
    if m.ndim != 2:
        raise ScenarioError(f"{what}: not a matrix")
    return m


def _require(d: dict, key: str, what: str):
    if not isinstance(d, dict) or key not in d:
        raise ScenarioError(f"{what}: missing {key!r}")
    return d[key]


def _algebra(spec, what: str) -> AlgebraSpec:
    if isinstance(spec, dict):
        kind = spec.get("kind")
        dim = spec.get("dim")
        if kind == "scalar":
            return SCALARS if dim in (None, 1) else AlgebraSpec.scalars(int(dim))
        if not isinstance(dim, int) or dim < 1:
            raise ScenarioError(f"{what}: 'dim' must be a positive integer")
        if kind == "full":
            return AlgebraSpec.full(dim)
        if kind == "diagonal":
            return AlgebraSpec.diagonal(dim)
        if "basis" in spec:
            return _algebra(spec["basis"], what)
        raise ScenarioError(f"{what}: unknown kind {kind!r}")
    if isinstance(spec, list) and spec:
        mats = [_matrix(x, f"{what} basis") for x in spec]
        try:
            return AlgebraSpec(mats, check=True)
        except MonofockError as e:
            raise ScenarioError(f"{what}: {e}") from None
    raise ScenarioError(f"{what}: expected a kind or a list of basis matrices")


def _condexp(spec, A: AlgebraSpec, B: AlgebraSpec, what: str):
    """Returns (condexp, state or None)."""
    if not isinstance(spec, dict):
        raise ScenarioError(f"{what}: expected an object")
    if "density" in spec:
        if B.size != 1 or B.dim != 1:
            raise MixedB(f"{what}: a density gives a C-valued expectation but B is not C")
        st = StateSpec(_matrix(spec["density"], what))
        if st.dim != A.dim:
            raise ScenarioError(f"{what}: density has size {st.dim}, algebra acts on {A.dim}")
        return st.as_condexp(A), st
    if spec.get("kind") == "diagonal":
        if B.dim != A.dim or B.size != A.dim:
            raise MixedB(f"{what}: diagonal compression needs B = diagonal matrices")
        return CondExpSpec.diagonal_compression(A.dim, A).validate(), None
    raise ScenarioError(f"{what}: expected 'density' or kind 'diagonal'")


def _theta(spec, A: AlgebraSpec, B: AlgebraSpec, psi: CondExpSpec, what: str) -> BimoduleMap:
    if not isinstance(spec, dict):
        raise ScenarioError(f"{what}: expected an object")
    bA = psi.embedding
    if "kraus" in spec:
        K = [_matrix(k, what) for k in spec["kraus"]]
        if not K or any(k.shape != K[0].shape or k.shape[0] != A.dim for k in K):
            raise ScenarioError(f"{what}: Kraus operators must all be {A.dim} x e")
        e = K[0].shape[1]
        D = AlgebraSpec.full(e)
        f = lambda a: sum(k.conj().T @ a @ k for k in K)
        bD = embedding_map(B, D)
        th = BimoduleMap(A, D, LinearMap.from_function(f, A.dim, e), bA, bD, B, name="kraus")
    elif "schur" in spec:
        S = _matrix(spec["schur"], what)
        if S.shape != (A.dim, A.dim):
            raise ScenarioError(f"{what}: Schur matrix must be {A.dim} x {A.dim}")
        th = schur_map(S, A)
        th = BimoduleMap(A, A, th.map, bA, bA, B, name="schur")
    elif spec.get("kind") == "identity":
        th = BimoduleMap(A, A, LinearMap.identity(A.dim), bA, bA, B, name="identity")
    else:
        raise ScenarioError(f"{what}: expected 'kraus', 'schur' or kind 'identity'")
    unit = opnorm(th(A.identity) - np.eye(th.target.dim))
    if unit > 1e-9:
        raise ScenarioError(f"{what}: map is not unital (off by {unit:.3e})")
    return th


def parse_scenario(data: dict, source: Optional[str] = None) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    name = str(data.get("name", "scenario"))
    B = _algebra(_require(data, "B", "B"), "B")
    algs = _require(data, "algebras", "scenario")
    if not isinstance(algs, list) or not algs:
        raise ScenarioError("'algebras' must be a non-empty list")
    members, seen = [], set()
    for n, entry in enumerate(algs):
        what = f"algebras[{n}]"
        idx = _require(entry, "index", what)
        if not isinstance(idx, int) or isinstance(idx, bool):
            raise ScenarioError(f"{what}: index must be an integer")
        if idx in seen:
            raise ScenarioError(f"{what}: duplicate index {idx}")
        seen.add(idx)
        A = _algebra(_require(entry, "basis", what), f"{what}.basis")
        psi, _ = _condexp(_require(entry, "psi", what), A, B, f"{what}.psi")
        phi = None
        if "phi" in entry:
            _, phi = _condexp(entry["phi"], A, B, f"{what}.phi")
            if phi is None:
                raise ScenarioError(f"{what}.phi: must be a density")
        members.append(Member(idx, A, psi, phi))
    family = Family(members)
    if not family.B.same_as(B):
        raise MixedB("declared B differs from the range of the expectations")
    thetas = None
    if "thetas" in data:
        raw = data["thetas"]
        if not isinstance(raw, dict):
            raise ScenarioError("'thetas' must map indices to maps")
        thetas = {}
        for key, spec in raw.items():
            try:
                i = int(key)
            except ValueError:
                raise ScenarioError(f"thetas: bad index {key!r}") from None
            if i not in seen:
                raise ScenarioError(f"thetas: index {i} is not an algebra of the scenario")
            m = family[i]
            thetas[i] = _theta(spec, m.algebra, family.B, m.psi, f"thetas[{i}]")
        if set(thetas) != seen:
            raise ScenarioError("thetas must cover every index")
    letters = expected = None
    if "counterexample" in data:
        ce = data["counterexample"]
        raw_letters = _require(ce, "letters", "counterexample")
        letters = []
        for n, l in enumerate(raw_letters):
            i = _require(l, "index", f"counterexample.letters[{n}]")
            if i not in seen:
                raise ScenarioError(f"counterexample: index {i} is not an algebra of the scenario")
            letters.append(Letter(i, _matrix(_require(l, "element", "letter"), "letter")))
        if "expected_rhs" in ce:
            expected = float(ce["expected_rhs"])
    tol = dict(DEFAULT_TOLERANCES)
    tol.update({k: float(v) for k, v in data.get("tolerances", {}).items()})
    seed = data.get("seed")
    return Scenario(name, family, thetas, letters, expected, seed, tol, source)


def load_scenario(source: Union[str, Path, dict]) -> Scenario:
    """From a dict, a path, or the name of a bundled scenario."""
    if isinstance(source, dict):
        return parse_scenario(source)
    text_source = str(source)
    path = bundled_path(text_source) if text_source in BUNDLED else Path(text_source)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ScenarioError(f"scenario file {path} not found") from None
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: malformed JSON ({e})") from None
    return parse_scenario(data, str(path))
