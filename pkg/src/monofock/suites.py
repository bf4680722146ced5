"""Verification suites run by the command line front end.

Each suite takes one scenario and appends cases to a report. Case ids carry
the scenario name as a prefix, and every suite draws from its own generator
seeded by (seed, suite, scenario), so reports do not depend on which other
suites ran before.
"""
from __future__ import annotations

import zlib
from typing import Callable, Optional

import numpy as np

from .algebra import BimoduleMap, opnorm
from .bimodule import (
    build_free_bimodule,
    build_monotone_bimodule,
    free_peak_counterexample,
    verify_conditional_expectation,
    verify_free_restriction,
    verify_induced,
    verify_monotone_rules,
    verify_peak_identity,
)
from .bimodule import verify_structure as verify_bimodule_structure
from .cp import (
    MonotoneProductMap,
    cp_check_choi,
    cp_check_gram,
    histogram,
    reduction_map,
    schur_map,
    verify_cfree_monot,
)
from .embedding import (
    build_cp_embedding,
    corner_nested_scenario,
    tensor_nested_scenario,
    verify_cp_embedding,
    verify_nested,
)
from .fock import build_fock, verify_cmonotone_rules, verify_vacuum_decomposition
from .fock import verify_structure as verify_fock_structure
from .moments import (
    Rules,
    check_linearity,
    check_order_independence,
    eval_monotone,
    eval_nested,
    pattern_sweep,
    random_words,
)
from .report import VerificationReport
from .scenario import Scenario
from .words import alternating_patterns

SUITES = ("moments", "fock-scalar", "bimodule", "cp", "embedding")
DEFAULT_ROUNDS = 50


def suite_rng(seed: int, *parts: str) -> np.random.Generator:
    return np.random.default_rng([seed] + [zlib.crc32(p.encode()) for p in parts])


class _Prefixed:
    """Adds cases to ``report`` under ``prefix``."""

    def __init__(self, report: VerificationReport, prefix: str):
        self.report, self.prefix = report, prefix

    def take(self, sub: VerificationReport) -> None:
        for c in sub.cases:
            c.id = f"{self.prefix}/{c.id}"
            self.report.cases.append(c)

    def add(self, id: str, *args, **kw):
        return self.report.add(f"{self.prefix}/{id}", *args, **kw)


def _bnorm(x) -> float:
    return opnorm(np.atleast_2d(np.asarray(x)))


# suites ------------------------------------------------------------------------------


def moments_suite(sc: Scenario, rng: np.random.Generator, out: _Prefixed, tol: dict, rounds: int) -> None:
    fam = sc.family
    words = random_words(fam, 200, 6, rng)
    sub = VerificationReport("moments")
    for w in words:
        check_order_independence(w, Rules(fam), 10, rng, tol["eq"], sub)
    out.add("order-independence", "associativity of the monotone product", "max_deviation",
            max(c.value for c in sub.cases), tol["eq"], words=len(words), orders=10)
    if sc.thetas is not None:
        sub = VerificationReport("moments")
        for w in words[:50]:
            check_order_independence(w, Rules(fam, sc.thetas), 10, rng, tol["eq"], sub)
        out.add("order-independence-maps", "associativity of the monotone product of maps",
                "max_deviation", max(c.value for c in sub.cases), tol["eq"], words=50, orders=10)
    idx = fam.indices
    splits = [(idx[:k], idx[k:]) for k in range(1, len(idx))]
    nested = 0.0
    for w in words[:50]:
        ref = eval_monotone(w, fam)
        for g in splits:
            nested = max(nested, _bnorm(eval_nested(w, fam, g) - ref))
    out.add("nested-associativity", "(A_1 > A_2) > A_3 = A_1 > (A_2 > A_3)", "residual", nested, tol["eq"],
            words=50, splits=len(splits))
    lin = max(check_linearity(w, fam, lambda v: eval_monotone(v, fam), rng) for w in words[:50])
    out.add("linearity", "moments are multilinear in the letters", "residual", lin, tol["eq"])


def fock_suite(sc: Scenario, rng: np.random.Generator, out: _Prefixed, tol: dict, rounds: int) -> None:
    F = build_fock(sc.family)
    words = list(pattern_sweep(sc.family, 5, rng))
    sub = VerificationReport("fock-scalar")
    verify_cmonotone_rules(F, sc.family, words, tol["eq"], sub)
    verify_vacuum_decomposition(F, words, tol["eq"], sub)
    verify_fock_structure(F, rng, tol["eq"], sub)
    out.take(sub)


def bimodule_suite(sc: Scenario, rng: np.random.Generator, out: _Prefixed, tol: dict, rounds: int) -> None:
    fam = sc.family
    M = build_monotone_bimodule(fam)
    sub = VerificationReport("bimodule")
    sweep = list(pattern_sweep(fam, 5, rng))
    verify_monotone_rules(M, fam, sweep, tol["eq"], sub)
    verify_bimodule_structure(M, fam, rng, tol["eq"], sub)
    patterns = [p for p in alternating_patterns(fam.indices, 3, 3)]
    verify_peak_identity(M, fam, patterns, rng, tol["eq"], report=sub)
    Fr = build_free_bimodule(fam, 4, monotone=M)
    verify_free_restriction(M, Fr, fam, rng, random_words(fam, 20, 4, rng), tol["eq"], sub)
    i0 = min(fam.indices)
    words = random_words(fam, 40, 5, rng)
    verify_conditional_expectation(M, fam, i0, words, rng, tol["eq"], sub)
    verify_induced(M, fam, i0, words, rng, tol["eq"], sub)
    out.take(sub)
    if sc.letters is not None:
        counterexample_cases(sc, out, tol)


def counterexample_cases(sc: Scenario, out: _Prefixed, tol: dict) -> dict:
    res = free_peak_counterexample(sc.family, sc.letters)
    anchor = "free-product operators break the peak identity"
    out.add("counterexample-lhs", anchor, "norm", res["lhs_norm"], 1e-10)
    out.add("counterexample-rhs-nonzero", anchor, "norm", res["rhs_norm"], 1e-3, sense="ge")
    if sc.expected_rhs is not None:
        out.add("counterexample-rhs", anchor + " (independent value)", "abs_error",
                abs(res["rhs_norm"] - sc.expected_rhs), tol["eq"], expected=sc.expected_rhs)
    deeper = free_peak_counterexample(sc.family, sc.letters, n_max=res["n_max"] + 1)
    out.add("counterexample-depth", "free module truncation is exact for this vector", "abs_error",
            abs(deeper["rhs_norm"] - res["rhs_norm"]) + abs(deeper["lhs_norm"] - res["lhs_norm"]), tol["eq"],
            n_max=res["n_max"])
    return res


def _negative_control(sc: Scenario) -> tuple:
    """Thetas with the second factor replaced by a unital map that is not CP."""
    fam = sc.family
    i = fam.indices[1] if len(fam) > 1 else fam.indices[0]
    A = fam[i].algebra
    bA = fam[i].psi.embedding
    if sc.scalar:
        r = reduction_map(A.dim)
        bad = BimoduleMap(A, A, r.map, bA, bA, fam.B, name="reduction")
    else:
        S = np.full((A.dim, A.dim), 2.0)
        np.fill_diagonal(S, 1.0)
        bad = BimoduleMap(A, A, schur_map(S, A).map, bA, bA, fam.B, name="schur")
    thetas = dict(sc.thetas)
    thetas[i] = bad
    return thetas, bad.name


def cp_suite(sc: Scenario, rng: np.random.Generator, out: _Prefixed, tol: dict, rounds: int) -> None:
    fam, thetas = sc.family, sc.thetas
    for i, th in thetas.items():
        if th.source.dim ** 2 == th.source.size:
            out.add(f"choi-{i}", "each factor is completely positive", "min_eigenvalue",
                    cp_check_choi(th), -tol["eig"], sense="ge")
    lo = fam.indices[:2]
    sub = VerificationReport("cp")
    verify_cfree_monot(fam.subfamily(lo), {i: thetas[i] for i in lo}, rng, tol=tol["eq"], report=sub)
    out.take(sub)
    d = next(iter(thetas.values())).target.dim
    res = cp_check_gram(MonotoneProductMap(fam, thetas), fam, d, rounds, rng)
    out.add("gram", "monotone product of CP maps is CP", "min_eigenvalue", res["min"], -tol["eig"],
            sense="ge", rounds=rounds, histogram=histogram(res["per_round"]))
    out.add("gram-hermitian", "Gram blocks are Hermitian", "residual", res["hermitian"], tol["eq"])
    bad_thetas, name = _negative_control(sc)
    bad = cp_check_gram(MonotoneProductMap(fam, bad_thetas), fam, d, rounds, rng)
    hits = sum(v <= -1e-3 for v in bad["per_round"])
    out.add("gram-control", f"a non-CP factor ({name}) breaks positivity", "min_eigenvalue", bad["min"],
            -1e-3, sense="le", rounds=rounds, rounds_negative=int(hits))


def embedding_suite(sc: Scenario, rng: np.random.Generator, out: _Prefixed, tol: dict, rounds: int) -> None:
    if sc.thetas is None:
        return
    fam = sc.family
    C = build_cp_embedding({m.index: m.algebra for m in fam}, fam, sc.thetas, tol=tol["eq"])
    sub = VerificationReport("embedding")
    verify_cp_embedding(C, rng, gram_rounds=rounds, tol=tol["eq"], eig_tol=tol["eig"], report=sub)
    out.take(sub)


def nested_suite(seed: int, report: VerificationReport, tol: dict) -> None:
    """Scenario-independent nesting checks: a tensor and a corner construction."""
    for name, build in (("tensor", tensor_nested_scenario), ("corner", corner_nested_scenario)):
        rng = suite_rng(seed, "embedding", name)
        sub = VerificationReport("embedding")
        verify_nested(build(rng), rng, tol=tol["eq"], report=sub, prefix="nested")
        _Prefixed(report, f"nested-{name}").take(sub)


RUNNERS: dict = {
    "moments": (moments_suite, lambda sc: True),
    "fock-scalar": (fock_suite, lambda sc: sc.scalar and sc.has_phi),
    "bimodule": (bimodule_suite, lambda sc: True),
    "cp": (cp_suite, lambda sc: sc.thetas is not None),
    "embedding": (embedding_suite, lambda sc: sc.thetas is not None),
}


def run_suite(name: str, scenarios, seed: int = 0, tol: Optional[float] = None,
              rounds: int = DEFAULT_ROUNDS, progress: Optional[Callable[[str], None]] = None) -> VerificationReport:
    """Run one suite (or "all") over the scenarios that it applies to."""
    names = SUITES if name == "all" else (name,)
    for n in names:
        if n not in RUNNERS:
            raise KeyError(f"unknown suite {n!r}")
    tolerances = {}
    report = VerificationReport(name, seed=seed)
    for n in names:
        run, applies = RUNNERS[n]
        for sc in scenarios:
            t = dict(sc.tolerances)
            if tol is not None:
                t["eq"] = tol
            tolerances[sc.name] = t
            if not applies(sc):
                continue
            if progress:
                progress(f"{n}: {sc.name}")
            prefix = f"{sc.name}/{n}" if len(names) > 1 else sc.name
            run(sc, suite_rng(seed, n, sc.name), _Prefixed(report, prefix), t, rounds)
        if n == "embedding":
            t = {"eq": tol if tol is not None else 1e-9, "eig": 1e-8}
            if progress:
                progress("embedding: nested")
            nested_suite(seed, report, t)
    report.tolerances = tolerances
    return report
