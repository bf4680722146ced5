"""Command line front end.

    monofock eval --rule monotone --scenario scalar --word word.json
    monofock verify --suite all [--scenario PATH ...] [--seed N] [--tol X] [--rounds N] [--json OUT]
    monofock demo remark45 [--scenario PATH]

Exit codes: 0 pass, 1 verification or evaluation failure, 2 usage or schema error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateChoice, MixedB, MonofockError, NonState, ScenarioError
from .moments import eval_cmonotone, eval_map_product, eval_monotone
from .report import VerificationReport
from .scenario import BUNDLED, load_scenario
from .suites import DEFAULT_ROUNDS, SUITES, _Prefixed, counterexample_cases, run_suite
from .words import Word, matrix_to_json, word_from_json

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SCHEMA_ERRORS = (ScenarioError, NonState, MixedB)


def _fail(msg: str, code: int) -> int:
    print(f"monofock: {msg}", file=sys.stderr)
    return code


def _read_word(spec: Optional[str]) -> Word:
    if spec is None:
        return Word()
    text = spec if spec.lstrip().startswith("{") else None
    if text is None:
        try:
            text = Path(spec).read_text()
        except OSError as e:
            raise ScenarioError(f"cannot read word file {spec}: {e.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"word: malformed JSON ({e})") from None
    try:
        return word_from_json(data)
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise ScenarioError(f"word: bad format ({e})") from None


def cmd_eval(args) -> int:
    try:
        sc = load_scenario(args.scenario)
        w = _read_word(args.word)
    except SCHEMA_ERRORS as e:
        return _fail(f"{type(e).__name__}: {e}", EXIT_USAGE)
    try:
        if args.rule == "monotone":
            value = eval_monotone(w, sc.family)
        elif args.rule == "cmonotone":
            value = eval_cmonotone(w, sc.family)
        else:
            if sc.thetas is None:
                return _fail("scenario defines no thetas", EXIT_FAIL)
            value = eval_map_product(w, sc.family, sc.thetas)
    except MonofockError as e:
        return _fail(f"{type(e).__name__}: {e}", EXIT_FAIL)
    out = {"rule": args.rule, "scenario": sc.name, "length": len(w),
           "value": matrix_to_json(np.atleast_2d(value))}
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def _write_report(report: VerificationReport, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(report.dumps() + "\n")


def cmd_verify(args) -> int:
    if args.rounds < 1:
        return _fail("--rounds must be positive", EXIT_USAGE)
    if args.tol is not None and not args.tol > 0:
        return _fail("--tol must be positive", EXIT_USAGE)
    try:
        scenarios = [load_scenario(s) for s in (args.scenario or BUNDLED)]
    except SCHEMA_ERRORS as e:
        return _fail(f"{type(e).__name__}: {e}", EXIT_USAGE)
    progress = (lambda m: print(f".. {m}", file=sys.stderr, flush=True)) if args.verbose else None
    try:
        report = run_suite(args.suite, scenarios, args.seed, args.tol, args.rounds, progress)
    except MonofockError as e:
        return _fail(f"{type(e).__name__}: {e}", EXIT_FAIL)
    for line in report.lines():
        print(line)
    s = report.summary()
    print(f"{args.suite}: {s['passed']}/{s['cases']} passed")
    _write_report(report, args.json)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_demo(args) -> int:
    try:
        sc = load_scenario(args.scenario or "remark45")
    except SCHEMA_ERRORS as e:
        return _fail(f"{type(e).__name__}: {e}", EXIT_USAGE)
    if sc.letters is None:
        return _fail(f"scenario {sc.name} has no counterexample letters", EXIT_USAGE)
    report = VerificationReport("demo", seed=None, tolerances=dict(sc.tolerances))
    try:
        res = counterexample_cases(sc, _Prefixed(report, sc.name), sc.tolerances)
    except DegenerateChoice as e:
        return _fail(f"DegenerateChoice: {e}", EXIT_USAGE)
    except MonofockError as e:
        return _fail(f"{type(e).__name__}: {e}", EXIT_FAIL)
    i1, i2, i3 = res["indices"]
    print(f"indices {i1} < {i2} > {i3}, free module truncated at depth {res['n_max']}")
    print(f"||A1 psi(A2) A3 (f3 ⊗ f2)|| = {res['lhs_norm']:.12g}")
    print(f"||A1 A2 A3 (f3 ⊗ f2)||      = {res['rhs_norm']:.12g}")
    print(f"||psi(A2)|| = {res['psi_A2_norm']:.3e}, <f2,f2> = {np.real(np.atleast_2d(res['f2_f2'])[0, 0]):.12g}")
    for line in report.lines():
        print(line)
    _write_report(report, args.json)
    return EXIT_OK if report.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="monofock", description="Monotone products: moments, Fock models, checks.")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", help="evaluate one word in a scenario")
    e.add_argument("--rule", choices=("monotone", "cmonotone", "map-product"), default="monotone")
    e.add_argument("--scenario", default="scalar", help=f"path or bundled name ({', '.join(BUNDLED)})")
    e.add_argument("--word", help="word as a JSON file or inline JSON object; empty word if omitted")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("--suite", choices=SUITES + ("all",), default="all")
    v.add_argument("--scenario", action="append",
                   help="path or bundled name; repeatable (default: every bundled scenario)")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=float, default=None, help="tolerance for equalities (default 1e-9)")
    v.add_argument("--rounds", type=int, default=DEFAULT_ROUNDS, help="Gram positivity rounds")
    v.add_argument("--json", help="write the report here")
    v.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("demo", help="reproduce a worked example")
    d.add_argument("name", choices=("remark45",))
    d.add_argument("--scenario", help="scenario with counterexample letters (default: bundled remark45)")
    d.add_argument("--json", help="write the report here")
    d.set_defaults(func=cmd_demo)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
