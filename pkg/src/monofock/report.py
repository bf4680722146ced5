"""Verification reports: named cases, each a metric compared with a bound."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

REPORT_VERSION = 1


@dataclass
class Case:
    id: str
    anchor: str
    metric: str
    value: float
    bound: float
    sense: str = "le"  # "le": pass iff value <= bound; "ge": pass iff value >= bound
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if math.isnan(self.value):
            return False
        return self.value <= self.bound if self.sense == "le" else self.value >= self.bound

    def to_json(self) -> dict:
        out = {"id": self.id, "anchor": self.anchor, "metric": self.metric,
               "value": _num(self.value), "bound": self.bound, "sense": self.sense,
               "pass": self.passed}
        if self.detail:
            out["detail"] = self.detail
        return out


def _num(x: float):
    return x if math.isfinite(x) else str(x)


@dataclass
class VerificationReport:
    suite: str
    seed: Optional[int] = None
    tolerances: dict = field(default_factory=dict)
    cases: list = field(default_factory=list)

    def add(self, id: str, anchor: str, metric: str, value: float, bound: float,
            sense: str = "le", **detail) -> Case:
        c = Case(id, anchor, metric, float(value), float(bound), sense, detail)
        self.cases.append(c)
        return c

    def extend(self, other: "VerificationReport") -> "VerificationReport":
        self.cases.extend(other.cases)
        return self

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)

    @property
    def failures(self) -> list:
        return [c for c in self.cases if not c.passed]

    def case(self, id: str) -> Case:
        for c in self.cases:
            if c.id == id:
                return c
        raise KeyError(id)

    def worst(self, metric: Optional[str] = None) -> float:
        vals = [c.value for c in self.cases if metric is None or c.metric == metric]
        return max(vals) if vals else 0.0

    def summary(self) -> dict:
        n = len(self.cases)
        bad = len(self.failures)
        return {"cases": n, "passed": n - bad, "failed": bad}

    def to_json(self) -> dict:
        return {"report_version": REPORT_VERSION, "suite": self.suite, "seed": self.seed,
                "tolerances": self.tolerances, "cases": [c.to_json() for c in self.cases],
                "summary": self.summary()}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def lines(self) -> list:
        out = []
        for c in self.cases:
            op = "<=" if c.sense == "le" else ">="
            flag = "PASS" if c.passed else "FAIL"
            out.append(f"{flag} {c.id}: {c.metric} = {c.value:.3e} {op} {c.bound:.1e}  [{c.anchor}]")
        return out
