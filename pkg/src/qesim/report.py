"""Experiment reports: checked quantities with their tolerances, serialised as JSON lines.

Line 1 describes the experiment and its parameters, one line follows per
quantity, and the last line carries the overall status and the names of
failing invariants.  Nothing time-dependent is written, so identical runs
produce identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np


def _plain(value: Any) -> Any:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (bytes, bytearray)):
        return bytes(value).hex()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


@dataclass
class Quantity:
    name: str
    value: Any
    tolerance: Any
    passed: bool
    note: str = ""
    index: int | None = None

    def to_json(self) -> dict:
        out = {"name": self.name, "value": _plain(self.value), "tolerance": _plain(self.tolerance),
               "passed": self.passed}
        if self.note:
            out["note"] = self.note
        if self.index is not None:
            out["trial"] = self.index
        return out


@dataclass
class ExperimentReport:
    experiment: str
    parameters: dict = field(default_factory=dict)
    quantities: list[Quantity] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    outcome: dict = field(default_factory=dict)

    def check(self, name: str, value: Any, tolerance: Any, passed: bool, note: str = "",
              index: int | None = None) -> bool:
        self.quantities.append(Quantity(name, value, tolerance, bool(passed), note, index))
        if not passed and name not in self.failures:
            self.failures.append(name)
        return bool(passed)

    def at_most(self, name: str, value: float, tolerance: float, **kw) -> bool:
        return self.check(name, value, tolerance, value <= tolerance, **kw)

    def fail(self, name: str, note: str = "") -> None:
        self.check(name, None, None, False, note)

    @property
    def ok(self) -> bool:
        return not self.failures

    def lines(self) -> list[str]:
        dump = lambda obj: json.dumps(obj, sort_keys=True, separators=(",", ":"))  # noqa: E731
        quantities = sorted(self.quantities, key=lambda q: (q.index is not None, q.index or 0))
        out = [dump({"experiment": self.experiment, "parameters": _plain(self.parameters)})]
        out += [dump(q.to_json()) for q in quantities]
        summary = {"status": "pass" if self.ok else "fail", "failing": self.failures}
        if self.outcome:
            summary["outcome"] = _plain(self.outcome)
        out.append(dump(summary))
        return out

    def dumps(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())
