"""Check results and the JSON report written by the verification commands."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__


@dataclass(frozen=True)
class Check:
    """One verification result.

    ``kind`` is ``"below"`` for an ordinary residual check (pass iff
    residual < tolerance), ``"above"`` for a negative control that must
    exceed its threshold, and ``"info"`` for report-only quantities.
    """

    name: str
    residual: float
    tolerance: Optional[float]
    passed: bool
    kind: str = "below"
    location: Optional[dict] = None
    note: str = ""

    @classmethod
    def below(cls, name, residual, tol, location=None, note=""):
        residual = float(residual)
        ok = math.isfinite(residual) and residual < tol
        return cls(name, residual, float(tol), ok, "below", location, note)

    @classmethod
    def above(cls, name, residual, threshold, location=None, note=""):
        residual = float(residual)
        ok = math.isfinite(residual) and residual > threshold
        return cls(name, residual, float(threshold), ok, "above", location, note)

    @classmethod
    def info(cls, name, residual, location=None, note=""):
        return cls(name, float(residual), None, True, "info", location, note)


@dataclass
class Report:
    checks: list
    config: dict = field(default_factory=dict)
    version: str = __version__
    extra: dict = field(default_factory=dict)

    @classmethod
    def build(cls, checks, config=None, extra=None) -> "Report":
        return cls(sorted(checks, key=lambda c: c.name), dict(config or {}), __version__, dict(extra or {}))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def merge(self, other: "Report", prefix: str = "") -> "Report":
        renamed = [Check(prefix + c.name, c.residual, c.tolerance, c.passed, c.kind, c.location, c.note)
                   for c in other.checks]
        return Report.build(self.checks + renamed, self.config, {**self.extra, **other.extra})

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "passed": self.passed,
            "config": self.config,
            "checks": [_clean(asdict(c)) for c in self.checks],
            "extra": self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        rows = []
        width = max([len(c.name) for c in self.checks] + [5])
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            if c.kind == "info":
                status = "INFO"
            op = {"below": "<", "above": ">", "info": " "}[c.kind]
            tol = "" if c.tolerance is None else f"{op} {c.tolerance:.1e}"
            rows.append(f"{status}  {c.name:<{width}}  {c.residual:.3e}  {tol}")
        return "\n".join(rows)


def _clean(obj):
    """Make floats JSON-safe (inf/nan become strings)."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def write_csv(path, header, columns) -> None:
    """Write equal-length numeric columns with a header row, 17 significant digits."""
    cols = [np.ravel(np.asarray(c, dtype=float)) for c in columns]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([f"{v:.17g}" for v in row])
