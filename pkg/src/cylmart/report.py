"""Run reports: check records with derived pass flags, JSON output, text rendering."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


@dataclass(frozen=True)
class Check:
    """A single named comparison; ``passed`` is computed, never supplied.

    ``op`` is one of ``"le"`` (value <= target + tolerance), ``"ge"``
    (value >= target - tolerance), ``"gt"`` (value > target + tolerance),
    ``"abs"`` (|value - target| <= tolerance)
    or ``"true"`` (value is truthy). Checks with ``gate=False`` are reported
    but do not decide the exit status.
    """

    name: str
    value: float
    target: float
    tolerance: float
    op: str = "le"
    stderr: float | None = None
    gate: bool = True
    note: str = ""

    @property
    def passed(self) -> bool:
        v, t, tol = self.value, self.target, self.tolerance
        if self.op == "true":
            return bool(v)
        if v is None or (isinstance(v, float) and math.isnan(v)):
            return False
        if self.op == "le":
            return v <= t + tol
        if self.op == "ge":
            return v >= t - tol
        if self.op == "gt":
            return v > t + tol
        if self.op == "abs":
            return abs(v - t) <= tol
        raise ValueError(f"unknown comparison {self.op!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = self.passed
        return {k: _finite(v) for k, v in d.items()}


@dataclass
class RunReport:
    config: dict
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    version: str = __version__

    @property
    def seed(self) -> int:
        return self.config.get("seed")

    def add(self, *checks: Check) -> None:
        names = {c.name for c in self.checks}
        for c in checks:
            if c.name in names:
                raise ValueError(f"duplicate check name {c.name!r}")
            names.add(c.name)
            self.checks.append(c)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.gate)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "checks": [c.to_dict() for c in self.checks],
            "tables": self.tables,
            "passed": self.passed,
            "seed": self.seed,
            "version": self.version,
            "wall_clock": self.wall_clock,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        p = out / "report.json"
        p.write_text(self.to_json())
        return p


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def render(report: RunReport | dict) -> str:
    """Plain-text table of checks followed by any tables carried in the report."""
    d = report.to_dict() if isinstance(report, RunReport) else report
    lines = [f"cylmart {d.get('version', '')}  kind={d['config'].get('kind')}  seed={d.get('seed')}",
             f"{'check':<44} {'value':>14} {'target':>12} {'tol':>10}  result"]
    for c in d["checks"]:
        res = "PASS" if c["pass"] else "FAIL"
        if not c.get("gate", True):
            res += " (informational)"
        lines.append(f"{c['name']:<44} {_fmt(c['value']):>14} {_fmt(c['target']):>12} "
                     f"{_fmt(c['tolerance']):>10}  {res}")
    for title, table in sorted(d.get("tables", {}).items()):
        lines.append("")
        lines.append(title)
        cols = table["columns"]
        lines.append("  ".join(f"{c:>14}" for c in cols))
        for row in table["rows"]:
            lines.append("  ".join(f"{_fmt(v):>14}" for v in row))
    return "\n".join(lines) + "\n"


def write_table_csv(table: dict, path: str | Path) -> None:
    rows = [",".join(table["columns"])]
    rows += [",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in r) for r in table["rows"]]
    Path(path).write_text("\n".join(rows) + "\n")
