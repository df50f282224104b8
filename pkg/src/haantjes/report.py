"""Machine-readable certificate reports.

Reports serialize to JSON (UTF-8, sorted keys); residuals and tolerances are
written as decimal strings with 17 significant digits so reports are
byte-identical across runs given the same manifest and seed.  Wall-clock
timing is kept out of the default report for the same reason; the CLI prints
it to the console and only embeds it on request.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["CheckRecord", "CertificateReport", "dec"]

SCHEMA = "haantjes-report/1"


def dec(x):
    """Decimal string with 17 significant digits (None and NaN stay null)."""
    if x is None:
        return None
    x = float(x)
    if np.isnan(x):
        return None
    return f"{x:.17g}"


@dataclass
class CheckRecord:
    id: str
    law: str
    verdict: str  # PASS / FAIL / SKIPPED / HYPOTHESES_UNMET / NOT_FLAT
    max_residual: float | None = None
    tolerance: float | None = None
    points: int = 0
    excluded: int = 0
    details: dict = field(default_factory=dict)

    @property
    def gates(self):
        return self.verdict != "SKIPPED"

    @property
    def passed(self):
        return self.verdict == "PASS"

    def to_json(self):
        out = {
            "id": self.id,
            "law": self.law,
            "verdict": self.verdict,
            "max_residual": dec(self.max_residual),
            "tolerance": dec(self.tolerance),
            "points": self.points,
            "excluded": self.excluded,
        }
        if self.details:
            out["details"] = _normalize(self.details)
        return out


def _normalize(obj):
    if isinstance(obj, dict):
        return {k: _normalize(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return dec(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _normalize(obj.tolist())
    return obj


@dataclass
class CertificateReport:
    tool_version: str
    manifest_name: str
    manifest_sha256: str
    chart: dict
    config: dict
    records: list
    wall_seconds: float | None = None

    @property
    def overall(self):
        gating = [r for r in self.records if r.gates]
        if not gating:
            return "NO_CHECKS"
        return "PASS" if all(r.passed for r in gating) else "FAIL"

    def to_json(self):
        out = {
            "schema": SCHEMA,
            "tool_version": self.tool_version,
            "manifest": {"name": self.manifest_name, "sha256": self.manifest_sha256},
            "chart": _normalize(self.chart),
            "config": _normalize(self.config),
            "checks": [r.to_json() for r in self.records],
            "overall": self.overall,
            "counters": {
                "checks_run": sum(1 for r in self.records if r.gates),
                "checks_skipped": sum(1 for r in self.records if not r.gates),
                "excluded_points": sum(r.excluded for r in self.records),
            },
        }
        if self.wall_seconds is not None:
            out["timing"] = {"wall_seconds": dec(self.wall_seconds)}
        return out

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    def summary_lines(self):
        lines = []
        for r in self.records:
            res = dec(r.max_residual) or "-"
            lines.append(f"{r.verdict:>16}  {r.id:<20} max residual {res}")
        lines.append(f"overall: {self.overall}")
        return lines
