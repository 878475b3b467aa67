"""Run reports: structured check results, deterministic JSON, CSV dumps."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["CheckResult", "RunReport", "report_json", "write_trajectory_csv", "REPORT_SCHEMA"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: dict
    tolerance: dict = field(default_factory=dict)
    convergence_order: float | None = None
    notes: str = ""


@dataclass
class RunReport:
    scenario_id: str
    subcommand: str
    config_hash: str
    code_version: str
    seed: int
    checks: list
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary_lines(self) -> list[str]:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"[{status}] {self.scenario_id}/{c.name}")
        return lines


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to plain python, NaN to strings."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(x) for x in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else repr(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def report_json(report: RunReport) -> str:
    """Deterministic JSON: sorted keys; timings live under the 'timings' key only."""
    payload = {
        "schema_version": 1,
        "scenario": report.scenario_id,
        "subcommand": report.subcommand,
        "provenance": {
            "config_hash": report.config_hash,
            "code_version": report.code_version,
            "seed": report.seed,
        },
        "passed": report.passed,
        "checks": [_clean(asdict(c)) for c in report.checks],
        "timings": _clean(report.timings),
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_trajectory_csv(path, trajectory) -> None:
    """Chart trajectory dump (theta, z, x2, x3) rows."""
    traj = np.asarray(trajectory, dtype=float)
    header = "theta,z,x2,x3"
    np.savetxt(path, traj, delimiter=",", header=header, comments="")


#: JSON schema for report.json (shipped as package data, validated in tests)
REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "scenario", "subcommand", "provenance", "passed", "checks", "timings"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "scenario": {"type": "string"},
        "subcommand": {"type": "string"},
        "provenance": {
            "type": "object",
            "required": ["config_hash", "code_version", "seed"],
            "additionalProperties": False,
            "properties": {
                "config_hash": {"type": "string"},
                "code_version": {"type": "string"},
                "seed": {"type": "integer"},
            },
        },
        "passed": {"type": "boolean"},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "passed", "measured", "tolerance"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "passed": {"type": "boolean"},
                    "measured": {"type": "object"},
                    "tolerance": {"type": "object"},
                    "convergence_order": {"type": ["number", "null"]},
                    "notes": {"type": "string"},
                },
            },
        },
        "timings": {"type": "object"},
    },
}
