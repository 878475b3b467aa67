"""Scenario configuration: strict YAML schema, validation, canonical hashing.

One human-editable YAML file describes a scenario. Unknown keys are rejected
everywhere; the angle function and the charges are never defaulted;
numerical controls (quadrature, tolerances, kappa) have documented defaults.
The full schema is documented in docs/config_schema.md.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
import yaml

from .connection import GaugeDescriptor
from .dirichlet import ConeAngleSpec, QuadratureConfig
from .hyperbolic import HPoint
from .potential import DEFAULT_KAPPA, ChargeConfig

__all__ = ["Scenario", "ConfigError", "parse_config", "load_config", "config_hash", "TOLERANCE_KEYS"]

#: tolerance knobs with their defaults (scaled by --tol-scale at run time)
TOLERANCE_KEYS = {
    "scalar_flat_max": 1e-3,
    "scalar_flat_roundoff": 1e-9,
    "kahler_max": 1e-4,
    "kahler_roundoff": 1e-10,
    "order_low": 1.5,
    "order_high": 2.5,
    "cone_angle": 1e-2,
    "flux_rel": 1e-3,
    "flux_zero": 1e-6,
    "stokes": 1e-4,
    "loop_rel": 1e-3,
    "geodesic_drift": 1e-6,
    "green_decay_window": 0.1,
    "quasi_isometry_spread": 0.05,
    "harmonicity_order_low": 1.5,
    "harmonicity_order_high": 2.5,
    "max_principle": 1e-8,
    "compatibility": 1e-6,
    "coframe": 1e-12,
    "decay_stability": 0.2,
    "remainder_growth": 3.0,
}

KNOWN_CHECKS = (
    "harmonicity",
    "barriers",
    "max_principle",
    "compatibility",
    "coframe",
    "scalar_flat",
    "kahler",
    "cone_angle",
    "quasi_isometry",
    "geodesics",
    "decay",
    "flux",
    "curl",
    "green_decay",
    "conformal_remainder",
    "ansatz",
    "fixture_curvature",
    "poisson_oracle",
    "stokes",
)


class ConfigError(ValueError):
    """Schema violations; .violations lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.violations))


@dataclass
class Scenario:
    """Validated scenario description (pure data; builders produce live objects)."""

    scenario_id: str
    seed: int
    angle: dict
    charges: dict
    gauge: dict
    quadrature: dict
    grid: dict
    probes: dict
    geodesics: dict
    barriers: dict
    decay: dict
    tolerances: dict
    checks: list
    base_dir: Path = dc_field(default_factory=Path)

    # -- builders ------------------------------------------------------------

    def build_angle(self) -> ConeAngleSpec:
        kind = self.angle["kind"]
        if kind == "constant":
            return ConeAngleSpec.constant(self.angle["value"])
        if kind == "expression":
            return ConeAngleSpec.from_expression(self.angle["expression"], self.angle["at_infinity"])
        if kind == "constant_outside_disk":
            return ConeAngleSpec.constant_outside_disk(
                self.angle["expression"], self.angle["radius"], self.angle["outside_value"]
            )
        if kind == "grid":
            values = np.loadtxt(self.base_dir / self.angle["path"], delimiter=",", ndmin=2)
            return ConeAngleSpec.from_grid(values)
        raise ConfigError([f"angle.kind {kind!r} unknown"])

    def build_charges(self) -> ChargeConfig:
        kappa = self.charges.get("kappa", DEFAULT_KAPPA)
        if "blowup_points" in self.charges:
            pts = [(c["a"], c["b"]) for c in self.charges["blowup_points"]]
            heights = [c["height"] for c in self.charges["blowup_points"]]
            return ChargeConfig.from_blowup_points(pts, heights, kappa=kappa)
        pts = tuple(HPoint(c["z"], c["x2"], c["x3"]) for c in self.charges.get("points", ()))
        return ChargeConfig(points=pts, kappa=kappa)

    def build_gauge(self) -> GaugeDescriptor:
        return GaugeDescriptor(
            base_point=tuple(self.gauge["base_point"]) if "base_point" in self.gauge else None,
            string_directions=tuple(self.gauge.get("strings", ())),
            homotopy_order=self.gauge.get("homotopy_order", 64),
        )

    def build_quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(
            lebedev_degree=self.quadrature.get("lebedev_degree", 131),
            switch_rho=self.quadrature.get("switch_rho", 0.85),
            panel_gl=self.quadrature.get("panel_gl", 24),
            panel_phi=self.quadrature.get("panel_phi", 96),
        )

    def box(self):
        b = self.grid["box"]
        return (tuple(b["z"]), tuple(b["x2"]), tuple(b["x3"]))

    def tolerance(self, key: str, scale: float = 1.0) -> float:
        base = self.tolerances.get(key, TOLERANCE_KEYS[key])
        if key.startswith("order") or key.endswith(("_low", "_high")):
            return base  # order windows are not scaled
        return base * scale

    def canonical(self) -> dict:
        return {
            "scenario": self.scenario_id,
            "seed": self.seed,
            "angle": self.angle,
            "charges": self.charges,
            "gauge": self.gauge,
            "quadrature": self.quadrature,
            "grid": self.grid,
            "probes": self.probes,
            "geodesics": self.geodesics,
            "barriers": self.barriers,
            "decay": self.decay,
            "tolerances": self.tolerances,
            "checks": self.checks,
        }


def _expect_keys(section: dict, path: str, allowed: set, required: set, out: list):
    for key in section:
        if key not in allowed:
            out.append(f"{path}: unknown key {key!r} (strict mode)")
    for key in required:
        if key not in section:
            out.append(f"{path}: missing required key {key!r}")


def _positive(value, path, out) -> bool:
    if not isinstance(value, (int, float)) or not value > 0:
        out.append(f"{path}: must be a positive number, got {value!r}")
        return False
    return True


def parse_config(text: str, base_dir: Path | None = None) -> Scenario:
    """Parse and validate a YAML scenario; raises ConfigError listing violations."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"YAML parse error: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a mapping"])
    v: list[str] = []
    _expect_keys(
        raw,
        "top-level",
        {"scenario", "seed", "angle", "charges", "gauge", "quadrature", "grid",
         "probes", "geodesics", "barriers", "decay", "tolerances", "checks"},
        {"scenario", "angle"},
        v,
    )
    scenario_id = raw.get("scenario", "")
    if not isinstance(scenario_id, str) or not scenario_id:
        v.append("scenario: must be a nonempty string id")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        v.append("seed: must be an integer")

    angle = raw.get("angle", {})
    if isinstance(angle, dict):
        kind = angle.get("kind")
        if kind == "constant":
            _expect_keys(angle, "angle", {"kind", "value"}, {"value"}, v)
            if "value" in angle:
                _positive(angle["value"], "angle.value", v)
        elif kind == "expression":
            _expect_keys(angle, "angle", {"kind", "expression", "at_infinity"}, {"expression", "at_infinity"}, v)
            if "at_infinity" in angle:
                _positive(angle["at_infinity"], "angle.at_infinity", v)
        elif kind == "constant_outside_disk":
            _expect_keys(
                angle, "angle", {"kind", "expression", "radius", "outside_value"},
                {"expression", "radius", "outside_value"}, v,
            )
        elif kind == "grid":
            _expect_keys(angle, "angle", {"kind", "path"}, {"path"}, v)
            if base_dir is not None and "path" in angle and not (base_dir / angle["path"]).exists():
                v.append(f"angle.path: file {angle['path']!r} does not exist")
        else:
            v.append(f"angle.kind: must be constant|expression|constant_outside_disk|grid, got {kind!r}")
    else:
        v.append("angle: must be a mapping")

    charges = raw.get("charges", {})
    if isinstance(charges, dict):
        _expect_keys(charges, "charges", {"points", "blowup_points", "kappa"}, set(), v)
        if "kappa" in charges:
            _positive(charges["kappa"], "charges.kappa", v)
        if "points" in charges and "blowup_points" in charges:
            v.append("charges: give either points or blowup_points, not both")
        seen = set()
        for i, c in enumerate(charges.get("points", []) or []):
            _expect_keys(c, f"charges.points[{i}]", {"z", "x2", "x3"}, {"z", "x2", "x3"}, v)
            if "z" in c and not (isinstance(c["z"], (int, float)) and c["z"] > 0):
                v.append(f"charges.points[{i}].z: charges must have z > 0")
            key = (c.get("z"), c.get("x2"), c.get("x3"))
            if key in seen:
                v.append(f"charges.points[{i}]: duplicate charge {key}")
            seen.add(key)
        for i, c in enumerate(charges.get("blowup_points", []) or []):
            _expect_keys(c, f"charges.blowup_points[{i}]", {"a", "b", "height"}, {"a", "b", "height"}, v)
            if "height" in c:
                _positive(c["height"], f"charges.blowup_points[{i}].height", v)
    else:
        v.append("charges: must be a mapping")

    gauge = raw.get("gauge", {})
    if isinstance(gauge, dict):
        _expect_keys(gauge, "gauge", {"base_point", "strings", "homotopy_order"}, set(), v)
        for i, s in enumerate(gauge.get("strings", []) or []):
            if s not in ("down", "up"):
                v.append(f"gauge.strings[{i}]: must be 'down' or 'up'")
    else:
        v.append("gauge: must be a mapping")

    quadrature = raw.get("quadrature", {})
    if isinstance(quadrature, dict):
        _expect_keys(quadrature, "quadrature", {"lebedev_degree", "switch_rho", "panel_gl", "panel_phi"}, set(), v)
    else:
        v.append("quadrature: must be a mapping")

    grid = raw.get("grid", {})
    if isinstance(grid, dict) and grid:
        _expect_keys(grid, "grid", {"box", "h"}, {"box", "h"}, v)
        if "h" in grid:
            _positive(grid["h"], "grid.h", v)
        box = grid.get("box", {})
        if isinstance(box, dict):
            _expect_keys(box, "grid.box", {"z", "x2", "x3"}, {"z", "x2", "x3"}, v)
            for ax in ("z", "x2", "x3"):
                rng = box.get(ax)
                if rng is not None and (not isinstance(rng, list) or len(rng) != 2 or not rng[0] < rng[1]):
                    v.append(f"grid.box.{ax}: must be [lo, hi] with lo < hi")
            if isinstance(box.get("z"), list) and len(box["z"]) == 2 and box["z"][0] <= 0:
                v.append("grid.box.z: must stay strictly above the divisor z = 0")
        else:
            v.append("grid.box: must be a mapping")
    elif not isinstance(grid, dict):
        v.append("grid: must be a mapping")

    probes = raw.get("probes", {})
    if isinstance(probes, dict):
        _expect_keys(probes, "probes", {"cone_points", "cone_heights", "flux_radius"}, set(), v)
    else:
        v.append("probes: must be a mapping")

    geodesics = raw.get("geodesics", {})
    if isinstance(geodesics, dict):
        _expect_keys(
            geodesics, "geodesics",
            {"n_shots", "length", "z_range", "x_range", "drift_tol", "rtol", "atol", "min_completed_fraction"},
            set(), v,
        )
    else:
        v.append("geodesics: must be a mapping")

    barriers = raw.get("barriers", {})
    if isinstance(barriers, dict):
        _expect_keys(barriers, "barriers", {"collar", "n_samples"}, set(), v)
    else:
        v.append("barriers: must be a mapping")

    decay = raw.get("decay", {})
    if isinstance(decay, dict):
        _expect_keys(decay, "decay", {"n_rays", "n_steps", "t_max"}, set(), v)
    else:
        v.append("decay: must be a mapping")

    tolerances = raw.get("tolerances", {})
    if isinstance(tolerances, dict):
        for key in tolerances:
            if key not in TOLERANCE_KEYS:
                v.append(f"tolerances: unknown key {key!r} (known: {sorted(TOLERANCE_KEYS)})")
    else:
        v.append("tolerances: must be a mapping")

    checks = raw.get("checks", [])
    if isinstance(checks, list):
        for c in checks:
            if c not in KNOWN_CHECKS:
                v.append(f"checks: unknown check {c!r}")
    else:
        v.append("checks: must be a list")

    if v:
        raise ConfigError(v)

    scenario = Scenario(
        scenario_id=scenario_id,
        seed=seed,
        angle=angle,
        charges=charges,
        gauge=gauge,
        quadrature=quadrature,
        grid=grid,
        probes=probes,
        geodesics=geodesics,
        barriers=barriers,
        decay=decay,
        tolerances=tolerances,
        checks=list(checks),
        base_dir=base_dir if base_dir is not None else Path("."),
    )
    # semantic validation that needs live objects
    problems = []
    try:
        spec = scenario.build_angle()
        spec.validate()
    except ConfigError:
        raise
    except Exception as exc:
        problems.append(f"angle: {exc}")
    try:
        scenario.build_charges()
    except Exception as exc:
        problems.append(f"charges: {exc}")
    try:
        scenario.build_quadrature()
    except Exception as exc:
        problems.append(f"quadrature: {exc}")
    if problems:
        raise ConfigError(problems)
    return scenario


def load_config(path) -> Scenario:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


def config_hash(scenario: Scenario) -> str:
    """Stable hash of the canonicalized configuration."""
    blob = json.dumps(scenario.canonical(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
