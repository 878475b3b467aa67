"""Hyperbolic Green's functions and the assembled harmonic potential.

A unit source at a half-space point contributes kappa*(coth d - 1)/(4 pi)
where d is the hyperbolic distance to the source: positive, h-harmonic off
the pole, decaying like exp(-2d) at infinity and like z^2 toward the
boundary plane. The full potential adds the harmonic extension of the
reciprocal angle data, and stays positive by the maximum principle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _core
from .dirichlet import HarmonicExtension
from .hyperbolic import EvaluationError, HPoint, hyp_distance

__all__ = [
    "DEFAULT_KAPPA",
    "ChargeConfig",
    "Potential",
    "green_function",
    "green_gradient",
    "assemble_potential",
    "vertical_decay_fit",
]

#: default flux per charge: one full period of the 2 pi circle fibre
DEFAULT_KAPPA = 2.0 * np.pi

#: evaluation closer than this (hyperbolic distance) to a charge is a pole error
POLE_DISTANCE = 1e-6


@dataclass(frozen=True)
class ChargeConfig:
    """Source points in the half-space with the flux constant per charge.

    Charges must be pairwise distinct with z > 0. Two charges on one
    vertical line correspond to an iterated blow-up; that case is outside
    the verification scope and only triggers a warning flag.
    """

    points: tuple
    kappa: float = DEFAULT_KAPPA

    def __post_init__(self):
        pts = tuple(p if isinstance(p, HPoint) else HPoint.from_array(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        for i, p in enumerate(pts):
            for q in pts[i + 1 :]:
                if p == q:
                    raise ValueError(f"duplicate charge at {p}")
        if self.shares_vertical_line:
            warnings.warn(
                "two charges share a vertical line (iterated blow-up); "
                "cone-angle verification along that line is out of scope",
                stacklevel=2,
            )

    @property
    def shares_vertical_line(self) -> bool:
        horiz = [(p.x2, p.x3) for p in self.points]
        return len(set(horiz)) < len(horiz)

    @property
    def k(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, 3))
        return np.array([[p.z, p.x2, p.x3] for p in self.points])

    @staticmethod
    def empty(kappa: float = DEFAULT_KAPPA) -> "ChargeConfig":
        return ChargeConfig(points=(), kappa=kappa)

    @staticmethod
    def from_blowup_points(xi_points, heights, kappa: float = DEFAULT_KAPPA) -> "ChargeConfig":
        """Charges from blow-up points (a_i + i b_i, 0) plus per-point heights.

        The construction fixes only the vertical line through each blow-up
        point; the height along it is free input.
        """
        pts = tuple(HPoint(float(h), float(a), float(b)) for (a, b), h in zip(xi_points, heights))
        return ChargeConfig(points=pts, kappa=kappa)


def green_function(p, q, kappa: float = DEFAULT_KAPPA) -> float:
    """Green term kappa*(coth d(p, q) - 1)/(4 pi); raises at the pole."""
    p = p if isinstance(p, HPoint) else HPoint.from_array(p)
    q = q if isinstance(q, HPoint) else HPoint.from_array(q)
    d = hyp_distance(p, q)
    if d < POLE_DISTANCE:
        raise EvaluationError(f"Green evaluation at its pole (distance {d:.2e})")
    return float(kappa / (4.0 * np.pi) * (1.0 / np.tanh(d) - 1.0))


def green_gradient(p, q, kappa: float = DEFAULT_KAPPA) -> np.ndarray:
    """Gradient of green_function(p, .) with respect to q, components (z, x2, x3)."""
    pa = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
    qa = q.as_array() if isinstance(q, HPoint) else np.asarray(q, dtype=float)
    _, grad = _core.green_sum(pa[None, :], kappa, qa[None, :], True)
    return grad[0]


class Potential:
    """Harmonic potential: boundary harmonic extension plus Green terms.

    Scalar-field contract with exact gradient; positive on the complement of
    the charges; evaluation at a charge raises an EvaluationError.
    """

    def __init__(self, extension: HarmonicExtension, charges: ChargeConfig):
        self.extension = extension
        self.charges = charges
        self._charge_arr = charges.as_array()

    def _guard(self, pts: np.ndarray) -> None:
        if self._charge_arr.shape[0] == 0:
            return
        for c in self._charge_arr:
            s = np.sum((pts - c) ** 2, axis=-1)
            cd = 1.0 + s / (2.0 * pts[..., 0] * c[0])
            if np.any(np.arccosh(np.maximum(cd, 1.0)) < POLE_DISTANCE):
                raise EvaluationError(f"potential evaluated at charge {c}")

    def value_many(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        self._guard(pts)
        out = self.extension.value_many(pts)
        if self._charge_arr.shape[0]:
            g, _ = _core.green_sum(self._charge_arr, self.charges.kappa, pts, False)
            out = out + g
        return out

    def value(self, p) -> float:
        a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
        return float(self.value_many(a[None, :])[0])

    def gradient_many(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        self._guard(pts)
        out = self.extension.gradient_many(pts)
        if self._charge_arr.shape[0]:
            _, gg = _core.green_sum(self._charge_arr, self.charges.kappa, pts, True)
            out = out + gg
        return out

    def gradient(self, p) -> np.ndarray:
        a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
        return self.gradient_many(a[None, :])[0]

    def eval_many(self, pts):
        """Values and gradients in one pass."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        self._guard(pts)
        vals, grads = self.extension.eval_many(pts)
        if self._charge_arr.shape[0]:
            gv, gg = _core.green_sum(self._charge_arr, self.charges.kappa, pts, True)
            vals = vals + gv
            grads = grads + gg
        return vals, grads

    def green_part_many(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if not self._charge_arr.shape[0]:
            return np.zeros(pts.shape[0])
        g, _ = _core.green_sum(self._charge_arr, self.charges.kappa, pts, False)
        return g

    @property
    def has_exact_gradient(self) -> bool:
        return True

    @property
    def has_exact_hessian(self) -> bool:
        return False


def assemble_potential(extension: HarmonicExtension, charges: ChargeConfig | None = None) -> Potential:
    """Bundle the harmonic extension with the Green terms of the charges."""
    return Potential(extension, charges if charges is not None else ChargeConfig.empty())


@dataclass
class DecayFit:
    plane_point: tuple
    exponent: float
    amplitude: float
    residual: float
    heights: list
    values: list


def vertical_decay_fit(
    charges: ChargeConfig,
    plane_points,
    z_ladder=(1e-1, 3e-2, 1e-2, 3e-3, 1e-3),
    exclusion: float = 1e-6,
) -> list[DecayFit]:
    """Fit the boundary decay exponent of the Green sum along vertical descents.

    For each plane point, evaluates the summed Green terms at the given
    heights and fits value ~ amplitude * z^alpha by log-log least squares.
    Descents through a charge's vertical line are rejected (the closed form
    degenerates there only at the charge itself, but the contract keeps
    probes off those lines).
    """
    if charges.k == 0:
        return []
    arr = charges.as_array()
    out = []
    for x2, x3 in plane_points:
        if np.any((np.abs(arr[:, 1] - x2) < exclusion) & (np.abs(arr[:, 2] - x3) < exclusion)):
            raise ValueError(f"descent at ({x2}, {x3}) passes under a charge; move the probe")
        zs = np.asarray(z_ladder, dtype=float)
        pts = np.column_stack([zs, np.full_like(zs, x2), np.full_like(zs, x3)])
        vals, _ = _core.green_sum(arr, charges.kappa, pts, False)
        if np.any(vals <= 0):
            raise RuntimeError("nonpositive Green sum in decay fit; ladder too close to a charge")
        coeffs, res_arr = np.polyfit(np.log(zs), np.log(vals), 1, full=True)[:2]
        resid = float(res_arr[0]) if len(res_arr) else 0.0
        out.append(
            DecayFit(
                plane_point=(float(x2), float(x3)),
                exponent=float(coeffs[0]),
                amplitude=float(np.exp(coeffs[1])),
                residual=resid,
                heights=zs.tolist(),
                values=vals.tolist(),
            )
        )
    return out
