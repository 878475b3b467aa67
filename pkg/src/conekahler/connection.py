"""Curvature 2-form, flux quantization, and a connection potential.

The curvature form is the Hodge star of the potential differential. A
potential 1-form with that exterior derivative is built as

* one closed-form monopole term per charge, in string gauge (the string is
  the vertical ray below the charge by default; per-charge override to the
  upward ray is supported), plus
* the straight-segment homotopy primitive of the harmonic-extension part of
  the curvature, based at a configurable point.

Orientation conventions (fixed here, used by the tests):

* flux() integrates the curvature over a geodesic sphere oriented so that a
  unit source inside has flux +kappa (the inward Euclidean normal);
* loops around a string are right-handed about the string direction, which
  makes the loop integral of the potential +kappa;
* open Stokes checks pair a disk with its right-handed boundary circle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dirichlet import HarmonicExtension
from .hyperbolic import EvaluationError, HPoint, OneForm3, TwoForm3, hyp_distance
from .potential import Potential
from .quadrature import gauss_legendre_01

__all__ = [
    "GaugeDescriptor",
    "ConnectionData",
    "curvature_form",
    "curvature_vector_many",
    "flux",
    "loop_integral",
    "disk_flux",
    "curl_residual",
    "gauge_decay_report",
]

STRING_TOL = 1e-9


def curvature_vector_many(potential: Potential, pts) -> np.ndarray:
    """Curvature components (M, 3) in the (dx2^dx3, dx3^dz, dz^dx2) basis.

    Computed as the exact potential gradient divided by the height, which is
    the Hodge star of the differential in these conventions.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    grad = potential.gradient_many(pts)
    return grad / pts[:, :1]


def curvature_form(potential: Potential, p, pole_distance: float = 1e-6) -> TwoForm3:
    """Curvature 2-form at p; raises near the charges."""
    a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
    for c in potential.charges.points:
        if hyp_distance(HPoint.from_array(a), c) < pole_distance:
            raise EvaluationError(f"curvature evaluated within {pole_distance} of charge {c}")
    return TwoForm3(tuple(curvature_vector_many(potential, a[None, :])[0]))


# ---------------------------------------------------------------------------
# gauge potential


@dataclass(frozen=True)
class GaugeDescriptor:
    """Gauge bookkeeping: homotopy base point and per-charge string directions.

    base_point defaults to height 1 above the centroid of the charges (or
    above the origin without charges). string_directions entries are 'down'
    (default; string toward the boundary plane) or 'up'.
    """

    base_point: tuple | None = None
    string_directions: tuple = ()
    homotopy_order: int = 64

    def resolved_base(self, charges) -> np.ndarray:
        if self.base_point is not None:
            b = np.asarray(self.base_point, dtype=float)
            if b[0] <= 0:
                raise ValueError("gauge base point must have z > 0")
            return b
        arr = charges.as_array()
        if arr.shape[0]:
            return np.array([1.0, arr[:, 1].mean(), arr[:, 2].mean()])
        return np.array([1.0, 0.0, 0.0])

    def string_sign(self, i: int) -> float:
        d = self.string_directions[i] if i < len(self.string_directions) else "down"
        if d not in ("down", "up"):
            raise ValueError(f"string direction must be 'down' or 'up', got {d!r}")
        return 1.0 if d == "down" else -1.0


def _monopole_many(charge: np.ndarray, kappa: float, sign: float, pts: np.ndarray) -> np.ndarray:
    """String-gauge monopole potential of one charge at points (M, 3).

    Components of kappa/(4 pi) (cos(axis angle) - sign) d(azimuth), written
    with the cancellation-free identity cos(psi) - 1 = -4 rho^2 z0^2/(S(N+S))
    so the values stay finite on the regular half of the axis.
    """
    z0, a, b = charge
    z = pts[:, 0]
    d2 = pts[:, 1] - a
    d3 = pts[:, 2] - b
    rho2 = d2 * d2 + d3 * d3
    n = rho2 + z * z - z0 * z0
    s = np.sqrt((rho2 + (z - z0) ** 2) * (rho2 + (z + z0) ** 2))
    denom = s * (s + sign * n)
    on_string = denom <= STRING_TOL * (1.0 + s * s)
    if np.any(on_string):
        where = pts[on_string][0]
        direction = "below" if sign > 0 else "above"
        raise EvaluationError(
            f"evaluation on the Dirac string {direction} charge (z0={z0}, x2={a}, x3={b}) at {where}"
        )
    coef = sign * kappa * z0 * z0 / (np.pi * denom)
    out = np.zeros_like(pts)
    out[:, 1] = coef * d3
    out[:, 2] = -coef * d2
    return out


class ConnectionData:
    """Potential 1-form with exterior derivative equal to the curvature form.

    Constant boundary data makes the harmonic extension exactly constant, so
    its curvature contribution vanishes identically and the homotopy term is
    skipped (the integrand is the zero form; this is detection, not an
    approximation).
    """

    def __init__(self, potential: Potential, gauge: GaugeDescriptor | None = None):
        self.potential = potential
        self.gauge = gauge if gauge is not None else GaugeDescriptor()
        self.base = self.gauge.resolved_base(potential.charges)
        self._gl_t, self._gl_w = gauss_legendre_01(self.gauge.homotopy_order)
        lo, hi = potential.extension.beta.beta_inv_range()
        self._smooth_trivial = hi - lo < 1e-14

    def _smooth_part(self, pts: np.ndarray) -> np.ndarray:
        """Homotopy primitive of the harmonic-extension curvature along straight segments.

        All path nodes of all points go through the gradient kernel in one
        batched call; grid sweeps stay kernel-bound instead of call-bound.
        """
        ext = self.potential.extension
        m, k = pts.shape[0], self._gl_t.size
        seg = pts - self.base[None, :]                       # (m, 3)
        nodes = self.base[None, None, :] + self._gl_t[None, :, None] * seg[:, None, :]
        grad = ext.gradient_many(nodes.reshape(-1, 3)).reshape(m, k, 3)
        fvec = grad / nodes[..., :1]
        cross = np.cross(fvec, seg[:, None, :])
        return np.einsum("k,mkj->mj", self._gl_w * self._gl_t, cross)

    def one_form_many(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros_like(pts) if self._smooth_trivial else self._smooth_part(pts)
        charges = self.potential.charges
        arr = charges.as_array()
        for i, c in enumerate(arr):
            out += _monopole_many(c, charges.kappa, self.gauge.string_sign(i), pts)
        return out

    def one_form(self, p) -> OneForm3:
        a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
        return OneForm3(tuple(self.one_form_many(a[None, :])[0]))


# ---------------------------------------------------------------------------
# integrals


def flux(
    potential: Potential,
    center,
    radius: float,
    n_polar: int = 48,
    n_azimuth: int = 96,
    check_estimate: bool = False,
    tol: float = 1e-6,
) -> float:
    """Curvature flux through the geodesic sphere of the given hyperbolic radius.

    The geodesic sphere about (z0, x2, x3) is the Euclidean sphere with
    center (z0 cosh r, x2, x3) and radius z0 sinh r. The integral is oriented
    so that a unit source inside contributes +kappa. Raises if another
    charge sits on or inside a thin shell around the sphere, or (with
    check_estimate) if the two-resolution error estimate exceeds tol.
    """
    c = center if isinstance(center, HPoint) else HPoint.from_array(np.asarray(center, dtype=float))
    for q in potential.charges.points:
        d = hyp_distance(c, q)
        if d > 1e-9 and abs(d - radius) < 0.05 * radius:
            raise ValueError(f"charge {q} lies within the quadrature shell of the flux sphere")
    val = _flux_once(potential, c, radius, n_polar, n_azimuth)
    if check_estimate:
        val2 = _flux_once(potential, c, radius, n_polar * 2, n_azimuth * 2)
        if abs(val - val2) > tol:
            raise RuntimeError(f"flux quadrature not converged: estimate {abs(val - val2):.3e} > {tol:.3e}")
        return val2
    return val


def _flux_once(potential: Potential, c: HPoint, radius: float, n_polar: int, n_azimuth: int) -> float:
    ec = np.array([c.z * np.cosh(radius), c.x2, c.x3])
    er = c.z * np.sinh(radius)
    t, wt = np.polynomial.legendre.leggauss(n_polar)
    alpha = 0.5 * np.pi * (t + 1.0)
    wa = 0.5 * np.pi * wt
    phi = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
    sa, ca = np.sin(alpha), np.cos(alpha)
    # outward normals in (z, x2, x3) components
    nrm = np.empty((n_polar, n_azimuth, 3))
    nrm[..., 0] = ca[:, None]
    nrm[..., 1] = sa[:, None] * np.cos(phi)[None, :]
    nrm[..., 2] = sa[:, None] * np.sin(phi)[None, :]
    pts = ec[None, None, :] + er * nrm
    fvec = curvature_vector_many(potential, pts.reshape(-1, 3)).reshape(n_polar, n_azimuth, 3)
    integrand = np.einsum("apk,apk->ap", fvec, nrm)
    outward = er**2 * (2.0 * np.pi / n_azimuth) * np.einsum("a,ap->", wa * sa, integrand)
    return float(-outward)  # oriented toward the source: unit charges give +kappa


def loop_integral(one_form_many, center, radius: float, axis: str = "string", n: int = 512) -> float:
    """Line integral of a 1-form around a horizontal circle about a vertical axis.

    center = (z, x2, x3) circle center, radius in the (x2, x3) plane. With
    axis='string' the loop is right-handed about the downward direction
    (clockwise seen from above); axis='up' reverses it.
    """
    t = 2.0 * np.pi * np.arange(n) / n
    sgn = -1.0 if axis == "string" else 1.0
    c = np.asarray(center, dtype=float)
    ang = sgn * t
    pts = np.stack(
        [np.full(n, c[0]), c[1] + radius * np.cos(ang), c[2] + radius * np.sin(ang)],
        axis=-1,
    )
    tangents = np.stack(
        [np.zeros(n), -radius * sgn * np.sin(ang), radius * sgn * np.cos(ang)],
        axis=-1,
    )
    vals = one_form_many(pts)
    return float(np.einsum("nk,nk->", vals, tangents) * (2.0 * np.pi / n))


def disk_flux(potential: Potential, center, radius: float, n_r: int = 48, n_t: int = 96) -> float:
    """Curvature integral over a horizontal disk, normal along +z (right-handed
    with the counterclockwise boundary circle seen from above)."""
    c = np.asarray(center, dtype=float)
    r, wr = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * radius * (r + 1.0)
    wr = 0.5 * radius * wr
    t = 2.0 * np.pi * np.arange(n_t) / n_t
    pts = np.empty((n_r, n_t, 3))
    pts[..., 0] = c[0]
    pts[..., 1] = c[1] + r[:, None] * np.cos(t)[None, :]
    pts[..., 2] = c[2] + r[:, None] * np.sin(t)[None, :]
    fvec = curvature_vector_many(potential, pts.reshape(-1, 3)).reshape(n_r, n_t, 3)
    # only the dx2^dx3 component (index 0) pairs with a z-normal disk
    return float((2.0 * np.pi / n_t) * np.einsum("r,rt->", wr * r, fvec[..., 0]))


def curl_residual(conn: ConnectionData, p, step: float | None = None) -> np.ndarray:
    """Componentwise defect of (finite-difference exterior derivative of A) - F."""
    a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
    h = step if step is not None else max(1e-5, 1e-3 * a[0])
    jac = np.empty((3, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        jac[i] = (conn.one_form_many((a + e)[None, :])[0] - conn.one_form_many((a - e)[None, :])[0]) / (2.0 * h)
    curl = np.array([jac[1, 2] - jac[2, 1], jac[2, 0] - jac[0, 2], jac[0, 1] - jac[1, 0]])
    fvec = curvature_vector_many(conn.potential, a[None, :])[0]
    return curl - fvec


# ---------------------------------------------------------------------------
# decay of the harmonic-extension part


@dataclass
class GaugeDecayReport:
    sup_constant: float
    sup_constant_doubled: float
    relative_change: float
    vertical_decay_start: float
    vertical_decay_end: float
    per_ray: list


def gauge_decay_report(
    ext: HarmonicExtension,
    n_rays: int = 8,
    n_steps: int = 12,
    t_max: float = 200.0,
    seed: int = 0,
) -> GaugeDecayReport:
    """Gauge-invariant decay of the harmonic-extension curvature.

    Along a family of rays to infinity, evaluates the Euclidean norm of the
    extension differential times ((z+1)^2 + x2^2 + x3^2); boundedness of the
    supremum is the content of the Coulomb-gauge decay estimate, and the
    quantity z*|du| itself must decay to zero along vertical rays. The
    supremum is recomputed with doubled sampling to report stability.
    """

    def sample(nr: int, ns: int):
        rng = np.random.default_rng(seed)
        sup = 0.0
        rows = []
        vert_start = vert_end = None
        for i in range(nr):
            origin = np.array([1.0, rng.uniform(-2, 2), rng.uniform(-2, 2)])
            if i % 2 == 0:
                direction = np.array([1.0, 0.0, 0.0])  # vertical ray
            else:
                ang = rng.uniform(0, 2 * np.pi)
                direction = np.array([0.0, np.cos(ang), np.sin(ang)])
            ts = np.geomspace(1.0, t_max, ns)
            pts = origin[None, :] + ts[:, None] * direction[None, :]
            grads = ext.gradient_many(pts)
            gnorm = np.linalg.norm(grads, axis=1)
            weight = (pts[:, 0] + 1.0) ** 2 + pts[:, 1] ** 2 + pts[:, 2] ** 2
            q = gnorm * weight
            zdu = pts[:, 0] * gnorm
            sup = max(sup, float(q.max()))
            rows.append(
                {
                    "origin": origin.tolist(),
                    "direction": direction.tolist(),
                    "sup_weighted": float(q.max()),
                    "z_du_first": float(zdu[0]),
                    "z_du_last": float(zdu[-1]),
                }
            )
            if i % 2 == 0 and vert_start is None:
                vert_start, vert_end = float(zdu[0]), float(zdu[-1])
        return sup, rows, vert_start, vert_end

    sup1, rows, vs, ve = sample(n_rays, n_steps)
    sup2, _, _, _ = sample(2 * n_rays, 2 * n_steps)
    rel = abs(sup2 - sup1) / max(sup1, 1e-300)
    return GaugeDecayReport(
        sup_constant=sup1,
        sup_constant_doubled=sup2,
        relative_change=rel,
        vertical_decay_start=vs if vs is not None else 0.0,
        vertical_decay_end=ve if ve is not None else 0.0,
        per_ray=rows,
    )
