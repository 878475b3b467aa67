"""Dirichlet problem at infinity for the hyperbolic Laplacian.

The boundary data is the reciprocal of a prescribed positive angle function
on the plane-plus-infinity, read as a function on the sphere at infinity.
The bounded harmonic extension is computed by Poisson-kernel quadrature in
the ball model: a fixed Lebedev rule away from the boundary sphere, and a
localized subdivision rule (dyadic panels around the kernel peak) when the
evaluation point is close to it. The exact half-space-to-ball isometry is
used for the model change, which is what makes the quadrature value
h-harmonic in half-space coordinates.

Barrier and maximum-principle checks certify the collar structure
u = (boundary data) + O(z) with an explicit comparison constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _core
from .expressions import compile_expression
from .hyperbolic import (
    BoundaryPoint,
    EvaluationError,
    HPoint,
    ball_jacobian_isometric,
    boundary_to_sphere,
    fd_step,
    half_to_ball_isometric,
    laplacian,
    sphere_to_plane,
)
from .quadrature import LEBEDEV_DEGREES, cap_quadrature, lebedev

__all__ = [
    "QuadratureConfig",
    "QuadratureError",
    "ConeAngleSpec",
    "HarmonicExtension",
    "poisson_weight",
    "barrier_constant",
    "check_barriers",
    "check_max_principle",
    "BarrierReport",
    "MaxPrincipleReport",
]

#: rows of the sphere this close to the pole (1,0,0) count as infinity
_POLE_TOL = 1e-12


class QuadratureError(RuntimeError):
    """Quadrature failed to converge; carries the error estimate."""

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class QuadratureConfig:
    """Quadrature controls for the harmonic extension.

    lebedev_degree: fixed sphere rule used while |y| <= switch_rho;
    panel_gl / panel_phi: per-panel Gauss-Legendre order and azimuthal count
    of the near-boundary cap rule.
    """

    lebedev_degree: int = 131
    switch_rho: float = 0.85
    panel_gl: int = 24
    panel_phi: int = 96

    def __post_init__(self):
        if self.lebedev_degree not in LEBEDEV_DEGREES:
            raise ValueError(f"lebedev_degree must be one of {LEBEDEV_DEGREES}")
        if not 0.1 < self.switch_rho < 1.0:
            raise ValueError("switch_rho must lie in (0.1, 1)")


DEFAULT_QUAD = QuadratureConfig()


def poisson_weight(y, xi) -> float:
    """Unnormalized ball Poisson kernel ((1 - |y|^2)/|y - xi|^2)^2."""
    ya = y.as_array() if hasattr(y, "as_array") else np.asarray(y, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return float(((1.0 - ya @ ya) / ((ya - xi) @ (ya - xi))) ** 2)


class ConeAngleSpec:
    """Prescribed positive angle function on the plane plus infinity.

    Carries the angle as a function on the unit sphere (via the boundary
    chart), the declared smoothness marker, and validation helpers. The
    reciprocal is the Dirichlet boundary data.
    """

    def __init__(self, sphere_fn, smoothness: str = "smooth", source: str = "callable"):
        self._sphere_fn = sphere_fn
        self.smoothness = smoothness
        self.source = source

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, c: float) -> "ConeAngleSpec":
        if not c > 0:
            raise ValueError("angle must be positive")

        def fn(xi):
            return np.full(np.asarray(xi).shape[:-1], float(c))

        return cls(fn, source=f"constant {c}")

    @classmethod
    def from_plane_callable(cls, plane_fn, at_infinity: float) -> "ConeAngleSpec":
        """Angle given as fn(x2, x3) on the plane plus an explicit value at infinity."""
        if not at_infinity > 0:
            raise ValueError("angle at infinity must be positive")

        def fn(xi):
            xi = np.asarray(xi, dtype=float)
            flat = xi.reshape(-1, 3)
            out = np.full(flat.shape[0], float(at_infinity))
            finite = 1.0 - flat[:, 0] > _POLE_TOL
            if finite.any():
                xy = sphere_to_plane(flat[finite])
                out[finite] = plane_fn(xy[:, 0], xy[:, 1])
            return out.reshape(xi.shape[:-1])

        return cls(fn, source="plane callable")

    @classmethod
    def from_expression(cls, text: str, at_infinity: float) -> "ConeAngleSpec":
        """Angle from the documented expression grammar over (x2, x3)."""
        spec = cls.from_plane_callable(compile_expression(text), at_infinity)
        spec.source = f"expression: {text}"
        return spec

    @classmethod
    def constant_outside_disk(cls, text: str, radius: float, outside_value: float) -> "ConeAngleSpec":
        """Expression inside |x| <= radius, declared constant outside (and at infinity)."""
        inner = compile_expression(text)

        def plane_fn(x2, x3):
            x2 = np.asarray(x2, dtype=float)
            vals = np.asarray(inner(x2, x3), dtype=float)
            far = x2**2 + np.asarray(x3) ** 2 > radius**2
            return np.where(far, outside_value, vals)

        spec = cls.from_plane_callable(plane_fn, outside_value)
        spec.source = f"expression (constant {outside_value} outside |x|<={radius}): {text}"
        return spec

    @classmethod
    def from_grid(cls, values, smoothness: str = "grid-bilinear") -> "ConeAngleSpec":
        """Angle samples on a longitude-latitude grid of the sphere.

        values has shape (n_lat, n_lon): row i is colatitude t_i = i*pi/(n_lat-1)
        measured from the infinity pole (1, 0, 0); column j is longitude
        phi_j = 2*pi*j/n_lon with phi = atan2(xi3, xi2). Evaluation is
        bilinear, periodic in longitude.
        """
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 2 or values.shape[1] < 2:
            raise ValueError("grid must be 2-d with at least 2 rows and 2 columns")
        n_lat, n_lon = values.shape

        def fn(xi):
            xi = np.asarray(xi, dtype=float)
            flat = xi.reshape(-1, 3)
            t = np.arccos(np.clip(flat[:, 0], -1.0, 1.0))
            phi = np.mod(np.arctan2(flat[:, 2], flat[:, 1]), 2.0 * np.pi)
            fi = t / np.pi * (n_lat - 1)
            fj = phi / (2.0 * np.pi) * n_lon
            i0 = np.clip(np.floor(fi).astype(int), 0, n_lat - 2)
            j0 = np.floor(fj).astype(int) % n_lon
            di = fi - i0
            dj = fj - np.floor(fj)
            j1 = (j0 + 1) % n_lon
            v = (
                values[i0, j0] * (1 - di) * (1 - dj)
                + values[i0 + 1, j0] * di * (1 - dj)
                + values[i0, j1] * (1 - di) * dj
                + values[i0 + 1, j1] * di * dj
            )
            return v.reshape(xi.shape[:-1])

        return cls(fn, smoothness=smoothness, source=f"grid {n_lat}x{n_lon}")

    # -- evaluation ----------------------------------------------------------

    def beta_sphere(self, xi) -> np.ndarray:
        """Angle at sphere points, xi of shape (..., 3)."""
        return np.asarray(self._sphere_fn(xi), dtype=float)

    def beta_inv_sphere(self, xi) -> np.ndarray:
        return 1.0 / self.beta_sphere(xi)

    def beta_boundary(self, b: BoundaryPoint) -> float:
        return float(self.beta_sphere(boundary_to_sphere(b)))

    def beta_plane(self, x2, x3):
        xy = np.broadcast_arrays(np.asarray(x2, dtype=float), np.asarray(x3, dtype=float))
        pts = np.stack([xy[0], xy[1]], axis=-1)
        r2 = pts[..., 0] ** 2 + pts[..., 1] ** 2
        xi = np.stack(
            [(r2 - 1.0) / (1.0 + r2), 2.0 * pts[..., 0] / (1.0 + r2), 2.0 * pts[..., 1] / (1.0 + r2)],
            axis=-1,
        )
        return self.beta_sphere(xi)

    # -- validation ----------------------------------------------------------

    def beta_inv_range(self, degree: int = 131) -> tuple[float, float]:
        """Sampled (min, max) of the reciprocal over the sphere."""
        nodes, _ = lebedev(degree)
        vals = self.beta_inv_sphere(nodes)
        return float(vals.min()), float(vals.max())

    def validate(self, n_pairs: int = 4000, seed: int = 0) -> dict:
        """Positivity plus sampled difference-quotient bound on the sphere.

        Raises ValueError on nonpositive samples; returns a summary with the
        sampled Lipschitz-type bound of the reciprocal (the operational
        stand-in for the declared smoothness class).
        """
        nodes, _ = lebedev(131)
        vals = self.beta_sphere(nodes)
        if not np.all(vals > 0):
            bad = nodes[vals <= 0][:5]
            raise ValueError(f"angle function must be positive; nonpositive at sphere points {bad}")
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(n_pairs, 3))
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        step = rng.normal(size=(n_pairs, 3)) * 1e-4
        b = a + step
        b /= np.linalg.norm(b, axis=1, keepdims=True)
        sep = np.linalg.norm(a - b, axis=1)
        ok = sep > 1e-9
        quot = np.abs(self.beta_inv_sphere(a[ok]) - self.beta_inv_sphere(b[ok])) / sep[ok]
        lo, hi = self.beta_inv_range()
        return {
            "beta_inv_min": lo,
            "beta_inv_max": hi,
            "lipschitz_sampled": float(quot.max()),
            "smoothness": self.smoothness,
        }


class HarmonicExtension:
    """Bounded harmonic extension of the reciprocal angle data.

    Exposes the scalar-field contract (value/gradient) used downstream. The
    gradient is kernel-differentiated on the fixed-rule path and falls back
    to central differences on the near-boundary path.
    """

    def __init__(self, beta: ConeAngleSpec, quad: QuadratureConfig = DEFAULT_QUAD):
        self.beta = beta
        self.quad = quad
        self._nodes, self._weights = lebedev(quad.lebedev_degree)
        self._fvals = np.ascontiguousarray(beta.beta_inv_sphere(self._nodes))
        self.barrier = None  # set by check_barriers: (C, eps)

    # -- core evaluation -----------------------------------------------------

    def _cap_value(self, a: np.ndarray) -> float:
        y = half_to_ball_isometric(a)
        rho = float(np.linalg.norm(y))
        pts, wts = cap_quadrature(rho, y / rho, self.quad.panel_gl, self.quad.panel_phi)
        f = self.beta.beta_inv_sphere(pts)
        return float(wts @ f / wts.sum())

    def value_many(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        y = half_to_ball_isometric(pts)
        rho = np.linalg.norm(y, axis=-1)
        out = np.empty(pts.shape[0])
        near = rho > self.quad.switch_rho
        if (~near).any():
            u, _ = _core.poisson_sum(self._nodes, self._weights, self._fvals, np.ascontiguousarray(y[~near]), False)
            out[~near] = u
        for i in np.nonzero(near)[0]:
            out[i] = self._cap_value(pts[i])
        return out

    def value(self, p) -> float:
        a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
        return float(self.value_many(a[None, :])[0])

    def gradient_many(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        y = half_to_ball_isometric(pts)
        rho = np.linalg.norm(y, axis=-1)
        out = np.empty((pts.shape[0], 3))
        near = rho > self.quad.switch_rho
        if (~near).any():
            sel = ~near
            _, gy = _core.poisson_sum(self._nodes, self._weights, self._fvals, np.ascontiguousarray(y[sel]), True)
            jac = ball_jacobian_isometric(pts[sel])
            # du/dp_i = sum_j (du/dy_j) (dy_j/dp_i)
            out[sel] = np.einsum("mji,mj->mi", jac, gy)
        for i in np.nonzero(near)[0]:
            a = pts[i]
            h = fd_step(a[0])
            g = np.empty(3)
            for k in range(3):
                e = np.zeros(3)
                e[k] = h
                g[k] = (self._cap_value(a + e) - self._cap_value(a - e)) / (2.0 * h)
            out[i] = g
        return out

    def gradient(self, p) -> np.ndarray:
        a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
        return self.gradient_many(a[None, :])[0]

    def eval_many(self, pts):
        """Values and gradients in one kernel pass (hot path for ODE right sides)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        y = half_to_ball_isometric(pts)
        rho = np.linalg.norm(y, axis=-1)
        vals = np.empty(pts.shape[0])
        grads = np.empty((pts.shape[0], 3))
        near = rho > self.quad.switch_rho
        if (~near).any():
            sel = ~near
            u, gy = _core.poisson_sum(self._nodes, self._weights, self._fvals, np.ascontiguousarray(y[sel]), True)
            jac = ball_jacobian_isometric(pts[sel])
            vals[sel] = u
            grads[sel] = np.einsum("mji,mj->mi", jac, gy)
        if near.any():
            vals[near] = self.value_many(pts[near])
            grads[near] = self.gradient_many(pts[near])
        return vals, grads

    @property
    def has_exact_gradient(self) -> bool:
        return True

    @property
    def has_exact_hessian(self) -> bool:
        return False

    def value_checked(self, p, tol: float = 1e-8) -> float:
        """Value with a two-rule error estimate; raises QuadratureError above tol."""
        a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
        v = self.value(a)
        coarse_deg = LEBEDEV_DEGREES[max(0, LEBEDEV_DEGREES.index(self.quad.lebedev_degree) - 4)]
        coarse = HarmonicExtension(
            self.beta,
            QuadratureConfig(
                lebedev_degree=coarse_deg,
                switch_rho=self.quad.switch_rho,
                panel_gl=max(8, self.quad.panel_gl // 2),
                panel_phi=max(16, self.quad.panel_phi // 2),
            ),
        )
        est = abs(v - coarse.value(a))
        if est > tol:
            raise QuadratureError(f"quadrature error estimate {est:.3e} above tolerance {tol:.3e}", est)
        return v

    def laplacian_residual(self, p, step: float | None = None) -> float:
        """Finite-difference harmonicity defect at p (O(step^2) for exact values)."""
        return laplacian(self.value, p, step=step)


# ---------------------------------------------------------------------------
# barrier machinery


@dataclass
class BarrierReport:
    passed: bool
    n_samples: int
    barrier_constant: float
    collar_width: float
    min_upper_margin: float
    min_lower_margin: float
    remainder_bound: float  # sup |(u - data)/z| over the samples
    violations: list = field(default_factory=list)


@dataclass
class MaxPrincipleReport:
    passed: bool
    n_samples: int
    observed_min: float
    observed_max: float
    bound_min: float
    bound_max: float
    violations: list = field(default_factory=list)


def _collar_samples(eps: float, n: int, rng, include_boundary: bool = True) -> np.ndarray:
    """Sample points of the collar z <= eps over a moderate plane disk."""
    r = 6.0 * np.sqrt(rng.uniform(0.0, 1.0, n))
    ang = rng.uniform(0.0, 2.0 * np.pi, n)
    z = eps * rng.uniform(1e-3, 1.0, n)
    if include_boundary and n >= 8:
        z[:4] = eps  # closure of the collar
    return np.stack([z, r * np.cos(ang), r * np.sin(ang)], axis=-1)


def _plane_laplacian_beta_inv(beta: ConeAngleSpec, x2, x3, h: float = 1e-4):
    """(d^2/dx2^2 + d^2/dx3^2) of the reciprocal, by plane central differences."""
    b = lambda u, v: beta.beta_inv_sphere(_plane_to_sphere(u, v))
    f0 = b(x2, x3)
    return (b(x2 + h, x3) + b(x2 - h, x3) + b(x2, x3 + h) + b(x2, x3 - h) - 4.0 * f0) / h**2


def _plane_to_sphere(x2, x3):
    x2 = np.asarray(x2, dtype=float)
    x3 = np.asarray(x3, dtype=float)
    r2 = x2**2 + x3**2
    return np.stack([(r2 - 1.0) / (1.0 + r2), 2.0 * x2 / (1.0 + r2), 2.0 * x3 / (1.0 + r2)], axis=-1)


def barrier_constant(
    beta: ConeAngleSpec,
    eps: float,
    n_samples: int = 400,
    seed: int = 0,
    max_doublings: int = 60,
) -> float:
    """Comparison constant C for the barriers data +- C z on the collar z <= eps.

    Starts from the oscillation bound (max - min of the reciprocal)/eps and
    doubles until the sampled sign conditions hold: the upper barrier is
    superharmonic and the lower barrier subharmonic, i.e.
    z (C - z * plane-laplacian(data)) >= 0 and the mirrored inequality.
    Raises if certification fails after the doubling budget (data rougher
    than declared).
    """
    if not eps > 0:
        raise ValueError("collar width must be positive")
    lo, hi = beta.beta_inv_range()
    c = (hi - lo + 1e-3) / eps
    rng = np.random.default_rng(seed)
    samples = _collar_samples(eps, n_samples, rng)
    lap2 = _plane_laplacian_beta_inv(beta, samples[:, 1], samples[:, 2])
    need = np.abs(samples[:, 0] * lap2)  # sign conditions hold iff C >= z |lap2|
    for _ in range(max_doublings):
        if np.all(c >= need):
            return float(c)
        c *= 2.0
    raise RuntimeError(
        f"could not certify barrier sign conditions after {max_doublings} doublings; "
        f"max required {need.max():.3e}, reached C = {c:.3e}"
    )


def check_barriers(
    u: HarmonicExtension,
    beta: ConeAngleSpec,
    c: float,
    eps: float,
    n_samples: int = 1000,
    seed: int = 0,
) -> BarrierReport:
    """Verify data - C z <= u <= data + C z at collar samples; measure the O(z) remainder."""
    rng = np.random.default_rng(seed)
    pts = _collar_samples(eps, n_samples, rng)
    uvals = u.value_many(pts)
    data = beta.beta_inv_sphere(_plane_to_sphere(pts[:, 1], pts[:, 2]))
    upper = data + c * pts[:, 0] - uvals
    lower = uvals - (data - c * pts[:, 0])
    remainder = np.abs(uvals - data) / pts[:, 0]
    bad = np.nonzero((upper < 0) | (lower < 0))[0]
    violations = [
        {"point": pts[i].tolist(), "upper_margin": float(upper[i]), "lower_margin": float(lower[i])}
        for i in bad[:20]
    ]
    report = BarrierReport(
        passed=len(bad) == 0,
        n_samples=n_samples,
        barrier_constant=float(c),
        collar_width=float(eps),
        min_upper_margin=float(upper.min()),
        min_lower_margin=float(lower.min()),
        remainder_bound=float(remainder.max()),
        violations=violations,
    )
    if report.passed:
        u.barrier = (float(c), float(eps))
    return report


def check_max_principle(
    u: HarmonicExtension,
    beta: ConeAngleSpec,
    samples=None,
    n_samples: int = 400,
    seed: int = 0,
    tol: float = 1e-8,
) -> MaxPrincipleReport:
    """Check every sampled value lies within the boundary-data range."""
    if samples is None:
        rng = np.random.default_rng(seed)
        z = np.exp(rng.uniform(np.log(1e-3), np.log(50.0), n_samples))
        x = rng.uniform(-20.0, 20.0, (n_samples, 2))
        samples = np.column_stack([z, x])
    else:
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
    lo, hi = beta.beta_inv_range()
    vals = u.value_many(samples)
    bad = np.nonzero((vals < lo - tol) | (vals > hi + tol))[0]
    return MaxPrincipleReport(
        passed=len(bad) == 0,
        n_samples=samples.shape[0],
        observed_min=float(vals.min()),
        observed_max=float(vals.max()),
        bound_min=lo,
        bound_max=hi,
        violations=[{"point": samples[i].tolist(), "value": float(vals[i])} for i in bad[:20]],
    )
