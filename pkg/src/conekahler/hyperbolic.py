"""Hyperbolic 3-space: models, conversions, distance, Laplacian, Hodge star.

Everything is phrased in upper-half-space coordinates (z, x2, x3) with z > 0,
metric (dz^2 + dx2^2 + dx3^2)/z^2. The sphere at infinity is represented
either as a tagged boundary point (finite plane point or the point at
infinity) or as a unit vector in the ball model.

Conventions fixed here and used everywhere else:

* The Laplacian is the geometer's positive operator
  ``lap f = -z^2 (f_zz + f_22 + f_33) + z f_z``; harmonic means ``lap f = 0``
  (constants and z^2 are harmonic).
* 1-forms carry components in the basis (dz, dx2, dx3); 2-forms in the basis
  (dx2^dx3, dx3^dz, dz^dx2), in that order.
* Orientation: dz^dx2^dx3 is positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "HPoint",
    "BallPoint",
    "BoundaryPoint",
    "Field",
    "OneForm3",
    "TwoForm3",
    "EvaluationError",
    "half_to_ball",
    "half_to_ball_isometric",
    "ball_jacobian_isometric",
    "boundary_to_sphere",
    "sphere_to_boundary",
    "hyp_distance",
    "fd_step",
    "laplacian",
    "gradient_fd",
    "hodge_star",
]


class EvaluationError(ValueError):
    """Raised when a field/operator cannot be evaluated at the given point."""


@dataclass(frozen=True)
class HPoint:
    """Point of the upper half-space model: height z > 0, horizontals x2, x3."""

    z: float
    x2: float
    x3: float

    def __post_init__(self):
        if not (self.z > 0 and math.isfinite(self.z) and math.isfinite(self.x2) and math.isfinite(self.x3)):
            raise ValueError(f"invalid half-space point (z={self.z}, x2={self.x2}, x3={self.x3}); need finite, z > 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.z, self.x2, self.x3])

    @staticmethod
    def from_array(a) -> "HPoint":
        return HPoint(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class BallPoint:
    """Point of the ball model, |y| < 1."""

    y1: float
    y2: float
    y3: float

    def __post_init__(self):
        if not self.y1**2 + self.y2**2 + self.y3**2 < 1.0:
            raise ValueError("ball point must satisfy |y| < 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.y1, self.y2, self.y3])


@dataclass(frozen=True)
class BoundaryPoint:
    """Point of the sphere at infinity: a plane point (x2, x3) or infinity."""

    x2: float = 0.0
    x3: float = 0.0
    at_infinity: bool = False

    @staticmethod
    def finite(x2: float, x3: float) -> "BoundaryPoint":
        return BoundaryPoint(float(x2), float(x3), False)

    @staticmethod
    def infinity() -> "BoundaryPoint":
        return BoundaryPoint(0.0, 0.0, True)


@dataclass(frozen=True)
class OneForm3:
    """1-form at a point, components in the (dz, dx2, dx3) basis."""

    comps: tuple

    def as_array(self) -> np.ndarray:
        return np.asarray(self.comps, dtype=float)


@dataclass(frozen=True)
class TwoForm3:
    """2-form at a point, components in the (dx2^dx3, dx3^dz, dz^dx2) basis."""

    comps: tuple

    def as_array(self) -> np.ndarray:
        return np.asarray(self.comps, dtype=float)


# ---------------------------------------------------------------------------
# model conversions


def half_to_ball(p: HPoint) -> BallPoint:
    """Disk-model coordinates of a half-space point.

    This is the coordinate change used by the connection decay estimate:
    y1 = (x2^2 + x3^2 - 1)/D, y2 = 2 x2/D, y3 = 2 x3/D with
    D = (z+1)^2 + x2^2 + x3^2. It maps the interior into the open ball and
    the boundary plane z = 0 onto the unit sphere, but it is only
    bi-Lipschitz, not a hyperbolic isometry (see half_to_ball_isometric).
    """
    d = (p.z + 1.0) ** 2 + p.x2**2 + p.x3**2
    return BallPoint((p.x2**2 + p.x3**2 - 1.0) / d, 2.0 * p.x2 / d, 2.0 * p.x3 / d)


def half_to_ball_isometric(p) -> np.ndarray:
    """Exact isometry of the half-space model onto the Poincare ball.

    Accepts an HPoint or an (..., 3) array of (z, x2, x3) rows; returns ball
    coordinates of the same shape. Restricted to z = 0 it agrees with
    boundary_to_sphere. Used by the Dirichlet solver, where harmonicity must
    be preserved by the model change.
    """
    a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
    z, x2, x3 = a[..., 0], a[..., 1], a[..., 2]
    d = (z + 1.0) ** 2 + x2**2 + x3**2
    return np.stack([(x2**2 + x3**2 + z**2 - 1.0) / d, 2.0 * x2 / d, 2.0 * x3 / d], axis=-1)


def ball_jacobian_isometric(p) -> np.ndarray:
    """Jacobian d(y)/d(z, x2, x3) of half_to_ball_isometric, shape (..., 3, 3)."""
    a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
    z, x2, x3 = a[..., 0], a[..., 1], a[..., 2]
    d = (z + 1.0) ** 2 + x2**2 + x3**2
    n1 = x2**2 + x3**2 + z**2 - 1.0
    dd = np.stack([2.0 * (z + 1.0), 2.0 * x2, 2.0 * x3], axis=-1)
    jac = np.empty(a.shape[:-1] + (3, 3))
    dn1 = np.stack([2.0 * z, 2.0 * x2, 2.0 * x3], axis=-1)
    jac[..., 0, :] = (dn1 * d[..., None] - n1[..., None] * dd) / (d**2)[..., None]
    for i, xi in ((1, x2), (2, x3)):
        dn = np.zeros(a.shape[:-1] + (3,))
        dn[..., i] = 2.0
        jac[..., i, :] = (dn * d[..., None] - 2.0 * xi[..., None] * dd) / (d**2)[..., None]
    return jac


def boundary_to_sphere(b: BoundaryPoint) -> np.ndarray:
    """Unit sphere-model vector of a boundary point; infinity maps to (1, 0, 0)."""
    if b.at_infinity:
        return np.array([1.0, 0.0, 0.0])
    r2 = b.x2**2 + b.x3**2
    return np.array([(r2 - 1.0) / (1.0 + r2), 2.0 * b.x2 / (1.0 + r2), 2.0 * b.x3 / (1.0 + r2)])


def sphere_to_boundary(xi) -> BoundaryPoint:
    """Inverse of boundary_to_sphere; the pole (1, 0, 0) maps to infinity."""
    xi = np.asarray(xi, dtype=float)
    if 1.0 - xi[0] < 1e-14:
        return BoundaryPoint.infinity()
    return BoundaryPoint.finite(xi[1] / (1.0 - xi[0]), xi[2] / (1.0 - xi[0]))


def sphere_to_plane(xi) -> np.ndarray:
    """Vectorized sphere -> plane chart, (..., 3) -> (..., 2); near-pole rows overflow-safe.

    Rows with xi1 ~ 1 (the infinity pole) come out with huge coordinates;
    callers that need the exact infinity tag should use sphere_to_boundary.
    """
    xi = np.asarray(xi, dtype=float)
    denom = np.maximum(1.0 - xi[..., 0], 1e-300)
    return np.stack([xi[..., 1] / denom, xi[..., 2] / denom], axis=-1)


# ---------------------------------------------------------------------------
# distance


def hyp_distance(p: HPoint, q: HPoint) -> float:
    """Hyperbolic distance, cosh d = 1 + (|dx|^2 + dz^2)/(2 z z')."""
    s = (p.x2 - q.x2) ** 2 + (p.x3 - q.x3) ** 2 + (p.z - q.z) ** 2
    c = 1.0 + s / (2.0 * p.z * q.z)
    return float(np.arccosh(c))


# ---------------------------------------------------------------------------
# differential operators


def fd_step(z: float, scale: float = 1.0) -> float:
    """Finite-difference step at height z: max(1e-5, 1e-3 z), scaled.

    Raises EvaluationError when the step would reach the divisor z = 0.
    """
    step = scale * max(1e-5, 1e-3 * z)
    if step >= z:
        raise EvaluationError(f"finite-difference step {step:g} crosses z = 0 at z = {z:g}")
    return step


def _value_fn(f):
    return f.value if hasattr(f, "value") else f


class Field:
    """Scalar field on the half-space with optional exact derivatives.

    Wraps a point function (z, x2, x3) -> real; gradient/hessian fall back to
    central differences with the fd_step policy when no exact form is given.
    Exact forms, when supplied, must take and return plain arrays.
    """

    def __init__(self, fn, grad=None, hess=None, name: str = ""):
        self._fn = fn
        self._grad = grad
        self._hess = hess
        self.name = name

    def value(self, p) -> float:
        a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
        return float(self._fn(a))

    def gradient(self, p) -> np.ndarray:
        a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
        if self._grad is not None:
            return np.asarray(self._grad(a), dtype=float)
        return gradient_fd(self._fn, a)

    def hessian(self, p) -> np.ndarray:
        a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
        if self._hess is not None:
            return np.asarray(self._hess(a), dtype=float)
        return hessian_fd(self._fn, a)

    @property
    def has_exact_gradient(self) -> bool:
        return self._grad is not None

    @property
    def has_exact_hessian(self) -> bool:
        return self._hess is not None


def gradient_fd(fn, a, step: float | None = None) -> np.ndarray:
    """Central-difference gradient of a point function at a = (z, x2, x3)."""
    h = fd_step(a[0]) if step is None else step
    g = np.empty(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        g[i] = (fn(a + e) - fn(a - e)) / (2.0 * h)
    return g


def hessian_fd(fn, a, step: float | None = None) -> np.ndarray:
    """Central-difference Hessian (pure seconds + cross stencil)."""
    h = fd_step(a[0]) if step is None else step
    hess = np.empty((3, 3))
    f0 = fn(a)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        hess[i, i] = (fn(a + e) - 2.0 * f0 + fn(a - e)) / h**2
    for i in range(3):
        for j in range(i + 1, 3):
            ei = np.zeros(3)
            ej = np.zeros(3)
            ei[i] = h
            ej[j] = h
            hess[i, j] = hess[j, i] = (
                fn(a + ei + ej) - fn(a + ei - ej) - fn(a - ei + ej) + fn(a - ei - ej)
            ) / (4.0 * h**2)
    return hess


def laplacian(f, p, step: float | None = None) -> float:
    """Hyperbolic Laplacian -z^2 (f_zz + f_22 + f_33) + z f_z at p.

    Uses exact gradient/Hessian when the field supplies both, otherwise
    central differences of the values with the fd_step policy (so the result
    is the true operator up to O(step^2)).
    """
    a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
    z = a[0]
    if hasattr(f, "has_exact_hessian") and f.has_exact_hessian and f.has_exact_gradient:
        hess = f.hessian(a)
        grad = f.gradient(a)
        return float(-(z**2) * np.trace(hess) + z * grad[0])
    fn = _value_fn(f)
    h = fd_step(z) if step is None else step
    if h >= z:
        raise EvaluationError(f"laplacian step {h:g} crosses z = 0 at z = {z:g}")
    f0 = fn(a)
    second = 0.0
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        second += (fn(a + e) - 2.0 * f0 + fn(a - e)) / h**2
    ez = np.array([h, 0.0, 0.0])
    fz = (fn(a + ez) - fn(a - ez)) / (2.0 * h)
    return float(-(z**2) * second + z * fz)


# ---------------------------------------------------------------------------
# Hodge star


def hodge_star(form, p) -> "OneForm3 | TwoForm3":
    """Hodge star of the hyperbolic metric at p.

    On 1-forms: *(a dz + b dx2 + c dx3) = (a dx2^dx3 + b dx3^dz + c dz^dx2)/z.
    On 2-forms the inverse scaling applies, so star twice is the identity.
    """
    z = p.z if isinstance(p, HPoint) else float(np.asarray(p)[0])
    if isinstance(form, OneForm3):
        return TwoForm3(tuple(v / z for v in form.as_array()))
    if isinstance(form, TwoForm3):
        return OneForm3(tuple(v * z for v in form.as_array()))
    raise TypeError(f"hodge_star expects OneForm3 or TwoForm3, got {type(form).__name__}")


def star_gradient(grad, z):
    """Array form of *(df) used on hot paths: (..., 3) gradient -> (..., 3) 2-form comps."""
    return np.asarray(grad) / np.asarray(z)[..., None]
