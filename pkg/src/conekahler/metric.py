"""Assembly of the circle-invariant metric, its Kahler form, and the models.

Chart convention: global coordinates (theta, z, x2, x3) with theta of period
2 pi, in that index order everywhere. The circle-bundle twist lives in the
potential 1-form A (local trivialization away from the strings); eta means
d theta + A. With V the harmonic potential, the metric and 2-form are

    g = z^2 (V^{-1} eta^2 + V h) ,
    omega = z dz ^ eta + V dx2 ^ dx3 ,

which in the chart give g_tt = z^2/V, g_ti = z^2 A_i / V,
g_ij = z^2 A_i A_j / V + V delta_ij, and omega components
omega_{z,theta} = z, omega_{z,i} = z A_i, omega_{23} = V.

All public interfaces use z; the coordinate x1 = z^2/2 appears only in the
ansatz-level scalar-curvature and compatibility displays.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .hyperbolic import Field, HPoint, laplacian

__all__ = [
    "COMPONENT_ORDER",
    "metric_components_many",
    "assemble_metric",
    "omega_components_many",
    "assemble_kahler_form",
    "components_to_matrix",
    "omega_to_matrix",
    "model_metric",
    "model_metric_conformal",
    "model_form_conformal",
    "model_form_warped",
    "scalar_curvature_ansatz",
    "compatibility_residual",
    "coframe_residual",
    "conformal_remainder",
    "RemainderReport",
    "lebrun_height_field",
    "MetricGrid",
]

#: dump order of the 10 independent metric components
COMPONENT_ORDER = (
    "g_tt", "g_tz", "g_t2", "g_t3", "g_zz", "g_z2", "g_z3", "g_22", "g_23", "g_33",
)

#: antisymmetric 2-form components stored in this order
OMEGA_ORDER = ("w_tz", "w_t2", "w_t3", "w_z2", "w_z3", "w_23")


def _eval_va(V, A, pts):
    """Values of the potential and the 1-form at points (M, 3); constants allowed."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if np.isscalar(V) or isinstance(V, float):
        v = np.full(pts.shape[0], float(V))
    else:
        v = V.value_many(pts)
    if A is None:
        a = np.zeros_like(pts)
    else:
        a = A.one_form_many(pts)
    return pts, v, a


def metric_components_from_values(pts, v, a) -> np.ndarray:
    """Metric components (M, 10) from precomputed potential/1-form values."""
    z2v = pts[:, 0] ** 2 / v
    out = np.empty((pts.shape[0], 10))
    out[:, 0] = z2v
    out[:, 1] = z2v * a[:, 0]
    out[:, 2] = z2v * a[:, 1]
    out[:, 3] = z2v * a[:, 2]
    out[:, 4] = z2v * a[:, 0] ** 2 + v
    out[:, 5] = z2v * a[:, 0] * a[:, 1]
    out[:, 6] = z2v * a[:, 0] * a[:, 2]
    out[:, 7] = z2v * a[:, 1] ** 2 + v
    out[:, 8] = z2v * a[:, 1] * a[:, 2]
    out[:, 9] = z2v * a[:, 2] ** 2 + v
    return out


def metric_components_many(V, A, pts) -> np.ndarray:
    """Metric components (M, 10) in COMPONENT_ORDER at half-space points (M, 3)."""
    pts, v, a = _eval_va(V, A, pts)
    return metric_components_from_values(pts, v, a)


def components_to_matrix(comps) -> np.ndarray:
    """(..., 10) components -> (..., 4, 4) symmetric matrices."""
    comps = np.asarray(comps, dtype=float)
    m = np.empty(comps.shape[:-1] + (4, 4))
    idx = [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)]
    for k, (i, j) in enumerate(idx):
        m[..., i, j] = comps[..., k]
        m[..., j, i] = comps[..., k]
    return m


def assemble_metric(V, A, p) -> np.ndarray:
    """4x4 metric matrix at a half-space point; raises if not positive definite."""
    a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
    g = components_to_matrix(metric_components_many(V, A, a[None, :]))[0]
    eig = np.linalg.eigvalsh(g)
    if eig[0] <= 0:
        raise ArithmeticError(f"assembled metric not positive definite at {a} (eigenvalues {eig})")
    return g


def omega_components_from_values(pts, v, a) -> np.ndarray:
    """Kahler-form components (M, 6) from precomputed potential/1-form values."""
    out = np.zeros((pts.shape[0], 6))
    out[:, 0] = -pts[:, 0]          # omega(d_theta, d_z) = -z
    out[:, 3] = pts[:, 0] * a[:, 1]  # omega(d_z, d_x2) = z A_2
    out[:, 4] = pts[:, 0] * a[:, 2]
    out[:, 5] = v
    return out


def omega_components_many(V, A, pts) -> np.ndarray:
    """Kahler-form components (M, 6) in OMEGA_ORDER; w_tz = -z and w_{z,i} = z A_i."""
    pts, v, a = _eval_va(V, A, pts)
    return omega_components_from_values(pts, v, a)


def omega_to_matrix(comps) -> np.ndarray:
    """(..., 6) components -> (..., 4, 4) antisymmetric matrices."""
    comps = np.asarray(comps, dtype=float)
    m = np.zeros(comps.shape[:-1] + (4, 4))
    idx = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    for k, (i, j) in enumerate(idx):
        m[..., i, j] = comps[..., k]
        m[..., j, i] = -comps[..., k]
    return m


def assemble_kahler_form(V, A, p) -> np.ndarray:
    """4x4 antisymmetric Kahler-form matrix at a half-space point."""
    a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
    return omega_to_matrix(omega_components_many(V, A, a[None, :]))[0]


# ---------------------------------------------------------------------------
# model metrics


def _beta_at(beta, pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if np.isscalar(beta) or isinstance(beta, float):
        return np.full(pts.shape[0], float(beta))
    return np.asarray(beta.beta_plane(pts[:, 1], pts[:, 2]), dtype=float)


def model_metric(beta, p) -> np.ndarray:
    """Warped-product model dz^2 + beta^2 z^2 dtheta^2 + flat plane, as a 4x4."""
    a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
    b = _beta_at(beta, a[None, :])[0]
    return np.diag([b**2 * a[0] ** 2, 1.0, 1.0, 1.0])


def model_metric_conformal(beta, p) -> np.ndarray:
    """The conformally rescaled model (warped product divided by the angle);
    this one is Kahler, the plain warped product is not."""
    a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
    b = _beta_at(beta, a[None, :])[0]
    return np.diag([b * a[0] ** 2, 1.0 / b, 1.0 / b, 1.0 / b])


def model_form_conformal(beta, pts) -> np.ndarray:
    """2-form of the rescaled model: z dz^dtheta + beta dx2^dx3; closed for any angle."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    b = _beta_at(beta, pts)
    out = np.zeros((pts.shape[0], 6))
    out[:, 0] = -pts[:, 0]
    out[:, 5] = b
    return out


def model_form_warped(beta, pts) -> np.ndarray:
    """2-form paired with the plain warped product: beta z dz^dtheta + dx2^dx3.

    Its exterior derivative carries exactly the z d(beta) terms, which is the
    quantitative form of 'the warped product itself is not Kahler'.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    b = _beta_at(beta, pts)
    out = np.zeros((pts.shape[0], 6))
    out[:, 0] = -pts[:, 0] * b
    out[:, 5] = 1.0
    return out


# ---------------------------------------------------------------------------
# ansatz-level displays (x1 coordinates)


def lebrun_height_field() -> Field:
    """The ansatz height field log(2 x1) on (x1, x2, x3), with exact derivatives."""
    return Field(
        lambda a: np.log(2.0 * a[0]),
        grad=lambda a: np.array([1.0 / a[0], 0.0, 0.0]),
        hess=lambda a: np.diag([-1.0 / a[0] ** 2, 0.0, 0.0]),
        name="log(2 x1)",
    )


def scalar_curvature_ansatz(v_field: Field, w_field, p, step: float = 1e-4) -> float:
    """Ansatz scalar curvature -(d^2_{x1} e^v + d^2_{x2} v + d^2_{x3} v)/(W e^v).

    p is an (x1, x2, x3) point with x1 > 0. Fields with exact derivatives are
    differentiated exactly (the ansatz height gives an identically zero
    numerator); otherwise second derivatives come from central differences.
    Raises when the conformal factor W e^v is not positive.
    """
    a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
    if a[0] <= 0:
        raise ValueError("ansatz coordinates need x1 > 0")
    w = w_field.value(a) if hasattr(w_field, "value") else float(w_field(a))
    if v_field.has_exact_hessian and v_field.has_exact_gradient:
        grad = v_field.gradient(a)
        hess = v_field.hessian(a)
        ev = np.exp(v_field.value(a))
        d2_ev = ev * (grad[0] ** 2 + hess[0, 0])
        numerator = d2_ev + hess[1, 1] + hess[2, 2]
    else:
        fn = v_field.value
        e1 = np.array([step, 0.0, 0.0])
        d2_ev = (np.exp(fn(a + e1)) - 2.0 * np.exp(fn(a)) + np.exp(fn(a - e1))) / step**2
        numerator = d2_ev
        for i in (1, 2):
            e = np.zeros(3)
            e[i] = step
            numerator += (fn(a + e) - 2.0 * fn(a) + fn(a - e)) / step**2
    denom = w * np.exp(v_field.value(a))
    if denom <= 0:
        raise ArithmeticError(f"conformal factor W e^v = {denom:g} is not positive at {a}")
    return float(-numerator / denom)


def compatibility_residual(V, p, step: float | None = None) -> float:
    """Defect of the curvature-compatibility equation: the hyperbolic Laplacian of V."""
    return laplacian(V, p, step=step)


# ---------------------------------------------------------------------------
# coframe and cone-model comparison


def coframe_residual(V, A, p) -> float:
    """Max componentwise defect of V^{-1} omega = (i/2)(a1^conj(a1) + a2^conj(a2)).

    a1 = dx2 + i dx3 and a2 = dz + i z V^{-1} eta in chart components; the
    identity is algebraic and must hold to roundoff.
    """
    a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
    pts, v, av = _eval_va(V, A, a[None, :])
    v0, a0 = v[0], av[0]
    z = pts[0, 0]
    alpha1 = np.array([0.0, 0.0, 1.0, 1j])
    eta = np.array([1.0, a0[0], a0[1], a0[2]])
    alpha2 = np.array([0.0, 1.0, 0.0, 0.0]) + 1j * z / v0 * eta
    target = omega_to_matrix(omega_components_many(V, A, a[None, :]))[0] / v0
    built = np.zeros((4, 4))
    for al in (alpha1, alpha2):
        built += np.imag(np.conj(al)[:, None] * al[None, :])
    return float(np.abs(built - target).max())


@dataclass
class RemainderReport:
    """Cone-collar comparison of the rescaled metric against the warped model.

    relative_gap is the operator norm of (model^{-1} (V^{-1} g) - I); its
    ratio to z is the bounded quantity behind the cone-angle form.
    mu_coeff_max is the largest coordinate component of (V^{-1} g - model)/z^3
    (bounded); mu_opnorm is the same tensor measured against the model, which
    grows like 1/z^2 because of the collapsing circle direction.
    """

    z: float
    relative_gap: float
    relative_gap_over_z: float
    mu_coeff_max: float
    mu_opnorm: float


def conformal_remainder(V, A, beta, p) -> RemainderReport:
    """Measure (V^{-1} g - (beta^2 z^2 eta^2 + dz^2 + plane))/z^3 near the divisor."""
    a = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
    z = a[0]
    pts, v, av = _eval_va(V, A, a[None, :])
    v0, a0 = v[0], av[0]
    g = components_to_matrix(metric_components_many(V, A, a[None, :]))[0]
    b = _beta_at(beta, a[None, :])[0]
    eta = np.array([1.0, a0[0], a0[1], a0[2]])
    m0 = b**2 * z**2 * np.outer(eta, eta) + np.diag([0.0, 1.0, 1.0, 1.0])
    gb = np.diag([b**2 * z**2, 1.0, 1.0, 1.0])
    diff = g / v0 - m0
    mu = diff / z**3
    gb_inv = np.diag(1.0 / np.diag(gb))
    relative = np.linalg.eigvals(gb_inv @ (g / v0) - np.eye(4))
    mu_eigs = np.linalg.eigvals(gb_inv @ mu)
    gap = float(np.abs(relative).max())
    return RemainderReport(
        z=float(z),
        relative_gap=gap,
        relative_gap_over_z=gap / z,
        mu_coeff_max=float(np.abs(mu).max()),
        mu_opnorm=float(np.abs(mu_eigs).max()),
    )


# ---------------------------------------------------------------------------
# sampled grids


@dataclass
class MetricGrid:
    """Metric (and optionally 2-form) components sampled on a uniform box grid.

    origin/spacing/shape describe the (z, x2, x3) lattice; comps has shape
    (*shape, 10) in COMPONENT_ORDER. The chart never introduces
    theta-dependence, so one 3-d grid describes the 4-d field.
    """

    origin: np.ndarray
    spacing: float
    shape: tuple
    comps: np.ndarray
    theta_invariant: bool = True

    @classmethod
    def sample(cls, V, A, box, h: float, margin: int = 0) -> "MetricGrid":
        axes = []
        for lo, hi in box:
            n = int(round((hi - lo) / h)) + 1
            axes.append(lo + h * np.arange(-margin, n + margin))
        zz, x2, x3 = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([zz.ravel(), x2.ravel(), x3.ravel()], axis=-1)
        if pts[:, 0].min() <= 0:
            raise ValueError("grid (with margin) reaches z <= 0; shrink the box or margin")
        comps = metric_components_many(V, A, pts)
        shape = tuple(len(ax) for ax in axes)
        return cls(
            origin=np.array([ax[0] for ax in axes]),
            spacing=float(h),
            shape=shape,
            comps=comps.reshape(shape + (10,)),
        )

    def axes(self):
        return [self.origin[i] + self.spacing * np.arange(self.shape[i]) for i in range(3)]

    def to_csv(self) -> str:
        """CSV dump: header lines record bounds, shape, and component order."""
        buf = io.StringIO()
        ends = self.origin + self.spacing * (np.asarray(self.shape) - 1)
        buf.write(f"# chart: theta z x2 x3 (theta-invariant: {self.theta_invariant})\n")
        buf.write(f"# bounds: z [{self.origin[0]:.17g}, {ends[0]:.17g}]"
                  f" x2 [{self.origin[1]:.17g}, {ends[1]:.17g}]"
                  f" x3 [{self.origin[2]:.17g}, {ends[2]:.17g}]\n")
        buf.write(f"# shape: {self.shape[0]} {self.shape[1]} {self.shape[2]}; spacing: {self.spacing:.17g}\n")
        buf.write("z,x2,x3," + ",".join(COMPONENT_ORDER) + "\n")
        axes = self.axes()
        flat = self.comps.reshape(-1, 10)
        k = 0
        for z in axes[0]:
            for a2 in axes[1]:
                for a3 in axes[2]:
                    row = ",".join(f"{val:.17g}" for val in flat[k])
                    buf.write(f"{z:.17g},{a2:.17g},{a3:.17g},{row}\n")
                    k += 1
        return buf.getvalue()

    def save_npz(self, path) -> None:
        np.savez_compressed(
            path,
            origin=self.origin,
            spacing=self.spacing,
            shape=np.asarray(self.shape),
            comps=self.comps,
        )

    @classmethod
    def load_npz(cls, path) -> "MetricGrid":
        data = np.load(path)
        return cls(
            origin=data["origin"],
            spacing=float(data["spacing"]),
            shape=tuple(int(n) for n in data["shape"]),
            comps=data["comps"],
        )
