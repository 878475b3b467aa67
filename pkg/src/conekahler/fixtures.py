"""Closed-form test metrics for calibrating the curvature pipeline.

Each fixture returns metric components (M, 10) in the documented order on
(z, x2, x3) points, together with the known constant scalar curvature.
"""

from __future__ import annotations

import numpy as np

__all__ = ["flat_chart", "sphere_slice", "hyperbolic_slice", "FIXTURES"]


def flat_chart(pts) -> np.ndarray:
    """Euclidean 4-space in the circle chart: z^2 dtheta^2 + dz^2 + plane; s = 0."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    out = np.zeros((pts.shape[0], 10))
    out[:, 0] = pts[:, 0] ** 2
    out[:, 4] = 1.0
    out[:, 7] = 1.0
    out[:, 9] = 1.0
    return out


def sphere_slice(pts, radius: float = 1.0) -> np.ndarray:
    """Round 2-sphere of the given radius times a flat plane; s = 2/radius^2.

    (x2, x3) play colatitude/longitude on the sphere factor, (theta, z) are
    the flat directions; keep x2 away from the poles.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    out = np.zeros((pts.shape[0], 10))
    out[:, 0] = 1.0
    out[:, 4] = 1.0
    out[:, 7] = radius**2
    out[:, 9] = radius**2 * np.sin(pts[:, 1]) ** 2
    return out


def hyperbolic_slice(pts, radius: float = 1.0) -> np.ndarray:
    """Hyperbolic plane of curvature -1/radius^2 times a flat plane; s = -2/radius^2."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    out = np.zeros((pts.shape[0], 10))
    out[:, 0] = 1.0
    out[:, 4] = 1.0
    out[:, 7] = radius**2
    out[:, 9] = radius**2 * np.sinh(pts[:, 1]) ** 2
    return out


#: name -> (metric_many, exact scalar curvature, recommended box)
FIXTURES = {
    "flat": (flat_chart, 0.0, ((0.6, 1.4), (-0.4, 0.4), (-0.4, 0.4))),
    "sphere": (lambda p: sphere_slice(p, 1.0), 2.0, ((0.6, 1.4), (0.6, 1.2), (-0.3, 0.3))),
    "hyperbolic": (lambda p: hyperbolic_slice(p, 1.0), -2.0, ((0.6, 1.4), (0.6, 1.2), (-0.3, 0.3))),
}
