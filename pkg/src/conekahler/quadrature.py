"""Quadrature rules: Lebedev sphere grids, Gauss-Legendre, dyadic panel rules.

The Lebedev grids come from scipy (weights summing to 4 pi). The panel
machinery builds the localized subdivision rule used near the boundary
sphere, where the Poisson kernel concentrates on a cap of angular scale
1 - |y|.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import lebedev_rule

#: available Lebedev precision degrees (scipy supports the standard ladder)
LEBEDEV_DEGREES = (
    3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25, 27, 29, 31, 35, 41, 47,
    53, 59, 65, 71, 77, 83, 89, 95, 101, 107, 113, 119, 125, 131,
)


@lru_cache(maxsize=None)
def lebedev(degree: int):
    """Nodes (N, 3) and weights (N,), weights summing to 4 pi."""
    if degree not in LEBEDEV_DEGREES:
        raise ValueError(f"no Lebedev rule of degree {degree}; choose from {LEBEDEV_DEGREES}")
    x, w = lebedev_rule(degree)
    return np.ascontiguousarray(x.T), np.ascontiguousarray(w)


@lru_cache(maxsize=None)
def gauss_legendre_01(n: int):
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_legendre(n: int, a: float, b: float):
    x, w = gauss_legendre_01(n)
    return a + (b - a) * x, (b - a) * w


def sphere_frame(e: np.ndarray):
    """Two unit vectors completing e to an orthonormal frame."""
    a = np.array([1.0, 0.0, 0.0]) if abs(e[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = np.cross(e, a)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(e, t1)


def dyadic_breakpoints(delta: float, upper: float = np.pi) -> np.ndarray:
    """Colatitude panel edges [0, delta, 2 delta, ...] doubling up to `upper`."""
    delta = max(delta, 1e-14)
    bps = [0.0]
    t = delta
    while t < upper:
        bps.append(t)
        t *= 2.0
    bps.append(upper)
    return np.asarray(bps)


def cap_quadrature(rho: float, e: np.ndarray, n_gl: int, n_phi: int):
    """Sphere rule adapted to the Poisson kernel peaked at e with |y| = rho.

    Dyadic colatitude panels (panel width doubling away from the peak, first
    edge at 1 - rho) with Gauss-Legendre nodes per panel, times a uniform
    azimuthal rule. Returns (points (N, 3), weights (N,)) where the weights
    already include the kernel factor ((1-rho^2)/(1+rho^2-2 rho cos t))^2
    and the area element for the normalized mean: sum(w) ~ 4 pi after kernel
    weighting. Consumers should self-normalize by sum(w).
    """
    t1, t2 = sphere_frame(e)
    bps = dyadic_breakpoints(1.0 - rho)
    xg, wg = gauss_legendre_01(n_gl)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    cphi, sphi = np.cos(phi), np.sin(phi)
    pts = []
    wts = []
    one_m_rho2 = 1.0 - rho * rho
    for lo, hi in zip(bps[:-1], bps[1:]):
        t = lo + (hi - lo) * xg
        wt = (hi - lo) * wg
        s, st = np.cos(t), np.sin(t)
        kern = (one_m_rho2 / (1.0 + rho * rho - 2.0 * rho * s)) ** 2
        xi = (
            s[:, None, None] * e
            + st[:, None, None] * (cphi[None, :, None] * t1 + sphi[None, :, None] * t2)
        )
        w_panel = (wt * st * kern)[:, None] * (2.0 * np.pi / n_phi)
        pts.append(xi.reshape(-1, 3))
        wts.append(np.broadcast_to(w_panel, (len(t), n_phi)).reshape(-1))
    return np.concatenate(pts), np.concatenate(wts)
