"""Pure-NumPy implementations of the hot evaluation kernels.

Same signatures as the compiled extension in ``_kernels.pyx``; chunked so
intermediate arrays stay small. Selected automatically when the extension
is unavailable (or when CONEKAHLER_PURE_PYTHON=1).
"""

import numpy as np

_CHUNK = 512


def poisson_sum(nodes, weights, fvals, ys, need_grad):
    """Normalized Poisson-kernel sums over a fixed sphere rule.

    nodes : (N, 3) unit vectors, weights : (N,), fvals : (N,) boundary data
    at the nodes, ys : (M, 3) interior ball points.

    Returns (u, grad) where u[m] = sum_i w_i P(y_m, n_i) f_i / sum_i w_i P(y_m, n_i)
    with P(y, n) = ((1 - |y|^2) / |y - n|^2)^2, and grad is du/dy (M, 3)
    (None unless need_grad).
    """
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    m = ys.shape[0]
    u = np.empty(m)
    grad = np.empty((m, 3)) if need_grad else None
    for lo in range(0, m, _CHUNK):
        hi = min(lo + _CHUNK, m)
        y = ys[lo:hi]                                   # (c,3)
        one_m_y2 = 1.0 - np.einsum("ij,ij->i", y, y)    # (c,)
        diff = y[:, None, :] - nodes[None, :, :]        # (c,N,3)
        d2 = np.einsum("cnj,cnj->cn", diff, diff)       # (c,N)
        p = (one_m_y2[:, None] / d2) ** 2               # kernel
        wp = weights[None, :] * p
        s0 = wp.sum(axis=1)
        s1 = wp @ fvals
        u[lo:hi] = s1 / s0
        if need_grad:
            # dP/dy = P * (-4 y / (1-|y|^2) - 4 (y-n)/|y-n|^2)
            base = -4.0 * y / one_m_y2[:, None]         # (c,3)
            dp = wp[:, :, None] * (base[:, None, :] - 4.0 * diff / d2[:, :, None])
            g0 = dp.sum(axis=1)                         # (c,3)
            g1 = np.einsum("cnj,n->cj", dp, fvals)
            grad[lo:hi] = (g1 - u[lo:hi, None] * g0) / s0[:, None]
    return u, grad


def green_sum(charges, kappa, pts, need_grad):
    """Sum of hyperbolic Green terms kappa*(coth d - 1)/(4 pi) over charges.

    charges : (K, 3) half-space points (z, x2, x3), pts : (M, 3).
    Returns (values, gradients) with gradients (M, 3) wrt pts (None unless
    need_grad). Caller is responsible for keeping pts away from the poles.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    vals = np.zeros(pts.shape[0])
    grads = np.zeros((pts.shape[0], 3)) if need_grad else None
    z = pts[:, 0]
    scale = kappa / (4.0 * np.pi)
    for q in np.atleast_2d(charges):
        dz = z - q[0]
        d2 = pts[:, 1] - q[1]
        d3 = pts[:, 2] - q[2]
        s = dz * dz + d2 * d2 + d3 * d3
        c = 1.0 + s / (2.0 * z * q[0])
        rt = np.sqrt(c * c - 1.0)
        vals += scale * (c / rt - 1.0)
        if need_grad:
            # dG/dc = -1/(c^2-1)^{3/2}
            dgdc = -scale / rt**3
            inv = 1.0 / (z * q[0])
            gz = dz * inv - (c - 1.0) / z
            grads[:, 0] += dgdc * gz
            grads[:, 1] += dgdc * d2 * inv
            grads[:, 2] += dgdc * d3 * inv
    return vals, grads
