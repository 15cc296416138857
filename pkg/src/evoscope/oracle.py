"""Brute-force reference values that bypass the propagation caches.

Each quantity is recomputed on a finer node set straight from the family
(its potential, a fresh RK4 march, or pointwise ``evaluate`` calls), so the
cached fast paths can be checked against something independent.
"""

from __future__ import annotations

import numpy as np

from .family import MatrixODE, Rescaled, rk4_step_matrix
from .grid import vector_norm


def _unwrap(family):
    shift = 0.0
    while isinstance(family, Rescaled):
        shift += family.shift
        family = family.inner
    return family, shift


def forward_values(family, s, x, taus) -> np.ndarray:
    """``U(tau, s) x`` for ascending ``taus >= s``."""
    base, lam = _unwrap(family)
    taus = np.asarray(taus, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    damp = np.exp(-lam * (taus - s))[:, None]
    if base.has_potential:
        g = np.asarray(base.potential(np.concatenate([[s], taus])), dtype=float)
        return damp * np.exp(g[0] - g[1:])[:, None] * x
    if isinstance(base, MatrixODE):
        out = np.empty((taus.size, x.size))
        y, t = x.copy(), s
        for k, tau in enumerate(taus):
            if tau > t:
                y = rk4_step_matrix(base.A, t, tau - t) @ y
                t = tau
            out[k] = y
        return damp * out
    return damp * np.array([base.evaluate(tau, s) @ x for tau in taus])


def backward_kernel(family, t, xis) -> np.ndarray:
    """``U(t, xi)`` for ascending ``xis <= t``."""
    base, lam = _unwrap(family)
    xis = np.asarray(xis, dtype=float)
    damp = np.exp(-lam * (t - xis))[:, None, None]
    n = base.dim
    if base.has_potential:
        g = np.asarray(base.potential(np.concatenate([[t], xis])), dtype=float)
        return damp * np.exp(g[1:] - g[0])[:, None, None] * np.eye(n)
    if isinstance(base, MatrixODE):
        out = np.empty((xis.size, n, n))
        M, right = np.eye(n), t
        for k in range(xis.size - 1, -1, -1):
            xi = xis[k]
            if xi < right:
                M = M @ rk4_step_matrix(base.A, xi, right - xi)
                right = xi
            out[k] = M
        return damp * out
    return damp * np.array([base.evaluate(t, xi) for xi in xis])


def brute_phi(family, alpha, u, t, T_sup, h) -> float:
    """``sup_{tau in [t, T_sup]} e^{-alpha (tau - t)} ||U(tau, t) u(t)||`` on step ``h``.

    ``u`` is a callable returning the vector ``u(t)``.
    """
    m = max(1, int(round((T_sup - t) / h)))
    taus = t + (T_sup - t) * np.arange(m + 1) / m
    y = forward_values(family, t, u(t), taus)
    return float(np.max(np.exp(-alpha * (taus - t)) * vector_norm(y, axis=1)))


def brute_volterra(family, f, t, h) -> np.ndarray:
    """Trapezoid value of ``int_0^t U(t, xi) f(xi) dxi`` on step ``h``."""
    if t == 0:
        return np.zeros(family.dim)
    m = max(1, int(round(t / h)))
    xis = t * np.arange(m + 1) / m
    K = backward_kernel(family, t, xis)
    fv = np.array([np.atleast_1d(f(xi)) for xi in xis], dtype=float)
    return np.trapezoid(np.einsum("kab,kb->ka", K, fv), xis, axis=0)


def relative_gap(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)
