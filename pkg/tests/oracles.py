"""Reference implementations written as plain loops, independent of the package internals."""

from __future__ import annotations

import itertools
import math

import numpy as np


def pressure(rho, gamma, a):
    return a * rho**gamma


def flux_point(u, p, gamma, a):
    """Physical flux of one stacked state u = [rho, m_1..m_d] in direction p."""
    rho, m = u[0], np.asarray(u[1:], dtype=float)
    f = np.empty(len(u))
    f[0] = m[p]
    for j in range(len(m)):
        f[1 + j] = m[j] * m[p] / rho + (pressure(rho, gamma, a) if j == p else 0.0)
    return f


def lf_face(uk, ul, lam, p, gamma, a):
    return 0.5 * (flux_point(uk, p, gamma, a) + flux_point(ul, p, gamma, a)) - lam * (np.asarray(ul) - np.asarray(uk))


def drift_loop(U, h, lam, gamma, a):
    """Cell rates of the LF scheme by visiting every cell and both faces per axis.

    ``U`` has shape (1 + d, n, ..., n); ``lam`` is one constant for all faces.
    """
    d = U.ndim - 1
    n = U.shape[1]
    out = np.zeros_like(U)
    for idx in itertools.product(range(n), repeat=d):
        uk = U[(slice(None),) + idx]
        acc = np.zeros(d + 1)
        for p in range(d):
            right = list(idx)
            right[p] = (right[p] + 1) % n
            left = list(idx)
            left[p] = (left[p] - 1) % n
            ur = U[(slice(None),) + tuple(right)]
            ul = U[(slice(None),) + tuple(left)]
            acc -= (lf_face(uk, ur, lam, p, gamma, a) - lf_face(ul, uk, lam, p, gamma, a)) / h
        out[(slice(None),) + idx] = acc
    return out


def jacobian_fd(u, p, gamma, a, eps=1e-6):
    """Central finite-difference Jacobian of the flux in direction p."""
    u = np.asarray(u, dtype=float)
    J = np.empty((len(u), len(u)))
    for j in range(len(u)):
        du = np.zeros_like(u)
        du[j] = eps * max(1.0, abs(u[j]))
        J[:, j] = (flux_point(u + du, p, gamma, a) - flux_point(u - du, p, gamma, a)) / (2 * du[j])
    return J


def spectral_radius_fd(u, p, gamma, a):
    return float(np.max(np.abs(np.linalg.eigvals(jacobian_fd(u, p, gamma, a)))))


def entropy_point(u, gamma, a):
    rho, m = u[0], np.asarray(u[1:])
    return 0.5 * float(m @ m) / rho + a * rho**gamma / (gamma - 1)


def entropy_gradient_fd(u, gamma, a, eps=1e-6):
    u = np.asarray(u, dtype=float)
    g = np.empty_like(u)
    for j in range(len(u)):
        du = np.zeros_like(u)
        du[j] = eps * max(1.0, abs(u[j]))
        g[j] = (entropy_point(u + du, gamma, a) - entropy_point(u - du, gamma, a)) / (2 * du[j])
    return g


def cell_average_sin(n, k=1, length=1.0):
    """Exact cell averages of sin(2 pi k x / l) on n uniform cells."""
    h = length / n
    w = 2 * math.pi * k / length
    left = np.arange(n) * h
    return (np.cos(w * left) - np.cos(w * (left + h))) / (w * h)


def relative_energy_point(rho, u, s, Q, gamma, a):
    """Bregman form 1/2 rho |u - Q|^2 + P(rho) - P'(s)(rho - s) - P(s) at one point."""
    P = lambda r: a * r**gamma / (gamma - 1)
    dP = lambda r: a * gamma / (gamma - 1) * r ** (gamma - 1)
    du = np.asarray(u) - np.asarray(Q)
    return 0.5 * rho * float(du @ du) + P(rho) - dP(s) * (rho - s) - P(s)
