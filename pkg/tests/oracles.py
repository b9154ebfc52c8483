"""Independent reference computations used to check the package.

Nothing here imports :mod:`orbitmin`; every quantity is recomputed from its
definition with a different method (direct loops, dense quadrature,
elliptic integrals).
"""
import numpy as np
from scipy import integrate
from scipy.special import ellipk


def masses(m):
    return np.array([1.0, m, m])


def potential_loops(q, m):
    w = masses(m)
    u = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            u += w[i] * w[j] / np.hypot(*(q[i] - q[j]))
    return u


def kinetic_loops(v, m):
    w = masses(m)
    return 0.5 * sum(w[i] * (v[i] @ v[i]) for i in range(3))


def newton_accel_loops(q, m):
    w = masses(m)
    a = np.zeros((3, 2))
    for i in range(3):
        for j in range(3):
            if i != j:
                r = q[j] - q[i]
                a[i] += w[j] * r / np.hypot(*r) ** 3
    return a


def random_chi_config(rng, m, scale=1.0):
    q = rng.normal(scale=scale, size=(3, 2))
    w = masses(m)
    return q - (w @ q) / w.sum()


def segment_integral_log(a, d):
    """``int_0^1 dt/|a + t d|`` via the textbook antiderivative ``log(|d|^2 t + a.d + |d||a+td|)/|d|``."""
    nd = np.linalg.norm(d)
    if nd == 0:
        return 1.0 / np.linalg.norm(a)
    F = lambda t: np.log(nd**2 * t + a @ d + nd * np.linalg.norm(a + t * d)) / nd
    return F(1.0) - F(0.0)


def segment_integral_quad(a, d):
    val, _ = integrate.quad(lambda t: 1.0 / np.linalg.norm(a + t * d), 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def piecewise_linear_action_dense(nodes, m, duration=1.0, sub=2000):
    """Action of the linear interpolant by Gauss-Legendre quadrature on each segment."""
    w = masses(m)
    n = len(nodes)
    h = duration / (n - 1)
    x, wt = np.polynomial.legendre.leggauss(sub)
    s = 0.5 * (x + 1.0)
    wt = 0.5 * wt
    total = 0.0
    for k in range(n - 1):
        dq = nodes[k + 1] - nodes[k]
        total += 0.5 * np.sum(w[:, None] * dq**2) / h
        for i, j in ((0, 1), (0, 2), (1, 2)):
            a = nodes[k, i] - nodes[k, j]
            d = dq[i] - dq[j]
            r = np.linalg.norm(a[None, :] + s[:, None] * d[None, :], axis=1)
            total += w[i] * w[j] * h * np.sum(wt / r)
    return total


def j_elliptic(s):
    """``J(s)`` through the complete elliptic integral of the first kind."""
    return 2.0 / np.pi * ellipk(4 * s / (1 + s) ** 2) / (1 + s)


def circular_action_quad(m, theta):
    """Action of the rotating test path on [0, 1/4] from analytic velocities and adaptive quadrature."""
    M = 2 * m + 1
    phi = 4 * theta
    rq = 1 / (M * phi) ** (2 / 3)
    rr = 1 / ((2 * m) ** (2 / 3) * (2 * np.pi) ** (2 / 3))

    def lag(t):
        Q = rq * np.exp(1j * phi * t)
        R = rr * np.exp(1j * (phi - 2 * np.pi) * t)
        dQ, dR = 1j * phi * Q, 1j * (phi - 2 * np.pi) * R
        x = [-2 * m * Q, Q - m * R, Q + m * R]
        v = [-2 * m * dQ, dQ - m * dR, dQ + m * dR]
        w = masses(m)
        K = 0.5 * sum(w[i] * abs(v[i]) ** 2 for i in range(3))
        U = sum(w[i] * w[j] / abs(x[i] - x[j]) for i, j in ((0, 1), (0, 2), (1, 2)))
        return K + U

    val, _ = integrate.quad(lag, 0.0, 0.25, epsabs=1e-13, epsrel=1e-13, limit=200)
    return val
