"""Newtonian motion of the [1, m, m] problem: accelerations, integration, residuals, extension."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .action import DiscretePath, kinetic, nodal_velocities, pair_distances, potential
from .errors import CollisionApproach, CollisionSingularity, DomainError, NotVerified
from .geometry import EPS_AXIS, EPS_ZERO, MassLike, as_masses, config_scale

EPS_COLL = 1e-6


def accel_cartesian(config, masses: MassLike):
    """Accelerations ``(..., 3, 2)`` of the three bodies."""
    w = as_masses(masses).masses
    q = np.asarray(config, dtype=float)
    d = pair_distances(q)
    if np.any(d <= EPS_ZERO * np.max(d)):
        raise CollisionSingularity("acceleration undefined at a collision")
    acc = np.zeros_like(q)
    for p, (i, j) in enumerate(((0, 1), (0, 2), (1, 2))):
        r = (q[..., j, :] - q[..., i, :]) / d[..., p, None] ** 3
        acc[..., i, :] += w[j] * r
        acc[..., j, :] -= w[i] * r
    return acc


def accel_jacobi(zpair, masses: MassLike):
    """Second derivatives of ``(Z1, Z2)`` along a Newtonian motion."""
    m = as_masses(masses).m
    Z1 = np.asarray(zpair[0], dtype=float)
    Z2 = np.asarray(zpair[1], dtype=float)
    u = Z2 - Z1 / 2.0
    v = Z2 + Z1 / 2.0
    nu = np.linalg.norm(u, axis=-1)[..., None]
    nv = np.linalg.norm(v, axis=-1)[..., None]
    n1 = np.linalg.norm(Z1, axis=-1)[..., None]
    scale = max(float(np.max(n1)), float(np.max(np.linalg.norm(Z2, axis=-1))))
    if np.any(nu <= EPS_ZERO * scale) or np.any(nv <= EPS_ZERO * scale) or np.any(n1 <= EPS_ZERO * scale):
        raise CollisionSingularity("acceleration undefined at a collision")
    Z1dd = u / nu**3 - v / nv**3 - 2.0 * m * Z1 / n1**3
    Z2dd = -(1.0 + 2.0 * m) / 2.0 * (u / nu**3 + v / nv**3)
    return Z1dd, Z2dd


def energy(config, velocities, masses: MassLike):
    return kinetic(velocities, masses) - potential(config, masses)


def angular_momentum(config, velocities, masses: MassLike):
    w = as_masses(masses).masses
    q = np.asarray(config, dtype=float)
    v = np.asarray(velocities, dtype=float)
    return np.einsum("i,...i->...", w, q[..., 0] * v[..., 1] - q[..., 1] * v[..., 0])


@dataclass
class PhaseState:
    config: np.ndarray
    velocities: np.ndarray
    m: float

    def __post_init__(self):
        self.config = np.array(self.config, dtype=float).reshape(3, 2)
        self.velocities = np.array(self.velocities, dtype=float).reshape(3, 2)
        w = as_masses(self.m).masses
        scale = max(1.0, float(np.abs(self.config).max()))
        vscale = max(1.0, float(np.abs(self.velocities).max()))
        if np.abs(w @ self.config).max() > 1e-10 * scale or np.abs(w @ self.velocities).max() > 1e-10 * vscale:
            raise DomainError("phase state must have its center of mass at rest at the origin")


@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray  # (N, 3, 2)
    velocities: np.ndarray
    m: float
    energy_drift: float = 0.0
    angmom_drift: float = 0.0
    meta: dict = field(default_factory=dict)

    def state(self, k: int) -> PhaseState:
        return PhaseState(self.positions[k], self.velocities[k], self.m)


def _drifts(q, v, m):
    E = energy(q, v, m)
    L = angular_momentum(q, v, m)
    e_ref = max(abs(E[0]), 1e-300)
    l_ref = max(abs(L[0]), float(np.max(np.abs(kinetic(v, m)))), 1e-300)
    return float(np.max(np.abs(E - E[0])) / e_ref), float(np.max(np.abs(L - L[0])) / l_ref)


def integrate(state: PhaseState, t_span, rtol: float = 1e-12, atol: Optional[float] = None,
              t_eval=None, eps_coll: Optional[float] = None) -> Trajectory:
    """Adaptive eighth-order Runge-Kutta (DOP853) integration of the Newtonian equations.

    Stops with :class:`CollisionApproach`, carrying the partial trajectory, if a
    pairwise distance drops below ``eps_coll`` (default ``1e-6`` times the
    initial size).
    """
    m = state.m
    w = as_masses(m).masses
    size = config_scale(state.config)
    if eps_coll is None:
        eps_coll = EPS_COLL * size
    if atol is None:
        atol = rtol * max(size, 1e-300)
    if pair_distances(state.config).min() <= eps_coll:
        raise CollisionApproach("initial state is at a collision")

    def rhs(_, y):
        q = y[:6].reshape(3, 2)
        return np.concatenate([y[6:], accel_cartesian(q, m).ravel()])

    def close(_, y):
        return pair_distances(y[:6].reshape(3, 2)).min() - eps_coll

    close.terminal = True
    y0 = np.concatenate([state.config.ravel(), state.velocities.ravel()])
    sol = solve_ivp(rhs, t_span, y0, method="DOP853", rtol=rtol, atol=atol, t_eval=t_eval,
                    events=close, dense_output=False)
    q = sol.y[:6].T.reshape(-1, 3, 2)
    v = sol.y[6:].T.reshape(-1, 3, 2)
    if q.shape[0] == 0:
        q, v, times = state.config[None], state.velocities[None], np.array([t_span[0]])
    else:
        times = sol.t
    ed, ld = _drifts(q, v, m)
    traj = Trajectory(times, q, v, m, ed, ld, meta={"message": sol.message, "nfev": sol.nfev})
    if sol.status == 1:
        raise CollisionApproach(f"pairwise distance fell below {eps_coll:.3g} at t={sol.t_events[0][0]:.6g}",
                                trajectory=traj)
    if sol.status < 0:
        raise DomainError(sol.message)
    return traj


def lagrange_state(m: float, side: float = 1.0):
    """Equilateral relative equilibrium with side ``side``; returns ``(state, period)``."""
    w = as_masses(m).masses
    tri = side * np.array([[0.0, np.sqrt(3) / 2], [-0.5, 0.0], [0.5, 0.0]])
    tri -= (w @ tri) / w.sum()
    omega = np.sqrt(w.sum() / side**3)
    vel = omega * np.stack([-tri[:, 1], tri[:, 0]], axis=1)
    return PhaseState(tri, vel, m), 2.0 * np.pi / omega


def lagrange_path(m: float, n_nodes: int, duration: float, side: float = 1.0) -> DiscretePath:
    state, period = lagrange_state(m, side)
    omega = 2.0 * np.pi / period
    t = np.linspace(0.0, duration, n_nodes)
    c, s = np.cos(omega * t), np.sin(omega * t)
    x, y = state.config[:, 0], state.config[:, 1]
    nodes = np.stack([c[:, None] * x - s[:, None] * y, s[:, None] * x + c[:, None] * y], axis=-1)
    return DiscretePath(nodes, m, duration)


def _second_difference(q, h, stencil):
    if stencil == 3:
        return (q[2:] - 2.0 * q[1:-1] + q[:-2]) / h**2, 1
    if stencil == 5:
        return (-q[4:] + 16.0 * q[3:-1] - 30.0 * q[2:-2] + 16.0 * q[1:-3] - q[:-4]) / (12.0 * h**2), 2
    raise DomainError("stencil must be 3 or 5")


def el_residuals(nodes, m: float, h: float, stencil: int = 3) -> np.ndarray:
    """Per-node relative residual ``|q'' - a(q)| / |a(q)|`` at the nodes the stencil reaches."""
    q = np.asarray(nodes, dtype=float)
    qdd, off = _second_difference(q, h, stencil)
    acc = accel_cartesian(q[off:q.shape[0] - off], m)
    num = np.linalg.norm((qdd - acc).reshape(len(acc), -1), axis=-1)
    den = np.linalg.norm(acc.reshape(len(acc), -1), axis=-1)
    return num / den


def el_residual(path: DiscretePath, stencil: int = 3) -> float:
    """Largest relative Euler-Lagrange residual over the interior nodes.

    With ``stencil=3`` this is the three-point second difference; a path that
    minimizes the discrete action satisfies that discrete equation exactly, so
    ``stencil=5`` (fourth-order second difference) is the one that measures the
    distance to a true Newtonian solution, with an ``O(h^2)`` value.
    """
    if path.n_nodes < 2 * (stencil // 2) + 1:
        raise DomainError("path too short for the requested stencil")
    return float(np.max(el_residuals(path.nodes, path.m, path.h, stencil)))


# ---------------------------------------------------------------- symmetric extension


def reflect_x(q):
    out = np.array(q, dtype=float, copy=True)
    out[..., 1] *= -1.0
    return out


def reflect_line(q, theta):
    c, s = np.cos(2 * theta), np.sin(2 * theta)
    M = np.array([[c, s], [s, -c]])
    return np.asarray(q, dtype=float) @ M


def swap23(q):
    return np.asarray(q)[..., [0, 2, 1], :]


def period_in_domains(theta: float, max_denominator: int = 1000, tol: float = 1e-12):
    """Minimal period of the extension in fundamental domains, or ``None`` if quasi-periodic.

    Two domains advance the orbit by the rotation through ``2 theta`` composed
    with the exchange of bodies 2 and 3, so the labelled configuration returns
    after ``2k`` domains for the least even ``k`` with ``k theta / pi`` integral.
    """
    r = theta / np.pi
    frac = Fraction(r).limit_denominator(max_denominator)
    if abs(float(frac) - r) > tol:
        return None
    q = frac.denominator
    k = q * 2 // gcd(q, 2)
    return 2 * k


@dataclass
class ExtendedOrbit:
    trajectory: Trajectory
    copies: int
    periodic: bool
    period_domains: Optional[int]
    closure_gap: float  # glued end state vs start state (meaningful when copies is a period)
    integrated_gap: Optional[float]  # Newtonian integration vs the glued orbit
    gluing_residual: float
    interior_residual: float
    glue_indices: list


def extend_orbit(report, copies: Optional[int] = None, check_integration: bool = True,
                 force: bool = False, rtol: float = 1e-12) -> ExtendedOrbit:
    """Extend a verified minimizing arc by its boundary symmetries.

    The arc is reflected across the x-axis (the collinear end, with reversed
    time) and across the rotated isosceles axis with bodies 2 and 3 exchanged
    (the isosceles end).  ``copies`` fundamental domains are generated,
    defaulting to one full period when the angle is a rational multiple of pi
    (capped at 64 domains).  With ``check_integration`` the state in the
    middle of the first arc is integrated over the whole window and compared
    with the glued orbit.
    """
    from .minimize import verify_minimizer

    if not force and not verify_minimizer(report).ok:
        raise NotVerified("minimizer failed verification; pass force=True to extend anyway")
    path = report.path
    theta = report.spec.theta
    m = path.m
    T = path.duration
    period = period_in_domains(theta)
    if copies is None:
        copies = period if period is not None and period <= 64 else 4
    copies = int(copies)
    if copies < 1:
        raise DomainError("copies must be positive")
    q = path.nodes
    v = nodal_velocities(path)
    n = path.n_nodes
    t = path.times

    def g(x):  # two-domain symmetry: rotation through 2 theta and exchange of bodies 2, 3
        return swap23(reflect_line(reflect_x(x), theta))

    pieces_q, pieces_v, pieces_t, glue = [q], [v], [t], []
    back_q = swap23(reflect_line(q[::-1], theta))
    back_v = -swap23(reflect_line(v[::-1], theta))
    pair_q = [q, back_q]
    pair_v = [v, back_v]
    for k in range(1, copies):
        j, odd = divmod(k, 2)
        bq, bv = pair_q[odd], pair_v[odd]
        for _ in range(j):
            bq, bv = g(bq), g(bv)
        glue.append(sum(len(p) for p in pieces_q) - 1)
        pieces_q.append(bq[1:])
        pieces_v.append(bv[1:])
        pieces_t.append(t[1:] + k * T)
    Q = np.concatenate(pieces_q)
    V = np.concatenate(pieces_v)
    times = np.concatenate(pieces_t)
    ed, ld = _drifts(Q, V, m)
    traj = Trajectory(times, Q, V, m, ed, ld, meta={"theta": theta, "copies": copies})

    scale = config_scale(Q)
    closure = float(max(np.abs(Q[-1] - Q[0]).max() / scale,
                        np.abs(V[-1] - V[0]).max() / max(np.abs(V).max(), 1e-300)))
    res = el_residuals(Q, m, path.h, stencil=5) if len(Q) >= 5 else np.zeros(0)
    glue_res = [res[i - 2] for i in glue if 2 <= i < len(Q) - 2]
    glue_level = float(max(glue_res)) if glue_res else 0.0
    interior = float(np.max(el_residuals(q, m, path.h, stencil=5))) if n >= 5 else 0.0

    integrated = None
    if check_integration:
        mid = (n - 1) // 2
        state = PhaseState(Q[mid], V[mid], m)
        t0 = times[mid]
        sel = times >= t0
        sol = integrate(state, (t0, times[-1]), rtol=rtol, t_eval=times[sel])
        integrated = float(np.abs(sol.positions - Q[sel]).max() / scale)
    return ExtendedOrbit(traj, copies, period is not None, period, closure, integrated,
                         glue_level, interior, glue)


def schubart_dichotomy(report, eps_axis: Optional[float] = None, eps_coll: Optional[float] = None):
    """Label a ``theta = pi/2`` retrograde minimizer as ``Collinear``, ``IsoscelesFree`` or ``Undetermined``."""
    path = report.path
    diameter = path.diameter
    if eps_axis is None:
        eps_axis = EPS_AXIS * diameter
    if eps_coll is None:
        eps_coll = 1e-3 * diameter
    ymax = float(np.abs(path.nodes[..., 1]).max())
    dmin = float(pair_distances(path.nodes).min())
    if ymax < eps_axis:
        label = "Collinear"
    elif dmin > eps_coll:
        label = "IsoscelesFree"
    else:
        label = "Undetermined"
    return label, {"max_abs_y": ymax, "min_distance": dmin, "diameter": diameter, "m": path.m}
