"""Kinetic energy, potential, and the action of discretized paths.

Three evaluations of the action are provided:

* :func:`action_quadrature` treats the nodes as samples of a smooth path
  (finite-difference velocities, trapezoid or Simpson rule);
* :func:`action_piecewise_linear` integrates the linear interpolant of the
  nodes exactly, segment by segment;
* :func:`discrete_action` is the optimizer's objective: exact kinetic term of
  the linear interpolant plus the trapezoid rule for the potential.
  :func:`action_gradient` is its exact gradient.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
from scipy import integrate

from .errors import CollisionSingularity, DomainError, SegmentSingularity
from .geometry import (
    CHI_TOL,
    EPS_ZERO,
    BoundarySpec,
    IsoscelesEnd,
    MassLike,
    as_masses,
    boundary_basis,
    boundary_config,
    center_of_mass_defect,
    config_scale,
    to_jacobi,
)

EPS_SEG = 1e-8
PAIRS = ((0, 1), (0, 2), (1, 2))


@dataclass
class DiscretePath:
    """Configurations at the uniform times ``t_k = k * duration / (n_nodes - 1)``.

    ``start`` and ``end`` optionally record the boundary-family members that
    the first and last node realize.
    """

    nodes: np.ndarray
    m: float
    duration: float = 1.0
    start: Optional[BoundarySpec] = None
    end: Optional[IsoscelesEnd] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.array(self.nodes, dtype=float)
        if self.nodes.ndim != 3 or self.nodes.shape[1:] != (3, 2):
            raise DomainError(f"nodes must have shape (n, 3, 2), got {self.nodes.shape}")
        if self.nodes.shape[0] < 2:
            raise DomainError("a path needs at least two nodes")
        if not self.duration > 0:
            raise DomainError("duration must be positive")
        self.m = as_masses(self.m).m
        defect = np.abs(center_of_mass_defect(self.nodes, self.m)).max()
        if defect > CHI_TOL * max(1.0, float(np.abs(self.nodes).max())) * 10:
            raise DomainError(f"nodes leave the center-of-mass space (defect {defect:.3g})")

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def h(self) -> float:
        return self.duration / (self.n_nodes - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.duration, self.n_nodes)

    @property
    def masses(self) -> np.ndarray:
        return as_masses(self.m).masses

    @property
    def diameter(self) -> float:
        return config_scale(self.nodes)

    def jacobi(self):
        return to_jacobi(self.nodes, self.m)

    @property
    def boundary_params(self):
        if self.start is None or self.end is None:
            return None
        return (self.start.a1, self.start.a2, self.end.b1, self.end.b2)

    def with_nodes(self, nodes, start=None, end=None) -> "DiscretePath":
        return replace(self, nodes=nodes, start=start if start is not None else self.start,
                       end=end if end is not None else self.end, meta=dict(self.meta))

    def check_boundaries(self, tol: float = 1e-12) -> bool:
        """True if the end nodes reproduce the recorded boundary members to ``tol``."""
        ok = True
        scale = max(1.0, self.diameter)
        if self.start is not None:
            ok &= bool(np.abs(self.nodes[0] - boundary_config(self.start, self.m)).max() <= tol * scale)
        if self.end is not None:
            ok &= bool(np.abs(self.nodes[-1] - boundary_config(self.end, self.m)).max() <= tol * scale)
        return ok


class PolarPotentialArgs(NamedTuple):
    r1: float
    r2: float
    delta: float


class ActionGradient(NamedTuple):
    interior: np.ndarray  # (n-2, 2, 2): derivatives with respect to q2, q3 of interior nodes
    start: np.ndarray  # (2,): with respect to (a1, a2), or the full node gradient if no family
    end: np.ndarray  # (2,): with respect to (b1, b2)


# ---------------------------------------------------------------- energies


def kinetic(velocities, masses: MassLike):
    """``(1/2) sum m_i |v_i|^2`` for velocities of shape ``(..., 3, 2)``."""
    w = as_masses(masses).masses
    v = np.asarray(velocities, dtype=float)
    return 0.5 * np.einsum("i,...ij,...ij->...", w, v, v)


def kinetic_jacobi(zdot, masses: MassLike):
    m = as_masses(masses).m
    Z1d = np.asarray(zdot[0], dtype=float)
    Z2d = np.asarray(zdot[1], dtype=float)
    return m / 4.0 * np.sum(Z1d**2, axis=-1) + m / (2.0 * m + 1.0) * np.sum(Z2d**2, axis=-1)


def pair_distances(q) -> np.ndarray:
    """Distances ``|q1-q2|, |q1-q3|, |q2-q3|`` stacked on the last axis."""
    q = np.asarray(q, dtype=float)
    return np.stack([np.linalg.norm(q[..., i, :] - q[..., j, :], axis=-1) for i, j in PAIRS], axis=-1)


def _collision_floor(d, eps, what="configuration"):
    if eps is None:
        eps = EPS_ZERO * float(np.max(d)) if d.size else 0.0
    bad = d <= eps
    if np.any(bad):
        idx = np.unravel_index(int(np.argmax(bad)), d.shape)
        raise CollisionSingularity(f"collision in {what}: pair {PAIRS[idx[-1]]} at distance "
                                   f"{d[idx]:.3g}", pair=PAIRS[idx[-1]], index=idx[:-1])


def potential(config, masses: MassLike, eps: float | None = None):
    """Force function ``sum_{i<j} m_i m_j / |q_i - q_j|`` (positive)."""
    w = as_masses(masses).masses
    d = pair_distances(config)
    _collision_floor(d, eps)
    return w[0] * w[1] / d[..., 0] + w[0] * w[2] / d[..., 1] + w[1] * w[2] / d[..., 2]


def potential_jacobi(zpair, masses: MassLike, eps: float | None = None):
    m = as_masses(masses).m
    Z1 = np.asarray(zpair[0], dtype=float)
    Z2 = np.asarray(zpair[1], dtype=float)
    d = np.stack([np.linalg.norm(Z1, axis=-1), np.linalg.norm(Z1 / 2 + Z2, axis=-1),
                  np.linalg.norm(Z1 / 2 - Z2, axis=-1)], axis=-1)
    _collision_floor(d, eps)
    return m * m / d[..., 0] + m / d[..., 1] + m / d[..., 2]


def potential_polar(args: PolarPotentialArgs, masses: MassLike, eps: float | None = None):
    """The potential as a function of ``|Z1|``, ``|Z2|`` and the line angle between them."""
    m = as_masses(masses).m
    r1, r2, delta = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in args))
    base = r1**2 / 4.0 + r2**2
    cross = r1 * r2 * np.cos(delta)
    d = np.stack([r1, np.sqrt(np.maximum(base + cross, 0.0)), np.sqrt(np.maximum(base - cross, 0.0))],
                 axis=-1)
    _collision_floor(d, EPS_ZERO * float(np.max(r1 + r2)) if eps is None else eps)
    return m * m / d[..., 0] + m / d[..., 1] + m / d[..., 2]


# ---------------------------------------------------------------- action evaluations


def nodal_velocities(path: DiscretePath) -> np.ndarray:
    """Central differences inside, one-sided second-order differences at the ends."""
    edge = 2 if path.n_nodes >= 3 else 1
    return np.gradient(path.nodes, path.h, axis=0, edge_order=edge)


def action_quadrature(path: DiscretePath, rule: str = "trapezoid") -> float:
    """Composite quadrature of ``K + U`` with finite-difference velocities.

    ``rule`` is ``"trapezoid"``, ``"simpson"``, or ``"discrete"`` (the
    optimizer's objective, see :func:`discrete_action`).
    """
    if rule == "discrete":
        return discrete_action(path)
    lagrangian = kinetic(nodal_velocities(path), path.m) + potential(path.nodes, path.m)
    t = path.times
    if rule == "trapezoid":
        return float(integrate.trapezoid(lagrangian, t))
    if rule == "simpson":
        return float(integrate.simpson(lagrangian, x=t))
    raise DomainError(f"unknown quadrature rule {rule!r}")


def segment_clearance(nodes):
    """Smallest pairwise distance reached anywhere on the linear interpolant of ``nodes``.

    Returns ``(distance, pair, segment_index)``.
    """
    q = np.asarray(nodes, dtype=float)
    best = (np.inf, None, None)
    for p, (i, j) in enumerate(PAIRS):
        a = q[:-1, i] - q[:-1, j]
        d = np.diff(q[:, i] - q[:, j], axis=0)
        dd = np.sum(d * d, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(dd > 0, np.clip(-np.sum(a * d, axis=-1) / dd, 0.0, 1.0), 0.0)
        dist = np.linalg.norm(a + t[:, None] * d, axis=-1)
        k = int(np.argmin(dist))
        if dist[k] < best[0]:
            best = (float(dist[k]), (i, j), k)
    return best


def _inverse_distance_integral(a, d):
    """``int_0^1 dt / |a + t d|`` for stacked 2-vectors, assuming the segment avoids the origin."""
    nd = np.linalg.norm(d, axis=-1)
    na = np.linalg.norm(a, axis=-1)
    nad = np.linalg.norm(a + d, axis=-1)
    out = np.empty_like(nd)
    static = nd == 0.0
    out[static] = 1.0 / na[static]
    mv = ~static
    nd_, na_, nad_ = nd[mv], na[mv], nad[mv]
    s0 = np.sum(a[mv] * d[mv], axis=-1) / nd_
    s1 = s0 + nd_
    p = np.abs(a[mv][:, 0] * d[mv][:, 1] - a[mv][:, 1] * d[mv][:, 0]) / nd_
    # orient each segment so that it moves away from the foot of the perpendicular
    flip = s1 <= 0.0
    s0, s1 = np.where(flip, -s1, s0), np.where(flip, -s0, s1)
    r0, r1 = np.where(flip, nad_, na_), np.where(flip, na_, nad_)
    res = np.empty_like(nd_)
    same = s0 >= 0.0
    res[same] = np.log1p(nd_[same] * (1.0 + (s0[same] + s1[same]) / (r0[same] + r1[same]))
                         / (s0[same] + r0[same])) / nd_[same]
    mixed = ~same
    res[mixed] = (np.arcsinh(s1[mixed] / p[mixed]) + np.arcsinh(-s0[mixed] / p[mixed])) / nd_[mixed]
    out[mv] = res
    return out


def action_piecewise_linear(path: DiscretePath, eps_seg: float | None = None) -> float:
    """Exact action of the piecewise-linear interpolant of the nodes."""
    q = path.nodes
    h = path.h
    w = path.masses
    if eps_seg is None:
        eps_seg = EPS_SEG * path.diameter
    dist, pair, k = segment_clearance(q)
    if dist < eps_seg:
        raise SegmentSingularity(f"segment {k} passes within {dist:.3g} of a collision of {pair}",
                                 pair=pair, index=k)
    dq = np.diff(q, axis=0)
    kin = 0.5 * np.einsum("i,kij,kij->", w, dq, dq) / h
    pot = 0.0
    for i, j in PAIRS:
        pot += w[i] * w[j] * h * np.sum(_inverse_distance_integral(q[:-1, i] - q[:-1, j], dq[:, i] - dq[:, j]))
    return float(kin + pot)


def _trapezoid_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = h / 2.0
    return w


def discrete_action(path: DiscretePath) -> float:
    """Exact kinetic term of the linear interpolant plus trapezoid-rule potential."""
    dq = np.diff(path.nodes, axis=0)
    kin = 0.5 * np.einsum("i,kij,kij->", path.masses, dq, dq) / path.h
    pot = np.dot(_trapezoid_weights(path.n_nodes, path.h), potential(path.nodes, path.m))
    return float(kin + pot)


def discrete_action_and_node_gradient(nodes, m: float, h: float):
    """Value and Cartesian gradient ``(n, 3, 2)`` of the discrete action with respect to all nodes."""
    w = as_masses(m).masses
    q = np.asarray(nodes, dtype=float)
    dq = np.diff(q, axis=0)
    md = w[None, :, None] * dq / h
    value = 0.5 * np.sum(md * dq)
    grad = np.zeros_like(q)
    grad[:-1] -= md
    grad[1:] += md
    tw = _trapezoid_weights(q.shape[0], h)
    d = pair_distances(q)
    _collision_floor(d, None, "path")
    for p, (i, j) in enumerate(PAIRS):
        r = q[:, i] - q[:, j]
        c = tw * w[i] * w[j] / d[:, p]
        value += np.sum(c)
        g = -(c / d[:, p] ** 2)[:, None] * r
        grad[:, i] += g
        grad[:, j] -= g
    return float(value), grad


def reduce_node_gradient(grad, m: float) -> np.ndarray:
    """Chain rule through ``q1 = -m (q2 + q3)``: gradient with respect to ``(q2, q3)``."""
    g = np.asarray(grad)
    return np.stack([g[..., 1, :] - m * g[..., 0, :], g[..., 2, :] - m * g[..., 0, :]], axis=-2)


def action_gradient(path: DiscretePath) -> ActionGradient:
    """Exact gradient of :func:`discrete_action` in the free variables.

    Interior nodes are parameterized by ``(q2, q3)``; when the path records
    its boundary families, the end-node gradients are mapped onto
    ``(a1, a2)`` and ``(b1, b2)``.  Without a family the reduced gradient of
    the end node is returned instead.
    """
    _, G = discrete_action_and_node_gradient(path.nodes, path.m, path.h)
    interior = reduce_node_gradient(G[1:-1], path.m)
    if path.start is not None:
        start = np.tensordot(boundary_basis(path.start, path.m), G[0], axes=([1, 2], [0, 1]))
    else:
        start = reduce_node_gradient(G[0], path.m)
    if path.end is not None:
        end = np.tensordot(boundary_basis(path.end, path.m), G[-1], axes=([1, 2], [0, 1]))
    else:
        end = reduce_node_gradient(G[-1], path.m)
    return ActionGradient(interior, start, end)
