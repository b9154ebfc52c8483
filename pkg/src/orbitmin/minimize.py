"""Direct transcription of the two free-boundary minimization problems.

The prograde problem joins a collinear configuration with ``q2x <= q1x <= q3x``
to an isosceles configuration whose axis is rotated by ``theta``; the
retrograde one starts from the ordering ``q1x <= q2x <= q3x`` instead.  Both
are solved by descending the discrete action over the interior nodes and the
four boundary parameters together.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry as geo
from .action import (
    EPS_SEG,
    DiscretePath,
    discrete_action,
    discrete_action_and_node_gradient,
    pair_distances,
    reduce_node_gradient,
    segment_clearance,
)
from .dynamics import el_residual
from .errors import CollisionEncountered, DomainError, NonConvergence, NotAdjacent
from .geometry import IsoscelesEnd, ProgradeStart, RetrogradeStart
from .levels import circular_test_nodes
from .optim import OptimResult, lbfgs_bounded

log = logging.getLogger(__name__)

PROGRADE = "prograde"
RETROGRADE = "retrograde"
EPS_COLL_RATIO = 1e-3


@dataclass(frozen=True)
class ProblemSpec:
    m: float
    theta: float
    variant: str = PROGRADE
    n_nodes: int = 241
    duration: float = 1.0
    seed: int = 0
    branch: int = 1  # sign choice between the two mirror minimizers at theta = 0

    def __post_init__(self):
        geo.MassSet(self.m)
        if self.variant not in (PROGRADE, RETROGRADE):
            raise DomainError(f"variant must be 'prograde' or 'retrograde', got {self.variant!r}")
        th = float(self.theta)
        half = np.pi / 2
        if self.variant == PROGRADE and not (0.0 <= th < half):
            raise DomainError("the prograde problem needs theta in [0, pi/2)")
        if self.variant == RETROGRADE and not (0.0 < th <= half + 1e-15):
            raise DomainError("the retrograde problem needs theta in (0, pi/2]")
        if int(self.n_nodes) < 3:
            raise DomainError("n_nodes must be at least 3 (the path needs interior nodes)")
        if not self.duration > 0:
            raise DomainError("duration must be positive")
        if self.branch not in (1, -1):
            raise DomainError("branch must be +1 or -1")

    @property
    def is_schubart_angle(self) -> bool:
        return self.variant == RETROGRADE and abs(self.theta - np.pi / 2) < 1e-12

    def start_template(self):
        return ProgradeStart(0.0, 0.0) if self.variant == PROGRADE else RetrogradeStart(0.0, 0.0)

    def end_template(self):
        return IsoscelesEnd(self.theta, 0.0, 0.0)

    def target_quadrants(self):
        """Closed quadrants ``(Z1, Z2)`` that the minimizer is confined to."""
        if self.variant == RETROGRADE:
            return (2, 3)
        return (2, 1) if self.branch == 1 else (3, 4)


@dataclass
class MinimizerReport:
    spec: ProblemSpec
    path: DiscretePath
    action: float
    boundary_params: tuple
    min_pairwise_distance: float
    adjacency: geo.QuadrantReport
    case: str
    el_residual: float
    converged: bool
    iterations: int
    message: str = ""
    history: list = field(default_factory=list)


@dataclass
class Verdict:
    adjacent: bool
    collision_free: bool
    case: str
    branch_ok: Optional[bool]
    min_distance: float
    diameter: float
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.adjacent and self.collision_free and self.case != "violation" \
            and self.branch_ok is not False


# ---------------------------------------------------------------- transcription


class Transcription:
    """Packs a path of the problem into the optimizer's flat vector and back.

    Layout: ``[a1, a2, b1, b2, q2/q3 of interior nodes]``; ``q1`` is recovered
    from the center-of-mass condition.
    """

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self.m = float(spec.m)
        self.n = int(spec.n_nodes)
        self.h = spec.duration / (self.n - 1)
        self.start_basis = geo.boundary_basis(spec.start_template(), self.m)
        self.end_basis = geo.boundary_basis(spec.end_template(), self.m)

    @property
    def lower(self):
        lo = np.full(4 + 4 * (self.n - 2), -np.inf)
        lo[:2] = 0.0
        return lo

    def nodes(self, x):
        q = np.empty((self.n, 3, 2))
        q[0] = x[0] * self.start_basis[0] + x[1] * self.start_basis[1]
        q[-1] = x[2] * self.end_basis[0] + x[3] * self.end_basis[1]
        inner = x[4:].reshape(self.n - 2, 2, 2)
        q[1:-1, 1:] = inner
        q[1:-1, 0] = -self.m * (inner[:, 0] + inner[:, 1])
        return q

    def path(self, x) -> DiscretePath:
        t = type(self.spec.start_template())
        return DiscretePath(self.nodes(x), self.m, self.spec.duration, start=t(float(x[0]), float(x[1])),
                            end=IsoscelesEnd(self.spec.theta, float(x[2]), float(x[3])))

    def pack(self, path: DiscretePath):
        if path.n_nodes != self.n:
            raise DomainError(f"path has {path.n_nodes} nodes, problem expects {self.n}")
        s = geo.fit_boundary(path.nodes[0], self.spec.start_template(), self.m)
        e = geo.fit_boundary(path.nodes[-1], self.spec.end_template(), self.m)
        x = np.concatenate([[max(s.a1, 0.0), max(s.a2, 0.0), e.b1, e.b2],
                            path.nodes[1:-1, 1:].reshape(-1)])
        return x

    def value_and_grad(self, x):
        f, G = discrete_action_and_node_gradient(self.nodes(x), self.m, self.h)
        g = np.empty_like(x)
        g[:2] = np.tensordot(self.start_basis, G[0], axes=([1, 2], [0, 1]))
        g[2:4] = np.tensordot(self.end_basis, G[-1], axes=([1, 2], [0, 1]))
        g[4:] = reduce_node_gradient(G[1:-1], self.m).reshape(-1)
        return f, g


# ---------------------------------------------------------------- initial paths


def _length_scale(spec: ProblemSpec) -> float:
    return (geo.MassSet(spec.m).total / 3.0) ** (1.0 / 3.0) * spec.duration ** (2.0 / 3.0)


def initial_path(spec: ProblemSpec, strategy: str = "auto", perturbation: float = 0.05,
                 jitter: float = 0.0, path: Optional[DiscretePath] = None) -> DiscretePath:
    """Starting path for :func:`minimize`.

    ``strategy`` is ``"linear"`` (interpolate between representative members of
    the two families, with a bump of relative size ``perturbation`` that
    selects the branch), ``"circular"`` (the rotating retrograde test path),
    ``"file"`` (resample ``path`` onto the problem grid), or ``"auto"``
    (circular for retrograde problems, linear otherwise).  ``jitter`` adds
    seeded random noise of that relative size to the interior nodes.
    """
    m = float(spec.m)
    n = int(spec.n_nodes)
    L = _length_scale(spec)
    if strategy == "auto":
        strategy = "circular" if spec.variant == RETROGRADE else "linear"
    t = np.linspace(0.0, 1.0, n)
    if strategy == "linear":
        sgn = 1.0 if spec.variant == PROGRADE else -1.0
        z_start = geo.JacobiPair(np.array([-1.5 * L, 0.0]), np.array([0.45 * sgn * L, 0.0]))
        u = np.array([np.cos(spec.theta), np.sin(spec.theta)])
        v = np.array([-u[1], u[0]]) * spec.branch
        z_end = geo.JacobiPair(1.2 * L * v, 1.2 * L * u * sgn)
        q0 = geo.from_jacobi(z_start, m)
        q1 = geo.from_jacobi(z_end, m)
        q0 = geo.boundary_config(geo.fit_boundary(q0, spec.start_template(), m), m)
        q1 = geo.boundary_config(geo.fit_boundary(q1, spec.end_template(), m), m)
        nodes = (1.0 - t)[:, None, None] * q0 + t[:, None, None] * q1
        bump = perturbation * L * np.sin(np.pi * t) * spec.branch
        Z1, Z2 = geo.to_jacobi(nodes, m)
        Z2 = Z2 + bump[:, None] * np.array([0.0, sgn])
        Z1 = Z1 + bump[:, None] * np.array([0.0, 1.0])
        nodes = geo.from_jacobi((Z1, Z2), m)
    elif strategy == "circular":
        if spec.variant != RETROGRADE:
            raise DomainError("the circular test path connects the retrograde families only")
        nodes = circular_test_nodes(m, spec.theta, n, spec.duration)
    elif strategy == "file":
        if path is None:
            raise DomainError("strategy 'file' needs a path")
        src_t = np.linspace(0.0, 1.0, path.n_nodes)
        flat = path.nodes.reshape(path.n_nodes, 6)
        nodes = np.stack([np.interp(t, src_t, flat[:, k]) for k in range(6)], axis=1).reshape(n, 3, 2)
        nodes *= (spec.duration / path.duration) ** (2.0 / 3.0)
        nodes[0] = geo.boundary_config(_clip_start(geo.fit_boundary(nodes[0], spec.start_template(), m)), m)
        nodes[-1] = geo.boundary_config(geo.fit_boundary(nodes[-1], spec.end_template(), m), m)
    else:
        raise DomainError(f"unknown initial-path strategy {strategy!r}")
    if jitter:
        rng = np.random.default_rng(spec.seed)
        noise = rng.normal(scale=jitter * L, size=(n - 2, 2, 2))
        nodes[1:-1, 1:] += noise
        nodes[1:-1, 0] = -m * (nodes[1:-1, 1] + nodes[1:-1, 2])
    start = geo.fit_boundary(nodes[0], spec.start_template(), m)
    end = geo.fit_boundary(nodes[-1], spec.end_template(), m)
    return DiscretePath(nodes, m, spec.duration, start=start, end=end)


def _clip_start(s):
    return type(s)(max(s.a1, 0.0), max(s.a2, 0.0))


# ---------------------------------------------------------------- reflection move


def reflect_improve(path: DiscretePath, spec: ProblemSpec) -> DiscretePath:
    """Reflect the Jacobi path into the problem's quadrant pair if that does not raise the action.

    The reflected end nodes stay in their boundary families, so only the
    recorded boundary parameters change.
    """
    Z1, Z2 = path.jacobi()
    eps = geo.EPS_AXIS * geo.jacobi_scale(Z1, Z2)
    ends = geo.adjacent_mask(Z1[[0, -1]], Z2[[0, -1]], eps)
    if not ends.all():
        raise NotAdjacent("boundary Jacobi vectors are not in adjacent closed quadrants")
    targets = spec.target_quadrants()
    nodes = geo.from_jacobi(geo.reflect_path((Z1, Z2), targets), path.m)
    start = geo.fit_boundary(nodes[0], spec.start_template(), path.m)
    end = geo.fit_boundary(nodes[-1], spec.end_template(), path.m)
    if start.a1 < -1e-12 * path.diameter or start.a2 < -1e-12 * path.diameter:
        return path
    nodes[0] = geo.boundary_config(_clip_start(start), path.m)
    nodes[-1] = geo.boundary_config(end, path.m)
    reflected = path.with_nodes(nodes, start=_clip_start(start), end=end)
    try:
        if discrete_action(reflected) <= discrete_action(path):
            return reflected
    except ArithmeticError:
        pass
    return path


# ---------------------------------------------------------------- solver


SNAP_TOL = 1e-4


def _euler_subspace(tr: Transcription):
    """Columns spanning ``a1 = a2``, ``b2 = 0``, ``q3 = -q2`` (so ``q1 = 0``), and their bound flags."""
    k = tr.n - 2
    P = np.zeros((4 + 4 * k, 2 + 2 * k))
    P[0, 0] = P[1, 0] = 1.0
    P[2, 1] = 1.0
    for j in range(k):
        for c in range(2):
            P[4 + 4 * j + c, 2 + 2 * j + c] = 1.0
            P[4 + 4 * j + 2 + c, 2 + 2 * j + c] = -1.0
    bounded = np.zeros(P.shape[1], dtype=bool)
    bounded[0] = True
    return P, bounded


def _collinear_subspace(tr: Transcription):
    """Columns spanning the configurations on the x-axis (end family at ``theta = pi/2``, ``b2 = 0``)."""
    k = tr.n - 2
    P = np.zeros((4 + 4 * k, 3 + 2 * k))
    P[0, 0] = P[1, 1] = P[2, 2] = 1.0
    for j in range(k):
        for b in range(2):
            P[4 + 4 * j + 2 * b, 3 + 2 * j + b] = 1.0
    bounded = np.zeros(P.shape[1], dtype=bool)
    bounded[:2] = True
    return P, bounded


def _distance_to_set(tr: Transcription, x, which):
    q = tr.nodes(x)
    Z1, Z2 = geo.to_jacobi(q, tr.m)
    if which == "euler":
        return np.abs(Z2).max() / geo.jacobi_scale(Z1, Z2)
    return np.abs(q[..., 1]).max() / geo.config_scale(q)


def _polish(tr: Transcription, res, which, tol, max_iters, memory, accept):
    """Re-solve on an invariant set of the equations when the minimizer has collapsed onto it.

    The Euler set ``q1 = 0`` and the collinear set ``y = 0`` are invariant and
    the action's gradient is tangent to them there, but the restoring
    curvature across them is weak, so the free solver stops at its tolerance
    a small distance off the set instead of on it.  If the minimizer is within
    ``SNAP_TOL`` (relative) of the set, the problem is solved again restricted
    to it; the restricted solution replaces the free one only when its action
    is not larger.
    """
    if _distance_to_set(tr, res.x, which) > SNAP_TOL:
        return res
    P, bounded = _euler_subspace(tr) if which == "euler" else _collinear_subspace(tr)
    y0 = (P.T @ res.x) / np.sum(P * P, axis=0)
    lower = np.where(bounded, 0.0, -np.inf)

    def fun(y):
        f, g = tr.value_and_grad(P @ y)
        return f, P.T @ g

    sub = lbfgs_bounded(fun, y0, lower, tol=tol, max_iter=max_iters, memory=memory,
                        accept=lambda y: accept(P @ y))
    if not sub.fun <= res.fun:
        return res
    x = P @ sub.x
    f, g = tr.value_and_grad(x)
    return OptimResult(x, f, g, res.iterations + sub.iterations, res.converged or sub.converged,
                       f"{res.message}; restricted to the {which} set", res.history + sub.history,
                       sub.last_rejection)


def minimize(spec: ProblemSpec, initial: Optional[DiscretePath] = None, *, strategy: str = "auto",
             perturbation: float = 0.05, jitter: float = 0.0, tol_grad: Optional[float] = None,
             max_iters: int = 50000, memory: int = 20, reflect: bool = True,
             raise_on_failure: bool = True) -> MinimizerReport:
    """Local minimizer of the discrete action over interior nodes and boundary parameters."""
    tr = Transcription(spec)
    if initial is None:
        path0 = initial_path(spec, strategy, perturbation=perturbation, jitter=jitter)
    elif initial.n_nodes == spec.n_nodes and abs(initial.duration - spec.duration) < 1e-15:
        path0 = initial
    else:
        path0 = initial_path(spec, "file", path=initial)
    if reflect:
        path0 = reflect_improve(path0, spec)
    x0 = tr.pack(path0)
    f0, _ = tr.value_and_grad(x0)
    if tol_grad is None:
        tol_grad = 1e-8 * abs(f0) / path0.diameter

    def clear(x):
        q = tr.nodes(x)
        dist, pair, k = segment_clearance(q)
        floor = EPS_SEG * float(pair_distances(q).max())
        if dist < floor:
            return CollisionEncountered(f"segment {k} comes within {dist:.3g} of a {pair} collision",
                                        pair=pair, time=(k + 0.5) * tr.h)
        return None

    res = lbfgs_bounded(tr.value_and_grad, x0, tr.lower, tol=tol_grad, max_iter=max_iters,
                        memory=memory, accept=clear)
    if spec.variant == PROGRADE:
        res = _polish(tr, res, "euler", tol_grad, max_iters, memory, clear)
    elif spec.is_schubart_angle:
        res = _polish(tr, res, "collinear", tol_grad, max_iters, memory, clear)
    log.info("minimize %s m=%g theta/pi=%g: %s after %d iterations, action %.12g", spec.variant,
             spec.m, spec.theta / np.pi, res.message, res.iterations, res.fun)
    report = build_report(spec, tr.path(res.x), res)
    if not report.converged and raise_on_failure:
        if isinstance(res.last_rejection, CollisionEncountered) and res.message == "line search failed":
            err = res.last_rejection
            err.report = report
            raise err
        raise NonConvergence(f"no convergence: {res.message} after {res.iterations} iterations",
                             report=report)
    return report


def build_report(spec: ProblemSpec, path: DiscretePath, res=None) -> MinimizerReport:
    Z1, Z2 = path.jacobi()
    adjacency = geo.classify_quadrants((Z1, Z2))
    dmin = float(pair_distances(path.nodes).min())
    try:
        resid = el_residual(path, stencil=5)
    except ArithmeticError:
        resid = float("nan")
    return MinimizerReport(
        spec=spec, path=path, action=discrete_action(path), boundary_params=path.boundary_params,
        min_pairwise_distance=dmin, adjacency=adjacency, case=adjacency.case, el_residual=resid,
        converged=bool(res.converged) if res is not None else True,
        iterations=res.iterations if res is not None else 0,
        message=res.message if res is not None else "", history=list(res.history) if res is not None else [])


def verify_minimizer(report: MinimizerReport, eps_axis: Optional[float] = None,
                     eps_coll: Optional[float] = None) -> Verdict:
    """Check the collision-exclusion invariants on a computed minimizer.

    ``eps_coll`` defaults to ``1e-3`` times the path diameter.  For the
    retrograde problem at ``theta = pi/2`` the collision check skips the first
    node, where the collinear (Schubart) alternative has a binary collision.
    """
    spec = report.spec
    path = report.path
    Z1, Z2 = path.jacobi()
    adj = geo.classify_quadrants((Z1, Z2), eps_axis)
    diameter = path.diameter
    if eps_coll is None:
        eps_coll = EPS_COLL_RATIO * diameter
    d = pair_distances(path.nodes).min(axis=-1)
    notes = []
    if spec.is_schubart_angle:
        d = d[1:]
        notes.append("collision check waived at t=0 for theta=pi/2")
    dmin = float(d.min())
    branch_ok = None
    if spec.variant == PROGRADE and 0.0 < spec.theta < np.pi / 2:
        branch_ok = adj.confined_to(2, 1)
    elif spec.variant == PROGRADE:
        branch_ok = adj.confined_to(2, 1) or adj.confined_to(3, 4)
    elif not spec.is_schubart_angle:
        branch_ok = adj.confined_to(2, 3)
    if not adj.all_adjacent:
        notes.append(f"{int(np.sum(~adj.adjacent))} samples outside adjacent quadrants")
    return Verdict(adjacent=adj.all_adjacent, collision_free=dmin > eps_coll, case=adj.case,
                   branch_ok=branch_ok, min_distance=dmin, diameter=diameter, notes=notes)
