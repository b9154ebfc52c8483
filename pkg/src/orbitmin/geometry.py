"""Configurations of the [1, m, m] three-body problem and the quadrant geometry of Jacobi vectors.

Configurations are ``(3, 2)`` arrays whose rows are the positions of bodies
1, 2, 3; paths are ``(n, 3, 2)`` arrays.  Every function here accepts stacked
inputs where it makes sense, so a whole path is transformed in one call.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import DomainError, NegativeParameter, NotAdjacent, ZeroVector

EPS_AXIS = 1e-9
EPS_ZERO = 1e-12
CHI_TOL = 1e-12

# sign pattern (sx, sy) of the closed quadrants 1..4
QUADRANT_SIGNS = {1: (1.0, 1.0), 2: (-1.0, 1.0), 3: (-1.0, -1.0), 4: (1.0, -1.0)}
ADJACENT_PAIRS = frozenset({(1, 2), (2, 1), (2, 3), (3, 2), (3, 4), (4, 3), (4, 1), (1, 4)})


@dataclass(frozen=True)
class MassSet:
    """Masses ``[1, m, m]``."""

    m: float

    def __post_init__(self):
        m = float(self.m)
        if not np.isfinite(m) or m <= 0:
            raise DomainError(f"mass parameter must be positive, got {self.m!r}")
        object.__setattr__(self, "m", m)

    @property
    def masses(self) -> np.ndarray:
        return np.array([1.0, self.m, self.m])

    @property
    def total(self) -> float:
        return 1.0 + 2.0 * self.m


MassLike = Union[MassSet, float]


def as_masses(masses: MassLike) -> MassSet:
    return masses if isinstance(masses, MassSet) else MassSet(masses)


class JacobiPair(NamedTuple):
    """Jacobi vectors ``Z1 = q2 - q3`` and ``Z2 = q1 - (q2 + q3)/2``; arrays of shape ``(..., 2)``."""

    Z1: np.ndarray
    Z2: np.ndarray


def config_scale(q) -> float:
    """Largest pairwise distance in a configuration or a path of configurations."""
    q = np.asarray(q, dtype=float).reshape(-1, 3, 2)
    d = np.concatenate(
        [np.linalg.norm(q[:, i] - q[:, j], axis=-1) for i, j in ((0, 1), (0, 2), (1, 2))]
    )
    return float(d.max()) if d.size else 0.0


def center_of_mass_defect(q, masses: MassLike) -> np.ndarray:
    w = as_masses(masses).masses
    return np.einsum("i,...ij->...j", w, np.asarray(q, dtype=float))


def in_chi(q, masses: MassLike, tol: float = CHI_TOL) -> bool:
    """True if ``sum m_i q_i`` vanishes to ``tol`` times the configuration scale."""
    q = np.asarray(q, dtype=float)
    scale = max(float(np.abs(q).max()) if q.size else 0.0, 1.0)
    return bool(np.all(np.abs(center_of_mass_defect(q, masses)) <= tol * scale))


def to_jacobi(config, masses: MassLike) -> JacobiPair:
    m = as_masses(masses).m
    q = np.asarray(config, dtype=float)
    return JacobiPair(q[..., 1, :] - q[..., 2, :], (1.0 + 1.0 / (2.0 * m)) * q[..., 0, :])


def from_jacobi(zpair, masses: MassLike) -> np.ndarray:
    m = as_masses(masses).m
    Z1 = np.asarray(zpair[0], dtype=float)
    Z2 = np.asarray(zpair[1], dtype=float)
    q1 = Z2 / (1.0 + 1.0 / (2.0 * m))
    half_sum = -q1 / (2.0 * m)  # (q2 + q3) / 2
    return np.stack([q1, half_sum + Z1 / 2.0, half_sum - Z1 / 2.0], axis=-2)


def rotation(theta: float) -> np.ndarray:
    """``R(theta)`` acting on row vectors from the right (counterclockwise rotation)."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


# ---------------------------------------------------------------- boundary families


@dataclass(frozen=True)
class ProgradeStart:
    """Collinear start on the x-axis with ``q2x <= q1x <= q3x``."""

    a1: float
    a2: float

    kind = "prograde_start"

    @property
    def params(self):
        return (self.a1, self.a2)


@dataclass(frozen=True)
class RetrogradeStart:
    """Collinear start on the x-axis with ``q1x <= q2x <= q3x``."""

    a1: float
    a2: float

    kind = "retrograde_start"

    @property
    def params(self):
        return (self.a1, self.a2)


@dataclass(frozen=True)
class IsoscelesEnd:
    """Isosceles triangle with vertex body 1, symmetry axis rotated by ``theta`` from the x-axis."""

    theta: float
    b1: float
    b2: float

    kind = "isosceles_end"

    @property
    def params(self):
        return (self.b1, self.b2)


BoundarySpec = Union[ProgradeStart, RetrogradeStart, IsoscelesEnd]


def boundary_basis(spec: BoundarySpec, masses: MassLike) -> np.ndarray:
    """The two ``(3, 2)`` configurations spanning the family; ``config = p1*B[0] + p2*B[1]``."""
    m = as_masses(masses).m
    if isinstance(spec, ProgradeStart):
        col = np.array([[m, -(m + 1.0), m], [-m, -m, m + 1.0]])
    elif isinstance(spec, RetrogradeStart):
        col = np.array([[-2.0 * m, 1.0, 1.0], [-m, -m, m + 1.0]])
    elif isinstance(spec, IsoscelesEnd):
        R = rotation(spec.theta)
        e1 = np.array([[0.0, 0.0], [0.0, 1.0], [0.0, -1.0]]) @ R
        e2 = np.array([[2.0 * m, 0.0], [-1.0, 0.0], [-1.0, 0.0]]) @ R
        return np.stack([e1, e2])
    else:
        raise TypeError(f"unknown boundary spec {spec!r}")
    basis = np.zeros((2, 3, 2))
    basis[:, :, 0] = col
    return basis


def boundary_config(spec: BoundarySpec, masses: MassLike) -> np.ndarray:
    if isinstance(spec, (ProgradeStart, RetrogradeStart)) and (spec.a1 < 0 or spec.a2 < 0):
        raise NegativeParameter(f"a1, a2 must be >= 0, got ({spec.a1}, {spec.a2})")
    p1, p2 = spec.params
    B = boundary_basis(spec, masses)
    return p1 * B[0] + p2 * B[1]


def fit_boundary(config, template: BoundarySpec, masses: MassLike) -> BoundarySpec:
    """Least-squares parameters of the family of ``template`` closest to ``config``.

    Exact for configurations that belong to the family.  ``a1, a2`` are not
    clipped, so a negative value signals a configuration outside the family.
    """
    B = boundary_basis(template, masses).reshape(2, 6).T
    p, *_ = np.linalg.lstsq(B, np.asarray(config, dtype=float).reshape(6), rcond=None)
    if isinstance(template, IsoscelesEnd):
        return IsoscelesEnd(template.theta, float(p[0]), float(p[1]))
    return type(template)(float(p[0]), float(p[1]))


# ---------------------------------------------------------------- angles


def _norm_floor(Z1, Z2, eps):
    n1 = np.linalg.norm(Z1, axis=-1)
    n2 = np.linalg.norm(Z2, axis=-1)
    if eps is None:
        eps = EPS_ZERO * max(float(np.max(n1)), float(np.max(n2)))
    if np.any(n1 <= eps) or np.any(n2 <= eps):
        raise ZeroVector("Jacobi vector norm below the zero floor")


def delta_angle(zpair, eps: float | None = None):
    """Angle in ``[0, pi/2]`` between the lines spanned by ``Z1`` and ``Z2``."""
    Z1 = np.asarray(zpair[0], dtype=float)
    Z2 = np.asarray(zpair[1], dtype=float)
    _norm_floor(Z1, Z2, eps)
    cross = Z1[..., 0] * Z2[..., 1] - Z1[..., 1] * Z2[..., 0]
    dot = np.sum(Z1 * Z2, axis=-1)
    return np.arctan2(np.abs(cross), np.abs(dot))


def alpha_angles(zpair, eps: float | None = None):
    """Angles in ``[0, pi/2]`` between each Jacobi vector and the x-axis line."""
    Z1 = np.asarray(zpair[0], dtype=float)
    Z2 = np.asarray(zpair[1], dtype=float)
    _norm_floor(Z1, Z2, eps)
    a1 = np.arctan2(np.abs(Z1[..., 1]), np.abs(Z1[..., 0]))
    a2 = np.arctan2(np.abs(Z2[..., 1]), np.abs(Z2[..., 0]))
    return a1, a2


def _check_alpha(*alphas):
    for a in alphas:
        a = np.asarray(a)
        if np.any(a < 0) or np.any(a > np.pi / 2):
            raise DomainError("alpha angles must lie in [0, pi/2]")


def delta_adjacent(alpha1, alpha2):
    """Line angle between the reflections of the two vectors into adjacent quadrants."""
    _check_alpha(alpha1, alpha2)
    s = np.asarray(alpha1) + np.asarray(alpha2)
    return np.minimum(s, np.pi - s)


def delta_opposite(alpha1, alpha2):
    """Line angle between the reflections into the same (or opposite) quadrants."""
    _check_alpha(alpha1, alpha2)
    return np.abs(np.asarray(alpha1) - np.asarray(alpha2))


# ---------------------------------------------------------------- quadrants


@dataclass(frozen=True)
class QuadrantTag:
    """Quadrant of one point.  ``index`` is the open quadrant, or ``None`` on an axis."""

    index: int | None
    on_x_axis: bool
    on_y_axis: bool
    members: frozenset

    @property
    def at_origin(self) -> bool:
        return self.on_x_axis and self.on_y_axis


def closed_membership(points, eps: float) -> np.ndarray:
    """Boolean ``(..., 4)`` array: membership in closed quadrants 1..4 with tolerance ``eps``."""
    p = np.asarray(points, dtype=float)
    x, y = p[..., 0], p[..., 1]
    return np.stack([(x >= -eps) & (y >= -eps), (x <= eps) & (y >= -eps),
                     (x <= eps) & (y <= eps), (x >= -eps) & (y <= eps)], axis=-1)


def quadrant_tag(point, eps: float = 0.0) -> QuadrantTag:
    x, y = (float(v) for v in point)
    members = frozenset(int(i) + 1 for i in np.flatnonzero(closed_membership((x, y), eps)))
    on_x, on_y = abs(y) <= eps, abs(x) <= eps
    index = None if (on_x or on_y) else next(iter(members))
    return QuadrantTag(index, on_x, on_y, members)


def adjacent_mask(Z1, Z2, eps: float) -> np.ndarray:
    """Samplewise test that ``Z1`` and ``Z2`` lie in two adjacent closed quadrants."""
    M1 = closed_membership(Z1, eps)
    M2 = closed_membership(Z2, eps)
    ok = np.zeros(M1.shape[:-1], dtype=bool)
    for i, j in ADJACENT_PAIRS:
        ok |= M1[..., i - 1] & M2[..., j - 1]
    return ok


def jacobi_scale(Z1, Z2) -> float:
    return float(max(np.max(np.linalg.norm(Z1, axis=-1)), np.max(np.linalg.norm(Z2, axis=-1))))


def reflect_path(zpath, targets):
    """Reflect every ``Z1`` sample into closed quadrant ``targets[0]`` and ``Z2`` into ``targets[1]``."""
    t1, t2 = (int(t) for t in targets)
    if (t1, t2) not in ADJACENT_PAIRS:
        raise NotAdjacent(f"quadrants {t1} and {t2} do not share an edge")
    Z1 = np.abs(np.asarray(zpath[0], dtype=float)) * QUADRANT_SIGNS[t1]
    Z2 = np.abs(np.asarray(zpath[1], dtype=float)) * QUADRANT_SIGNS[t2]
    return JacobiPair(Z1, Z2)


@dataclass
class QuadrantReport:
    membership1: np.ndarray  # (n, 4) closed-quadrant membership of Z1
    membership2: np.ndarray
    adjacent: np.ndarray  # (n,) samplewise adjacency
    on_axes1: np.ndarray
    on_axes2: np.ndarray
    case: str  # "a", "b", "c" or "violation"
    eps_axis: float

    @property
    def all_adjacent(self) -> bool:
        return bool(np.all(self.adjacent))

    def confined_to(self, q1: int, q2: int) -> bool:
        """True if every ``Z1`` sample is in closed quadrant ``q1`` and every ``Z2`` in ``q2``."""
        return bool(np.all(self.membership1[:, q1 - 1]) and np.all(self.membership2[:, q2 - 1]))


def classify_quadrants(zpath, eps_axis: float | None = None) -> QuadrantReport:
    """Samplewise quadrant tags and the three-way case classification of a Jacobi path.

    Case ``a``: neither vector touches an axis at interior samples; ``b``: both
    vectors lie on the axes at every sample; ``c``: ``Z2`` vanishes
    identically.  Anything else, including a non-adjacent sample, is
    ``"violation"``.
    """
    Z1 = np.atleast_2d(np.asarray(zpath[0], dtype=float))
    Z2 = np.atleast_2d(np.asarray(zpath[1], dtype=float))
    if eps_axis is None:
        eps_axis = EPS_AXIS * jacobi_scale(Z1, Z2)
    adj = adjacent_mask(Z1, Z2, eps_axis)
    ax1 = np.min(np.abs(Z1), axis=-1) <= eps_axis
    ax2 = np.min(np.abs(Z2), axis=-1) <= eps_axis
    if not adj.all():
        case = "violation"
    elif np.all(np.linalg.norm(Z2, axis=-1) <= eps_axis):
        case = "c"
    elif ax1.all() and ax2.all():
        case = "b"
    elif not (ax1[1:-1].any() or ax2[1:-1].any()):
        case = "a"
    else:
        case = "violation"
    return QuadrantReport(closed_membership(Z1, eps_axis), closed_membership(Z2, eps_axis),
                          adj, ax1, ax2, case, float(eps_axis))
