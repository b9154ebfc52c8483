"""Closed-form action levels and explicit test paths.

Lower bounds for paths through a total collision are compared with the
actions of explicit collision-free test paths: the Euler collapse, a
uniformly rotating retrograde path, and a tabulated prograde path that is
swept over a range of angles.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import integrate

from .action import DiscretePath, action_piecewise_linear
from .errors import DomainError
from .geometry import rotation

THETA0 = 0.053 * np.pi
J_TOL = 1e-10


def _positive(**kw):
    for name, v in kw.items():
        if not (np.isfinite(v) and v > 0):
            raise DomainError(f"{name} must be positive, got {v!r}")


def _angle(theta, lo=0.0, hi=np.pi / 2):
    if not (lo <= theta <= hi):
        raise DomainError(f"theta={theta!r} outside [{lo:.6g}, {hi:.6g}]")


# ---------------------------------------------------------------- level bounds


def total_collision_lower_bound(m: float, duration: float = 1.0) -> float:
    """Least action of a path on ``[0, duration]`` that reaches a total collision."""
    _positive(m=m, duration=duration)
    return 1.5 * m * np.pi ** (2 / 3) * (m + 2) / (1 + 2 * m) ** (1 / 3) * duration ** (1 / 3)


def euler_collapse_test_action(m: float, theta: float) -> float:
    """Action of the homographic Euler path that collapses while turning by ``pi/2 - theta``."""
    _positive(m=m)
    _angle(theta)
    return 1.5 * (np.pi / 2 - theta) ** (2 / 3) * (2 * m**3 * (2 + m / 2) ** 2) ** (1 / 3)


def g_poly(m: float) -> float:
    return 8 * (m + 2) ** 3 - (4 + m) ** 2 * (1 + 2 * m)


def g_poly_derivative(m: float) -> float:
    return 18 * m**2 + 62 * m + 56


def euler_action_m1(theta: float) -> float:
    """Euler collapse action for equal masses."""
    _angle(theta)
    return 3 * (5 / 4) ** (2 / 3) * (np.pi / 2 - theta) ** (2 / 3)


# ---------------------------------------------------------------- retrograde circular test path


def j_integral(s: float) -> float:
    """``int_0^1 dt / |1 - s exp(2 pi i t)|`` by adaptive quadrature."""
    if not (0.0 <= s < 1.0):
        raise DomainError(f"J(s) needs 0 <= s < 1, got {s!r}")
    # symmetric about t = 1/2
    val, _ = integrate.quad(lambda t: 1.0 / np.sqrt(1.0 - 2.0 * s * np.cos(2.0 * np.pi * t) + s * s),
                            0.0, 0.5, epsabs=J_TOL / 4, epsrel=1e-13, limit=200)
    return 2.0 * val


def _circular_constants(m, theta):
    M = 2.0 * m + 1.0
    phi = 4.0 * theta
    c = (phi**2 / M) ** (1 / 3)
    alpha = c / ((2 * m) ** (2 / 3) * (2 * np.pi) ** (2 / 3))
    return M, phi, c, alpha


def circular_test_nodes(m: float, theta: float, n_nodes: int, duration: float = 0.25):
    """Samples of the uniformly rotating retrograde test path re-timed to ``[0, duration]``.

    On its natural interval ``[0, 1/4]`` the path runs from the collinear
    retrograde family to the isosceles family at angle ``theta``: body 1 and
    the barycenter of bodies 2, 3 circle the origin with angular speed
    ``4 theta`` while the 2-3 binary turns ``2 pi`` slower.  Other durations
    use the Keplerian rescaling of positions by ``(4 duration)^(2/3)``.
    """
    M = 2.0 * m + 1.0
    phi = 4.0 * theta
    s = np.linspace(0.0, 0.25, n_nodes)
    Q = np.exp(1j * phi * s) / (M * phi) ** (2.0 / 3.0)
    R = np.exp(1j * (phi - 2.0 * np.pi) * s) / ((2.0 * m) ** (2.0 / 3.0) * (2.0 * np.pi) ** (2.0 / 3.0))
    x = np.stack([-2.0 * m * Q, Q - m * R, Q + m * R], axis=1) * (4.0 * duration) ** (2.0 / 3.0)
    return np.stack([x.real, x.imag], axis=-1)


def circular_kinetic(m: float, theta: float) -> float:
    """Kinetic energy (constant in time) of the circular test path on its natural interval."""
    M, phi, _, _ = _circular_constants(m, theta)
    q2 = (phi / M**2) ** (2 / 3)
    r2 = m**2 * (phi - 2 * np.pi) ** 2 / ((2 * m) ** (4 / 3) * (2 * np.pi) ** (4 / 3))
    # the cos(2 pi t) cross terms of bodies 2 and 3 cancel
    return m * (q2 + r2) + 0.5 * (2 * m) ** 2 * q2


def retrograde_test_action(m: float, theta: float) -> float:
    """Exact action of the circular test path over ``[0, 1/4]``."""
    _positive(m=m)
    if not (0.0 < theta <= np.pi / 2):
        raise DomainError("retrograde test path needs theta in (0, pi/2]")
    M, phi, c, alpha = _circular_constants(m, theta)
    pot = 2 ** (1 / 3) * m ** (5 / 3) * np.pi ** (2 / 3) + 2 * m * c * j_integral(m * alpha)
    return 0.25 * (circular_kinetic(m, theta) + pot)


def retrograde_m_alpha(m: float, theta: float) -> float:
    return m * _circular_constants(m, theta)[3]


def retrograde_test_action_bound(m: float) -> float:
    """Upper bound of :func:`retrograde_test_action` over all angles, using ``J(m alpha) < J(1/2)``."""
    _positive(m=m)
    M = 2 * m + 1
    return m / 4 * (np.pi**2 / M) ** (1 / 3) * (
        3 * 2 ** (-2 / 3) * m ** (2 / 3) * M ** (1 / 3) + (2 * j_integral(0.5) + 1) * 2 ** (2 / 3))


def ratio_bound(m: float) -> float:
    """Test-path bound divided by the total-collision level at duration 1/4."""
    return retrograde_test_action_bound(m) / total_collision_lower_bound(m, 0.25)


def ratio_constant() -> float:
    """Uniform bound of :func:`ratio_bound` on ``0 < m <= 1``."""
    return 1 / (2 * 3 ** (2 / 3)) + (2 * j_integral(0.5) + 1) * 2 ** (2 / 3) / (6 * 2 ** (1 / 3))


def g_tilde(m: float) -> float:
    """Bracket of :func:`f_diff`; ``f = (m/4) (pi^2/M)^(1/3) g_tilde``."""
    M = 2 * m + 1
    return (3 * 2 ** (-2 / 3) * m ** (2 / 3) * M ** (1 / 3) + (2 * j_integral(0.5) + 1) * 2 ** (2 / 3)
            - 3 * 2 ** (1 / 3) * (m + 2))


def f_diff(m: float) -> float:
    return retrograde_test_action_bound(m) - total_collision_lower_bound(m, 0.25)


@dataclass
class LevelReport:
    m: float
    theta: float
    duration: float
    a_total_lb: float
    a_test: float
    a_euler: Optional[float]
    margin: float
    g: float
    f: Optional[float]
    ratio: float
    ratio_constant: float
    checks: dict

    def to_dict(self) -> dict:
        return asdict(self)


def level_report(m: float, theta: float = THETA0, duration: float = 1.0) -> LevelReport:
    """All level quantities for one mass ratio, with the inequalities they are meant to satisfy.

    ``a_test`` is the Euler collapse action, compared with the total-collision
    level over ``duration``; ``ratio`` and ``f`` refer to the retrograde
    circular path at duration 1/4.
    """
    _positive(m=m, duration=duration)
    _angle(theta)
    lb = total_collision_lower_bound(m, duration)
    et = euler_collapse_test_action(m, theta) * duration ** (1 / 3)
    ae = euler_action_m1(theta) if m == 1 else None
    rc = ratio_constant()
    r = ratio_bound(m)
    f = f_diff(m) if m >= 1 else None
    checks = {
        "g_positive": g_poly(m) > 0,
        "total_exceeds_euler_test": lb > et,
        "retrograde_bound_below_total": retrograde_test_action_bound(m) < total_collision_lower_bound(m, 0.25),
        "ratio_below_one": r < 1.0,
    }
    if m <= 1:
        checks["ratio_below_constant"] = r <= rc + 1e-12
    if f is not None:
        checks["f_negative"] = f < 0
    return LevelReport(m=m, theta=theta, duration=duration, a_total_lb=lb, a_test=et, a_euler=ae,
                       margin=lb - et, g=g_poly(m), f=f, ratio=r, ratio_constant=rc,
                       checks={k: bool(v) for k, v in checks.items()})


# ---------------------------------------------------------------- tabulated prograde test path


@dataclass(frozen=True)
class TestPathTable:
    theta0: float
    times: np.ndarray  # (11,)
    q1: np.ndarray  # (11, 2)
    q2: np.ndarray  # (11, 2)
    m: float = 1.0

    __test__ = False  # not a pytest class

    def configs(self) -> np.ndarray:
        q3 = -(self.q1 + self.m * self.q2) / self.m
        return np.stack([self.q1, self.q2, q3], axis=1)


def _parse_theta(text: str) -> float:
    text = text.strip()
    if text.endswith("pi"):
        return float(text[:-2] or 1.0) * np.pi
    return float(text)


def load_table(source: Union[str, Path, None] = None) -> TestPathTable:
    """Read the tabulated test path (default: the copy shipped with the package)."""
    if source is None:
        text = resources.files("orbitmin").joinpath("data/equal_mass_test_path.txt").read_text()
    else:
        text = Path(source).read_text()
    theta0 = None
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            if key.strip() == "theta0":
                theta0 = _parse_theta(val)
            continue
        rows.append([float(x) for x in line.split()])
    arr = np.array(rows)
    if theta0 is None or arr.shape != (11, 5):
        raise DomainError("table needs a theta0 header and 11 rows of t q1x q1y q2x q2y")
    if not np.allclose(arr[:, 0], np.linspace(0, 1, 11), atol=1e-12, rtol=0):
        raise DomainError("table rows must sit at t = 0, 0.1, ..., 1")
    return TestPathTable(theta0, arr[:, 0], arr[:, 1:3], arr[:, 3:5])


def interpolated_test_path(table: TestPathTable, theta: float) -> DiscretePath:
    """Eleven-node test path whose last configuration is turned to the isosceles axis at ``theta``."""
    q = table.configs()
    q[-1] = q[-1] @ rotation(theta)
    return DiscretePath(q, table.m, 1.0)


def interpolated_test_action(table: TestPathTable, theta: float) -> float:
    return action_piecewise_linear(interpolated_test_path(table, theta))


def _sweep_row(args):
    table, theta = args
    a_test = interpolated_test_action(table, theta)
    a_euler = euler_action_m1(theta)
    return theta, a_test, a_euler, a_euler - a_test


@dataclass
class SweepResult:
    rows: np.ndarray  # (k, 4): theta, a_test, a_euler, gap

    @property
    def min_gap(self) -> float:
        return float(self.rows[:, 3].min())

    @property
    def argmin_theta(self) -> float:
        return float(self.rows[int(np.argmin(self.rows[:, 3])), 0])

    @property
    def all_positive(self) -> bool:
        return bool(np.all(self.rows[:, 3] > 0))


def sweep_grid(theta_lo: float, theta_hi: float, step: float) -> np.ndarray:
    if not step > 0:
        raise DomainError("step must be positive")
    if theta_hi < theta_lo:
        raise DomainError("theta_hi must not be below theta_lo")
    k = int(np.floor((theta_hi - theta_lo) / step + 1e-9))
    return theta_lo + step * np.arange(k + 1)


def sweep_compare(theta_lo: float = 0.0, theta_hi: float = 0.084 * np.pi, step: float = np.pi * 1e-3,
                  table: Optional[TestPathTable] = None, workers: int = 1) -> SweepResult:
    """Tabulate the Euler collapse action against the tabulated test path on a grid of angles."""
    table = load_table() if table is None else table
    grid = sweep_grid(theta_lo, theta_hi, step)
    args = [(table, th) for th in grid]
    if workers > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_row, args))
    else:
        rows = [_sweep_row(a) for a in args]
    return SweepResult(np.array(rows, dtype=float))
