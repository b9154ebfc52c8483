"""Plain-text orbit files.

An orbit file is a ``key: value`` header, a ``positions:`` line, and one row
``t q1x q1y q2x q2y q3x q3y`` per node.  Trajectories add a ``velocities:``
block with rows ``t v1x v1y v2x v2y v3x v3y``.  Numbers are written with 17
significant digits, so reading and writing a file reproduces it byte for byte.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DomainError

MAGIC = "# orbitmin orbit file v1"
FLOAT_KEYS = ("m", "theta", "theta_over_pi", "duration", "action", "a1", "a2", "b1", "b2",
              "min_distance", "el_residual", "closure_gap", "integrated_gap")
INT_KEYS = ("n_nodes", "iterations", "copies", "branch", "seed", "period_domains")


class OrbitFileError(DomainError):
    def __init__(self, message, line=None, field=None):
        loc = f"line {line}: " if line is not None else ""
        super().__init__(loc + message + (f" (field {field!r})" if field else ""))
        self.line = line
        self.field = field


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


@dataclass
class OrbitRecord:
    header: dict
    times: np.ndarray
    positions: np.ndarray
    velocities: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)


def _rows(times, arr):
    flat = np.asarray(arr, dtype=float).reshape(len(times), -1)
    return ["\t".join(fmt(v) for v in (t, *row)) for t, row in zip(times, flat)]


def dumps(rec: OrbitRecord) -> str:
    lines = [MAGIC]
    for k, v in rec.header.items():
        lines.append(f"{k}: {fmt(v)}")
    lines.append("positions:")
    lines += _rows(rec.times, rec.positions)
    if rec.velocities is not None:
        lines.append("velocities:")
        lines += _rows(rec.times, rec.velocities)
    return "\n".join(lines) + "\n"


def _value(key, text, lineno):
    text = text.strip()
    try:
        if key in INT_KEYS:
            return int(text)
        if key in FLOAT_KEYS:
            return float(text)
    except ValueError:
        raise OrbitFileError(f"cannot parse {text!r}", lineno, key) from None
    if text in ("true", "false"):
        return text == "true"
    return text


def _block(lines, start, name):
    rows = []
    for off, line in enumerate(lines):
        parts = line.split()
        if len(parts) != 7:
            raise OrbitFileError(f"{name} row needs 7 fields, found {len(parts)}", start + off)
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise OrbitFileError(f"non-numeric {name} value", start + off) from None
    if not rows:
        raise OrbitFileError(f"empty {name} block", start)
    arr = np.array(rows)
    if not np.all(np.isfinite(arr)):
        raise OrbitFileError(f"non-finite {name} value", start)
    return arr


def loads(text: str) -> OrbitRecord:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise OrbitFileError("missing orbit file header line", 1)
    header = {}
    i = 1
    while i < len(lines) and lines[i].strip() != "positions:":
        line = lines[i]
        if line.strip():
            key, sep, val = line.partition(":")
            if not sep:
                raise OrbitFileError("expected 'key: value'", i + 1)
            header[key.strip()] = _value(key.strip(), val, i + 1)
        i += 1
    if i == len(lines):
        raise OrbitFileError("no 'positions:' block", i)
    try:
        j = next(k for k in range(i + 1, len(lines)) if lines[k].strip() == "velocities:")
    except StopIteration:
        j = len(lines)
    pos = _block([ln for ln in lines[i + 1:j]], i + 2, "positions")
    vel = None
    if j < len(lines):
        vel = _block(lines[j + 1:], j + 2, "velocities")
        if vel.shape[0] != pos.shape[0] or np.any(vel[:, 0] != pos[:, 0]):
            raise OrbitFileError("velocity block does not match the position times", j + 1)
    times = pos[:, 0]
    if np.any(np.diff(times) <= 0):
        raise OrbitFileError("times must be strictly increasing", i + 2, "t")
    n = header.get("n_nodes")
    if n is not None and n != len(times):
        raise OrbitFileError(f"header says {n} nodes, found {len(times)}", None, "n_nodes")
    return OrbitRecord(header, times, pos[:, 1:].reshape(-1, 3, 2),
                       None if vel is None else vel[:, 1:].reshape(-1, 3, 2))


def write_orbit(path, rec: OrbitRecord) -> None:
    Path(path).write_text(dumps(rec))


def read_orbit(path) -> OrbitRecord:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OrbitFileError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text)


def write_xy(path, positions) -> None:
    """One two-column ``x y`` series per body, separated by blank lines."""
    q = np.asarray(positions, dtype=float)
    out = []
    for b in range(q.shape[1]):
        out.append(f"# body {b + 1}")
        out += [f"{fmt(x)} {fmt(y)}" for x, y in q[:, b]]
        out.append("")
    Path(path).write_text("\n".join(out))


# ---------------------------------------------------------------- reports <-> records


def report_header(report) -> dict:
    spec = report.spec
    start, end = report.path.start, report.path.end
    h = {
        "variant": spec.variant,
        "m": float(spec.m),
        "theta_over_pi": float(spec.theta / np.pi),
        "theta": float(spec.theta),
        "branch": int(spec.branch),
        "n_nodes": int(report.path.n_nodes),
        "duration": float(report.path.duration),
        "action": float(report.action),
        "case": report.case,
        "a1": float(start.a1), "a2": float(start.a2),
        "b1": float(end.b1), "b2": float(end.b2),
        "min_distance": float(report.min_pairwise_distance),
        "el_residual": float(report.el_residual),
        "converged": bool(report.converged),
        "iterations": int(report.iterations),
    }
    return h


def report_to_record(report) -> OrbitRecord:
    return OrbitRecord(report_header(report), report.path.times, report.path.nodes)


def record_to_report(rec: OrbitRecord):
    """Rebuild a minimizer report (recomputing all diagnostics) from an orbit file."""
    from . import geometry as geo
    from .action import DiscretePath
    from .minimize import ProblemSpec, build_report

    h = rec.header
    for key in ("variant", "m", "theta", "duration"):
        if key not in h:
            raise OrbitFileError("missing header field", None, key)
    try:
        spec = ProblemSpec(m=h["m"], theta=h["theta"], variant=h["variant"], n_nodes=len(rec.times),
                           duration=h["duration"], branch=h.get("branch", 1))
    except DomainError as exc:
        raise OrbitFileError(str(exc)) from None
    h_expected = h["duration"] / (len(rec.times) - 1)
    if not np.allclose(np.diff(rec.times), h_expected, rtol=1e-9, atol=0):
        raise OrbitFileError("nodes must be uniformly spaced over the duration", None, "t")
    try:
        start = geo.fit_boundary(rec.positions[0], spec.start_template(), spec.m)
        end = geo.fit_boundary(rec.positions[-1], spec.end_template(), spec.m)
        path = DiscretePath(rec.positions, spec.m, spec.duration, start=start, end=end)
    except DomainError as exc:
        raise OrbitFileError(str(exc)) from None
    if not path.check_boundaries(1e-9):
        raise OrbitFileError("end nodes do not lie in the boundary families")

    class _Res:
        converged = bool(h.get("converged", True))
        iterations = int(h.get("iterations", 0))
        message = "read from file"
        history = []

    return build_report(spec, path, _Res)


def trajectory_to_record(ext, report) -> OrbitRecord:
    header = {
        "variant": report.spec.variant,
        "m": float(report.spec.m),
        "theta_over_pi": float(report.spec.theta / np.pi),
        "theta": float(report.spec.theta),
        "copies": int(ext.copies),
        "periodic": bool(ext.periodic),
        "period_domains": int(ext.period_domains) if ext.period_domains is not None else -1,
        "closure_gap": float(ext.closure_gap),
        "integrated_gap": float(ext.integrated_gap) if ext.integrated_gap is not None else float("nan"),
        "n_nodes": len(ext.trajectory.times),
    }
    return OrbitRecord(header, ext.trajectory.times, ext.trajectory.positions, ext.trajectory.velocities)
