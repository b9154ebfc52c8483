"""Command-line interface: ``orbitmin {minimize,sweep,levels,verify,extend}``.

Exit status is 0 on success, 1 when a solver fails or a verification does
not pass, and 2 for invalid arguments, configuration or input files.  Angles
may be given as multiples of pi (``0.053pi``, ``pi/2``) or in radians.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import io as oio
from . import levels
from .dynamics import extend_orbit, schubart_dichotomy
from .errors import CollisionEncountered, DomainError, NonConvergence, NotVerified, OrbitError
from .minimize import ProblemSpec, minimize, verify_minimizer

EXIT_OK, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2

_ANGLE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_angle(text) -> float:
    """``"0.053pi"`` -> ``0.053 * pi``; ``"pi/2"``; plain numbers are radians."""
    if isinstance(text, (int, float)):
        return float(text)
    mt = _ANGLE.match(str(text))
    if mt:
        coef = float(mt.group(1)) if mt.group(1) else 1.0
        div = float(mt.group(2)) if mt.group(2) else 1.0
        return coef * np.pi / div
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse angle {text!r}") from None


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; keys may use dashes or underscores."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DomainError(f"cannot read config {path}: {exc.strerror}") from None
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise DomainError(f"{path}:{no}: expected key = value")
        out[key.strip().lstrip("-").replace("-", "_")] = val.strip()
    return out


def _error_record(exc, code) -> int:
    rec = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("pair", "time", "line", "field"):
        v = getattr(exc, attr, None)
        if v is not None:
            rec[attr] = list(v) if isinstance(v, tuple) else v
    print(json.dumps(rec), file=sys.stderr)
    return code


def _xy_path(out: Path) -> Path:
    return out.with_suffix(".xy")


# ---------------------------------------------------------------- commands


def cmd_minimize(args) -> int:
    spec = ProblemSpec(m=args.m, theta=args.theta, variant=args.variant, n_nodes=args.nodes,
                       duration=args.duration, seed=args.seed, branch=args.branch)
    initial = None
    if args.strategy == "file":
        if not args.initial:
            raise DomainError("--strategy file needs --initial")
        rec = oio.read_orbit(args.initial)
        from .action import DiscretePath
        initial = DiscretePath(rec.positions, spec.m, float(rec.header.get("duration", 1.0)))
    try:
        report = minimize(spec, initial, strategy="auto" if args.strategy == "file" else args.strategy,
                          perturbation=args.perturbation, jitter=args.jitter, tol_grad=args.tol_grad,
                          max_iters=args.max_iters)
    except (CollisionEncountered, NonConvergence) as exc:
        if exc.report is not None and args.output:
            oio.write_orbit(args.output, oio.report_to_record(exc.report))
        return _error_record(exc, EXIT_SOLVER)
    if args.output:
        out = Path(args.output)
        oio.write_orbit(out, oio.report_to_record(report))
        oio.write_xy(_xy_path(out), report.path.nodes)
    print(f"action {report.action:.12g}")
    print(f"case {report.case}")
    print(f"min_distance {report.min_pairwise_distance:.6g}")
    print(f"el_residual {report.el_residual:.3e}")
    print(f"iterations {report.iterations} ({report.message})")
    if spec.is_schubart_angle:
        print(f"theta=pi/2 label {schubart_dichotomy(report)[0]}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    res = levels.sweep_compare(args.lo, args.hi, args.step, workers=args.workers)
    rows = [(th / np.pi, a, e, g) for th, a, e, g in res.rows]
    stream = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["theta_over_pi", "a_test", "a_euler", "gap"])
        for r in rows:
            w.writerow([oio.fmt(v) for v in r])
    finally:
        if args.output:
            stream.close()
    msg = (f"min gap {res.min_gap:.6e} at theta = {res.argmin_theta / np.pi:.6g} pi; "
           f"{'positive' if res.all_positive else 'NOT positive'} at all {len(rows)} points")
    print(msg, file=sys.stderr if not args.output else sys.stdout)
    return EXIT_OK


def cmd_levels(args) -> int:
    rep = levels.level_report(args.m, args.theta, args.duration)
    d = rep.to_dict()
    if args.json:
        text = json.dumps(d, indent=2, sort_keys=True)
        if args.json == "-":
            print(text)
        else:
            Path(args.json).write_text(text + "\n")
    if args.json != "-":
        for k in ("m", "theta", "duration", "a_total_lb", "a_test", "a_euler", "margin", "g", "f",
                  "ratio", "ratio_constant"):
            v = d[k]
            print(f"{k:16s} {'-' if v is None else format(v, '.10g')}")
        for k, ok in d["checks"].items():
            print(f"{'PASS' if ok else 'FAIL'} {k}")
    return EXIT_OK if all(d["checks"].values()) else EXIT_SOLVER


def cmd_verify(args) -> int:
    report = oio.record_to_report(oio.read_orbit(args.orbit))
    v = verify_minimizer(report, args.eps_axis, args.eps_coll)
    print(f"case {v.case}")
    print(f"adjacent {str(v.adjacent).lower()}")
    print(f"collision_free {str(v.collision_free).lower()} (min distance {v.min_distance:.6g}, "
          f"diameter {v.diameter:.6g})")
    print(f"branch_ok {'n/a' if v.branch_ok is None else str(v.branch_ok).lower()}")
    print(f"el_residual {report.el_residual:.3e}")
    for note in v.notes:
        print(f"note {note}")
    print("VERIFIED" if v.ok else "NOT VERIFIED")
    if args.xy:
        oio.write_xy(args.xy, report.path.nodes)
    return EXIT_OK if v.ok else EXIT_SOLVER


def cmd_extend(args) -> int:
    report = oio.record_to_report(oio.read_orbit(args.orbit))
    try:
        ext = extend_orbit(report, args.copies, check_integration=not args.no_integrate, force=args.force)
    except NotVerified as exc:
        return _error_record(exc, EXIT_SOLVER)
    label = f"periodic, {ext.period_domains} domains" if ext.periodic else "quasi-periodic"
    print(f"copies {ext.copies} ({label})")
    print(f"closure_gap {ext.closure_gap:.3e}")
    if ext.integrated_gap is not None:
        print(f"integrated_gap {ext.integrated_gap:.3e}")
    print(f"gluing_residual {ext.gluing_residual:.3e} (interior {ext.interior_residual:.3e})")
    if args.output:
        out = Path(args.output)
        oio.write_orbit(out, oio.trajectory_to_record(ext, report))
        oio.write_xy(_xy_path(out), ext.trajectory.positions)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orbitmin", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    mn = sub.add_parser("minimize", help="solve a free-boundary minimization problem")
    mn.add_argument("--config", help="key = value file with defaults for these flags")
    mn.add_argument("--variant", choices=("prograde", "retrograde"), default="prograde")
    mn.add_argument("--m", type=float, default=1.0)
    mn.add_argument("--theta", type=parse_angle, default=parse_angle("0.053pi"))
    mn.add_argument("--nodes", type=int, default=241)
    mn.add_argument("--duration", type=float, default=1.0)
    mn.add_argument("--seed", type=int, default=0)
    mn.add_argument("--branch", type=int, choices=(1, -1), default=1)
    mn.add_argument("--strategy", choices=("auto", "linear", "circular", "file"), default="auto")
    mn.add_argument("--initial", help="orbit file used by --strategy file")
    mn.add_argument("--perturbation", type=float, default=0.05)
    mn.add_argument("--jitter", type=float, default=0.0)
    mn.add_argument("--tol-grad", type=float, default=None)
    mn.add_argument("--max-iters", type=int, default=50000)
    mn.add_argument("-o", "--output", help="orbit file to write (an .xy plot file is written alongside)")
    mn.set_defaults(func=cmd_minimize)

    sw = sub.add_parser("sweep", help="compare the tabulated test path with the Euler action")
    sw.add_argument("--config")
    sw.add_argument("--lo", type=parse_angle, default=0.0)
    sw.add_argument("--hi", type=parse_angle, default=parse_angle("0.084pi"))
    sw.add_argument("--step", type=parse_angle, default=parse_angle("0.001pi"))
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("-o", "--output", help="CSV file (default: stdout)")
    sw.set_defaults(func=cmd_sweep)

    lv = sub.add_parser("levels", help="print level estimates and their inequalities")
    lv.add_argument("--config")
    lv.add_argument("--m", type=float, default=1.0)
    lv.add_argument("--theta", type=parse_angle, default=parse_angle("0.053pi"))
    lv.add_argument("--duration", type=float, default=1.0)
    lv.add_argument("--json", help="write the report as JSON to this file ('-' for stdout)")
    lv.set_defaults(func=cmd_levels)

    vf = sub.add_parser("verify", help="check the invariants of a stored minimizer")
    vf.add_argument("orbit")
    vf.add_argument("--config")
    vf.add_argument("--eps-axis", type=float, default=None)
    vf.add_argument("--eps-coll", type=float, default=None)
    vf.add_argument("--xy", help="plot data file")
    vf.set_defaults(func=cmd_verify)

    ex = sub.add_parser("extend", help="extend a stored minimizer by its symmetries")
    ex.add_argument("orbit")
    ex.add_argument("--config")
    ex.add_argument("--copies", type=int, default=None)
    ex.add_argument("--no-integrate", action="store_true")
    ex.add_argument("--force", action="store_true", help="extend even if verification fails")
    ex.add_argument("-o", "--output", help="trajectory file (an .xy plot file is written alongside)")
    ex.set_defaults(func=cmd_extend)
    return p


def _apply_config(parser, argv):
    """Parse twice: values from ``--config`` become defaults that explicit flags override."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    values = read_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        if key not in known or key in ("config", "help"):
            raise DomainError(f"{args.config}: unknown setting {key!r}")
        act = known[key]
        if isinstance(act, argparse._StoreTrueAction):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
            continue
        try:
            val = act.type(raw) if act.type else raw
        except (ValueError, argparse.ArgumentTypeError):
            raise DomainError(f"{args.config}: bad value {raw!r} for {key!r}") from None
        if act.choices is not None and val not in act.choices:
            raise DomainError(f"{args.config}: {key} must be one of {list(act.choices)}")
        defaults[key] = val
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except DomainError as exc:
        return _error_record(exc, EXIT_USAGE)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DomainError as exc:
        return _error_record(exc, EXIT_USAGE)
    except OrbitError as exc:
        return _error_record(exc, EXIT_SOLVER)


if __name__ == "__main__":
    sys.exit(main())
