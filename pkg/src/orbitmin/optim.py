"""Limited-memory BFGS with projection onto simple lower bounds and backtracking line search.

Objective functions may raise :class:`~orbitmin.errors.CollisionSingularity`
(or return a non-finite value) for trial points too close to a collision; the
line search then halves the step.  No smoothing of the objective is ever done.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import CollisionSingularity


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    converged: bool
    message: str
    history: list = field(default_factory=list)
    last_rejection: object = None


def projected_gradient(x, g, lower):
    pg = g.copy()
    at_bound = (x <= lower) & (g > 0)
    pg[at_bound] = 0.0
    return pg


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return q


def lbfgs_bounded(fun, x0, lower=None, *, tol=1e-8, max_iter=50000, memory=20, c1=1e-4,
                  accept=None, stall_iters=200, stall_tol=None, callback=None, eps_f=1e-13):
    """Minimize ``fun(x) -> (value, gradient)`` subject to ``x >= lower``.

    ``lower`` holds ``-inf`` for unbounded coordinates.  ``accept(x)`` may
    veto a trial point (returning the reason, or ``None`` to accept), which the
    line search treats like a collision.  Convergence means the infinity norm
    of the projected gradient is below ``tol``; a run whose relative decrease
    stays below round-off for ``stall_iters`` iterations stops and counts as
    converged when that norm is below ``stall_tol`` (default ``100 * tol``).
    Once the decrease of a trial step is below ``eps_f`` relative to the
    objective, the step is accepted under the approximate Wolfe conditions of
    Hager and Zhang, which use only the directional derivative.
    """
    x = np.array(x0, dtype=float)
    lower = np.full_like(x, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    x = np.maximum(x, lower)
    stall_tol = 100 * tol if stall_tol is None else stall_tol
    f, g = fun(x)
    history = [f]
    pairs: deque = deque(maxlen=memory)
    stalled = 0
    best_g = np.inf
    rejection = None
    for it in range(1, max_iter + 1):
        pg = projected_gradient(x, g, lower)
        if np.max(np.abs(pg)) < tol:
            return OptimResult(x, f, g, it - 1, True, "projected gradient below tolerance", history)
        free = pg != 0.0
        d = -_two_loop(np.where(free, g, 0.0), list(pairs))
        d[~free] = 0.0
        slope = np.dot(g, d)
        if not slope < 0:
            pairs.clear()
            d = -pg
            slope = np.dot(g, d)
        step = 1.0 if pairs else min(1.0, 1.0 / max(np.max(np.abs(pg)), 1e-300))
        accepted = False
        for _ in range(80):
            xt = np.maximum(x + step * d, lower)
            reason = accept(xt) if accept is not None else None
            if reason is None:
                try:
                    ft, gt = fun(xt)
                except CollisionSingularity as exc:
                    reason = exc
                else:
                    if not np.isfinite(ft):
                        reason = "non-finite objective"
                    elif ft <= f + c1 * np.dot(g, xt - x):
                        accepted = True
                        break
                    elif ft <= f + eps_f * abs(f):
                        # approximate Wolfe test: the decrease is below round-off,
                        # so judge the step by the directional derivative instead
                        dt = np.dot(gt, xt - x) / step
                        if 0.9 * slope <= dt <= (2 * 0.1 - 1) * slope:
                            accepted = True
                            break
            if reason is not None:
                rejection = reason
            step *= 0.5
        if not accepted:
            ok = np.max(np.abs(pg)) < stall_tol
            return OptimResult(x, f, g, it, ok, "line search failed", history, rejection)
        s, y = xt - x, gt - g
        sy = np.dot(s, y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
        decrease = f - ft
        x, f, g = xt, ft, gt
        history.append(f)
        if callback is not None:
            callback(x, f)
        gnorm = np.max(np.abs(projected_gradient(x, g, lower)))
        if decrease > 4e-16 * abs(f) or gnorm < 0.5 * best_g:
            stalled = 0
        else:
            stalled += 1
        best_g = min(best_g, gnorm)
        if stalled >= stall_iters:
            ok = np.max(np.abs(projected_gradient(x, g, lower))) < stall_tol
            return OptimResult(x, f, g, it, ok, "stalled at round-off", history, rejection)
    pg = projected_gradient(x, g, lower)
    ok = np.max(np.abs(pg)) < tol
    return OptimResult(x, f, g, max_iter, ok, "maximum iterations reached", history, rejection)
