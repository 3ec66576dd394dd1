"""Multi-start augmented-Lagrangian solver for small constrained problems.

This is the shared engine behind metric projection and lower-level
minimization.  Each start runs an outer loop of multiplier updates with a
tenfold penalty increase whenever feasibility stalls; the inner
minimization is a damped Newton method whose Hessian comes from finite
differences of the augmented-Lagrangian gradient (constraint gradients
are exact, no second derivatives of the model are required), with a
gradient-descent fallback and Armijo backtracking.

Determinism: start points come from a fixed-seed low-discrepancy set, so
repeated calls with identical inputs produce identical iterates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .numerics import unit_ball_points
from .system import ParametricSystem

__all__ = [
    "SolverOptions",
    "LocalSolve",
    "solve_multistart",
    "kkt_polish_projection",
    "kkt_polish_objective",
    "restore_feasibility",
]

_START_SEED = 1729  # fixed: start layout is part of the deterministic contract
_DOMAIN_FAULTS = (ZeroDivisionError, ValueError, OverflowError, FloatingPointError)


@dataclass(frozen=True)
class SolverOptions:
    tol_feas: float = 1e-8
    tol_stat: float = 1e-7
    n_starts: int = 8
    max_outer: int = 200
    max_inner: int = 500
    rho0: float = 10.0
    rho_growth: float = 10.0
    rho_max: float = 1e12
    start_radius: float | None = None  # default: 10 * (1 + |anchor|)


@dataclass(frozen=True)
class LocalSolve:
    """Outcome of one multi-start solve.

    ``candidates`` holds (objective, x) for every start that reached
    feasibility, so callers can recover the set of distinct local minima
    rather than just the winner.
    """

    x: np.ndarray
    objective: float
    feas_residual: float
    stat_residual: float
    n_outer: int
    converged: bool
    n_starts_converged: int
    candidates: tuple[tuple[float, tuple[float, ...]], ...] = ()


def _constraint_data(sys: ParametricSystem, p: Sequence[float]):
    p = tuple(float(t) for t in p)
    fns = sys.compiled_values_gradx()
    m = sys.n_ineq

    def all_values_grads(x: np.ndarray):
        xt = tuple(x)
        vals = np.empty(len(fns))
        grads = np.empty((len(fns), len(xt)))
        for i, fn in enumerate(fns):
            v, g = fn(p, xt)
            vals[i] = v
            grads[i] = g
        return vals, grads

    def residual_of(vals: np.ndarray) -> float:
        r = 0.0
        if m:
            r = max(r, float(np.max(vals[:m])))
        if len(vals) > m:
            r = max(r, float(np.max(np.abs(vals[m:]))))
        return max(r, 0.0)

    return all_values_grads, residual_of, m


def _al_value_grad_factory(objective_vg, cons_vg, m: int, lam: np.ndarray, mu: np.ndarray, rho: float):
    def al(x: np.ndarray):
        try:
            fval, fgrad = objective_vg(x)
            vals, grads = cons_vg(x)
        except _DOMAIN_FAULTS:
            return math.inf, None
        if not np.isfinite(fval) or not np.all(np.isfinite(vals)):
            return math.inf, None
        val = fval
        grad = np.array(fgrad, dtype=float)
        for i in range(m):
            t = lam[i] + rho * vals[i]
            if t > 0.0:
                val += (t * t - lam[i] * lam[i]) / (2.0 * rho)
                grad += t * grads[i]
            else:
                val -= lam[i] * lam[i] / (2.0 * rho)
        for j in range(m, len(vals)):
            mj = mu[j - m]
            val += mj * vals[j] + 0.5 * rho * vals[j] * vals[j]
            grad += (mj + rho * vals[j]) * grads[j]
        return val, grad

    return al


def _minimize_inner(al, x0: np.ndarray, tol_g: float, max_inner: int) -> tuple[np.ndarray, float, np.ndarray | None]:
    x = np.array(x0, dtype=float)
    fval, grad = al(x)
    if grad is None:
        return x, fval, None
    n = len(x)
    identity = np.eye(n)
    for _ in range(max_inner):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol_g:
            break
        # FD Hessian of the AL gradient; symmetrized.
        h_step = 1e-6 * (1.0 + float(np.max(np.abs(x))))
        hess = np.empty((n, n))
        fd_ok = True
        for j in range(n):
            xj = x.copy()
            xj[j] += h_step
            _, gj = al(xj)
            if gj is None:
                fd_ok = False
                break
            hess[:, j] = (gj - grad) / h_step
        direction = None
        if fd_ok:
            hess = 0.5 * (hess + hess.T)
            for nu in (0.0, 1e-8, 1e-4, 1.0, 1e2, 1e4, 1e6):
                try:
                    cand = np.linalg.solve(hess + nu * identity, -grad)
                except np.linalg.LinAlgError:
                    continue
                if np.all(np.isfinite(cand)) and float(grad @ cand) < -1e-14 * gnorm * (np.linalg.norm(cand) + 1e-30):
                    direction = cand
                    break
        if direction is None:
            direction = -grad
        # Armijo backtracking
        t = 1.0
        slope = float(grad @ direction)
        moved = False
        for _ in range(40):
            x_new = x + t * direction
            f_new, g_new = al(x_new)
            if g_new is not None and f_new <= fval + 1e-4 * t * slope:
                x, fval, grad = x_new, f_new, g_new
                moved = True
                break
            t *= 0.5
        if not moved:
            break
    return x, fval, grad


def _single_start(
    objective_vg,
    cons_vg,
    residual_of,
    m: int,
    n_eq: int,
    x0: np.ndarray,
    opts: SolverOptions,
    tol_feas_break: float,
    tol_stat_break: float,
    polish=None,
) -> tuple[np.ndarray, float, float, int]:
    """Run the outer AL loop from one start.

    The break tolerances may be looser than the final acceptance
    tolerances when a downstream polish step will sharpen the iterate;
    the polish is also attempted whenever the iterate is crudely
    localized, which short-circuits the slow multiplier grind on
    ill-conditioned (thin or nearly degenerate) feasible sets.
    Returns (x, feasibility residual, stationarity residual, outer count).
    """
    lam = np.zeros(m)
    mu = np.zeros(n_eq)
    rho = opts.rho0
    x = np.array(x0, dtype=float)
    prev_viol = math.inf
    stat = math.inf
    outer_used = 0
    stalled = 0
    for outer in range(opts.max_outer):
        outer_used = outer + 1
        tol_inner = max(1e-2 * tol_stat_break, 1e-2 * (0.2**outer))
        al = _al_value_grad_factory(objective_vg, cons_vg, m, lam, mu, rho)
        x, _, grad = _minimize_inner(al, x, tol_inner, opts.max_inner)
        if grad is None:
            # domain fault at this iterate: restart from anchor shrunk toward origin
            return x, math.inf, math.inf, outer_used
        try:
            vals, _ = cons_vg(x)
        except _DOMAIN_FAULTS:
            return x, math.inf, math.inf, outer_used
        viol = residual_of(vals)
        stat = float(np.linalg.norm(grad))
        # first-order multiplier updates
        for i in range(m):
            lam[i] = max(0.0, lam[i] + rho * vals[i])
        for j in range(n_eq):
            mu[j] += rho * vals[m + j]
        if viol <= tol_feas_break and stat <= tol_stat_break:
            break
        if polish is not None and viol <= 1e-3 and stat <= 1e-2:
            refined = polish(x)
            if refined is not None:
                try:
                    vals_r, _ = cons_vg(refined)
                    viol_r = residual_of(vals_r)
                except _DOMAIN_FAULTS:
                    viol_r = math.inf
                if viol_r <= opts.tol_feas:
                    return refined, viol_r, 0.0, outer_used
        if viol > 0.25 * prev_viol:
            if rho >= opts.rho_max:
                stalled += 1
                if stalled >= 8 and viol > tol_feas_break:
                    break  # no further progress at maximum penalty
            rho = min(rho * opts.rho_growth, opts.rho_max)
        prev_viol = viol
    return x, viol, stat, outer_used


def make_starts(anchor: np.ndarray, opts: SolverOptions) -> list[np.ndarray]:
    """Anchor first, then fixed low-discrepancy points in the search ball."""
    anchor = np.asarray(anchor, dtype=float)
    radius = opts.start_radius
    if radius is None:
        radius = 10.0 * (1.0 + float(np.linalg.norm(anchor)))
    starts = [anchor]
    if opts.n_starts > 1:
        extra = unit_ball_points(len(anchor), opts.n_starts - 1, _START_SEED)
        starts.extend(anchor + radius * row for row in extra)
    return starts


def solve_multistart(
    sys: ParametricSystem,
    p: Sequence[float],
    objective_vg: Callable[[np.ndarray], tuple[float, np.ndarray]],
    anchor: np.ndarray,
    opts: SolverOptions = SolverOptions(),
    polish: Callable[[np.ndarray], np.ndarray | None] | None = None,
) -> LocalSolve:
    """Minimize an objective over the feasible set of ``sys`` at ``p``.

    ``objective_vg`` maps x to (value, gradient).  ``polish``, when given,
    may refine a candidate solution (returning None to decline).  The best
    feasible candidate wins; exact ties in objective value are broken by
    lexicographically smallest x so reruns are reproducible.
    """
    cons_vg, residual_of, m = _constraint_data(sys, p)
    n_eq = sys.n_eq
    # With a polish available the AL phase only needs to localize the
    # solution; Newton refinement recovers the final accuracy cheaply and
    # avoids grinding at extreme penalty values.
    if polish is not None:
        tol_feas_break = max(opts.tol_feas, 1e-6)
        tol_stat_break = max(opts.tol_stat, 1e-5)
    else:
        tol_feas_break = opts.tol_feas
        tol_stat_break = opts.tol_stat
    best: tuple[float, tuple, np.ndarray, float, float] | None = None
    candidates: list[tuple[float, tuple[float, ...]]] = []
    n_converged = 0
    outer_total = 0
    for x0 in make_starts(anchor, opts):
        x, viol, stat, outers = _single_start(
            objective_vg,
            cons_vg,
            residual_of,
            m,
            n_eq,
            x0,
            opts,
            tol_feas_break,
            tol_stat_break,
            polish=polish,
        )
        outer_total = max(outer_total, outers)
        if polish is not None and np.all(np.isfinite(x)):
            refined = polish(x)
            if refined is not None:
                try:
                    vals, _ = cons_vg(refined)
                    viol_r = residual_of(vals)
                except _DOMAIN_FAULTS:
                    viol_r = math.inf
                if viol_r <= max(viol, opts.tol_feas):
                    x, viol = refined, viol_r
        if viol > opts.tol_feas or not np.all(np.isfinite(x)):
            continue
        n_converged += 1
        try:
            fval, fgrad = objective_vg(x)
            stat = _stationarity(fgrad, cons_vg, m, x, opts)
        except _DOMAIN_FAULTS:
            continue
        key = (fval, tuple(x))
        candidates.append(key)
        if best is None or key < (best[0], best[1]):
            best = (fval, tuple(x), x, viol, stat)
    if best is None:
        anchor = np.asarray(anchor, dtype=float)
        try:
            vals, _ = cons_vg(anchor)
            viol = residual_of(vals)
        except _DOMAIN_FAULTS:
            viol = math.inf
        return LocalSolve(
            x=anchor,
            objective=math.nan,
            feas_residual=viol,
            stat_residual=math.inf,
            n_outer=outer_total,
            converged=False,
            n_starts_converged=0,
        )
    fval, _, x, viol, stat = best
    return LocalSolve(
        x=x,
        objective=fval,
        feas_residual=viol,
        stat_residual=stat,
        n_outer=outer_total,
        converged=True,
        n_starts_converged=n_converged,
        candidates=tuple(candidates),
    )


def _stationarity(fgrad, cons_vg, m, x, opts: SolverOptions) -> float:
    """Norm of the objective gradient projected off the active constraint
    gradients: a cheap first-order optimality proxy."""
    vals, grads = cons_vg(x)
    scale = 1.0 + float(np.max(np.abs(vals))) if len(vals) else 1.0
    eta = 1e-6 * scale
    rows = [grads[i] for i in range(m) if abs(vals[i]) <= eta]
    rows.extend(grads[m:])
    g = np.asarray(fgrad, dtype=float)
    if not rows:
        return float(np.linalg.norm(g))
    a = np.vstack(rows).T  # columns are constraint gradients
    coef, *_ = np.linalg.lstsq(a, -g, rcond=None)
    return float(np.linalg.norm(g + a @ coef))


# ---------------------------------------------------------------------------
# Polish helpers
# ---------------------------------------------------------------------------


def kkt_polish_projection(
    sys: ParametricSystem,
    p: Sequence[float],
    v: np.ndarray,
    x: np.ndarray,
    tol_feas: float,
    max_steps: int = 30,
) -> np.ndarray | None:
    """Refine a near-projection by Newton steps on the KKT system of a
    working set of constraints, solved by least squares.

    Working sets are seeded from activity bands of increasing width at
    ``x`` (a crude iterate may misread which constraints bind); rows whose
    inequality multipliers come out negative are dropped and the solve is
    repeated.  Among band candidates that end up feasible for the full
    system, the one closest to ``v`` wins.  Declines (returns None) when
    no candidate reaches feasibility.  Closeness to the true projection
    is not enforced here: the multi-start selection compares candidates
    by objective value, so a polish that lands on a farther feasible
    point simply loses that comparison.
    """
    p = tuple(float(t) for t in p)
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    fns = sys.compiled_values_gradx()
    m = sys.n_ineq
    try:
        vals = np.array([fn(p, tuple(x))[0] for fn in fns])
    except _DOMAIN_FAULTS:
        return None
    scale = 1.0 + float(np.max(np.abs(vals))) if len(vals) else 1.0
    eq_rows = list(range(m, sys.n))
    best: np.ndarray | None = None
    best_d = math.inf
    seen: set[tuple[int, ...]] = set()
    for band in (1e-6, 1e-5, 1e-4, 1e-3):
        active = [i for i in range(m) if abs(vals[i]) <= band * scale]
        key = tuple(active)
        if key in seen:
            continue
        seen.add(key)
        y = _polish_working_set(fns, m, p, v, x, active, eq_rows, scale, max_steps)
        if y is None:
            continue
        try:
            if _full_residual(fns, m, p, y) > tol_feas:
                continue
        except _DOMAIN_FAULTS:
            continue
        d = float(np.linalg.norm(y - v))
        if d < best_d:
            best, best_d = y, d
    return best


def _polish_working_set(
    fns,
    m: int,
    p: tuple,
    v: np.ndarray,
    x: np.ndarray,
    active: list[int],
    eq_rows: list[int],
    scale: float,
    max_steps: int,
) -> np.ndarray | None:
    """Project ``v`` onto the surface where the working-set constraints
    vanish, dropping working inequalities whose multipliers turn negative."""
    active = list(active)
    for _ in range(len(active) + 1):
        rows = active + eq_rows
        if not rows:
            return v.copy()
        y = np.array(x, dtype=float)
        J = np.empty((len(rows), len(y)))
        for _ in range(max_steps):
            try:
                hv = np.empty(len(rows))
                for k, i in enumerate(rows):
                    hv[k], J[k] = fns[i](p, tuple(y))
            except _DOMAIN_FAULTS:
                return None
            # y+ = argmin |y+ - v| s.t. h + J (y+ - y) = 0.  Solved as a
            # min-norm step from v directly on J (a normal-equations
            # solve would square the working set's condition number and
            # lose feasibility on thin sets).
            b = -(hv + J @ (v - y))
            w, *_ = np.linalg.lstsq(J, b, rcond=None)
            y_new = v + w
            if not np.all(np.isfinite(y_new)):
                return None
            converged = np.linalg.norm(y_new - y) <= 1e-14 * (1.0 + np.linalg.norm(y))
            y = y_new
            if converged or float(np.max(np.abs(hv))) <= 1e-14 * scale:
                break
        refined = _kkt_refine(fns, rows, p, v, y)
        if refined is not None:
            y = refined
            try:
                for k, i in enumerate(rows):
                    hv[k], J[k] = fns[i](p, tuple(y))
            except _DOMAIN_FAULTS:
                return None
        # Multipliers of the linearized projection: v - y = J^T lam.
        # Drop one working inequality at a time; with a rank-deficient
        # working set the min-norm multipliers can be jointly negative
        # even though a sign-feasible representation exists, so dropping
        # all of them at once overshoots.
        lam, *_ = np.linalg.lstsq(J.T, v - y, rcond=None)
        negative = [k for k in range(len(active)) if lam[k] < -1e-10 * (1.0 + float(np.max(np.abs(lam))))]
        if not negative:
            return y
        worst = min(negative, key=lambda k: lam[k])
        active = [i for k, i in enumerate(active) if k != worst]
    return None


def _kkt_refine(fns, rows, p: tuple, v: np.ndarray, y0: np.ndarray) -> np.ndarray | None:
    """Newton on the projection KKT system of a fixed working set.

    The Gauss-Newton sweep above ignores constraint curvature, so its
    tangential error contracts only at a linear rate that degrades (and
    can diverge) as ``v`` moves away from the surface.  This endgame
    differentiates the stationarity residual exactly, approximating the
    multiplier-weighted curvature term by finite differences of the
    constraint gradients, and converges quadratically from the
    already-localized iterate.  Returns None when it cannot improve.
    """
    dim = len(y0)
    n_rows = len(rows)

    def values_jac(y: np.ndarray):
        hv = np.empty(n_rows)
        J = np.empty((n_rows, dim))
        for k, i in enumerate(rows):
            hv[k], J[k] = fns[i](p, tuple(y))
        return hv, J

    y = np.array(y0, dtype=float)
    try:
        hv, J = values_jac(y)
    except _DOMAIN_FAULTS:
        return None
    lam, *_ = np.linalg.lstsq(J.T, v - y, rcond=None)

    def residual(y, lam, hv, J):
        return np.concatenate([y - v + J.T @ lam, hv])

    F = residual(y, lam, hv, J)
    best_y, best_norm = y.copy(), float(np.linalg.norm(F))
    for _ in range(12):
        eps = 1e-7 * (1.0 + float(np.linalg.norm(y)))
        weighted = J.T @ lam
        curv = np.empty((dim, dim))
        try:
            for j in range(dim):
                y_pert = y.copy()
                y_pert[j] += eps
                _, J_pert = values_jac(y_pert)
                curv[:, j] = (J_pert.T @ lam - weighted) / eps
        except _DOMAIN_FAULTS:
            break
        kkt = np.block(
            [
                [np.eye(dim) + 0.5 * (curv + curv.T), J.T],
                [J, np.zeros((n_rows, n_rows))],
            ]
        )
        delta, *_ = np.linalg.lstsq(kkt, -F, rcond=None)
        if not np.all(np.isfinite(delta)):
            break
        step = 1.0
        accepted = False
        for _ in range(8):
            y_try = y + step * delta[:dim]
            lam_try = lam + step * delta[dim:]
            try:
                hv_try, J_try = values_jac(y_try)
            except _DOMAIN_FAULTS:
                step *= 0.5
                continue
            F_try = residual(y_try, lam_try, hv_try, J_try)
            if float(np.linalg.norm(F_try)) < float(np.linalg.norm(F)):
                y, lam, hv, J, F = y_try, lam_try, hv_try, J_try, F_try
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        norm_now = float(np.linalg.norm(F))
        if norm_now < best_norm:
            best_y, best_norm = y.copy(), norm_now
        if norm_now <= 1e-13 * (1.0 + float(np.linalg.norm(v))):
            break
    return best_y


def _full_residual(fns, m, p, x) -> float:
    r = 0.0
    xt = tuple(x)
    for i, fn in enumerate(fns):
        val = fn(p, xt)[0]
        r = max(r, val if i < m else abs(val))
    return max(r, 0.0)


def restore_feasibility(
    sys: ParametricSystem,
    p: Sequence[float],
    x: np.ndarray,
    tol_feas: float,
    max_steps: int = 30,
) -> np.ndarray | None:
    """Minimum-norm Newton correction onto the locally active constraint
    surface; used to sharpen lower-level solutions before reading off
    objective values."""
    p = tuple(float(t) for t in p)
    fns = sys.compiled_values_gradx()
    m = sys.n_ineq
    y = np.array(x, dtype=float)
    try:
        vals = np.array([fn(p, tuple(y))[0] for fn in fns])
    except _DOMAIN_FAULTS:
        return None
    scale = 1.0 + float(np.max(np.abs(vals))) if len(vals) else 1.0
    eta = 1e-6 * scale
    rows = [i for i in range(m) if abs(vals[i]) <= eta] + list(range(m, sys.n))
    if not rows:
        return y if _full_residual(fns, m, p, y) <= tol_feas else None
    for _ in range(max_steps):
        try:
            hv = np.empty(len(rows))
            J = np.empty((len(rows), len(y)))
            for k, i in enumerate(rows):
                hv[k], J[k] = fns[i](p, tuple(y))
        except _DOMAIN_FAULTS:
            return None
        if float(np.max(np.abs(hv))) <= 1e-14 * scale:
            break
        # Min-norm Newton correction solved directly on J (not via the
        # normal equations, which square the condition number).
        step, *_ = np.linalg.lstsq(J, -hv, rcond=None)
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) <= 1e-16:
            break
        y = y + step
    try:
        if _full_residual(fns, m, p, y) > tol_feas:
            return None
    except _DOMAIN_FAULTS:
        return None
    return y


def kkt_polish_objective(
    sys: ParametricSystem,
    p: Sequence[float],
    objective_vg: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x: np.ndarray,
    tol_feas: float,
    max_steps: int = 30,
) -> np.ndarray | None:
    """Refine a near-minimizer of a general smooth objective by
    working-set Newton restoration plus tangential descent.

    For each activity band the candidate is restored onto the surface
    where the working-set constraints vanish, inequality rows with
    negative least-squares multipliers are dropped, and any remaining
    reduced gradient is removed by descent steps along the constraint
    surface (restoring after each step).  A band candidate is accepted
    only when first-order stationarity on its working set is certified;
    the best accepted candidate by objective value wins.  Declines when
    no band certifies, which leaves the caller's iterate untouched.
    """
    p = tuple(float(t) for t in p)
    x = np.asarray(x, dtype=float)
    fns = sys.compiled_values_gradx()
    m = sys.n_ineq
    try:
        vals = np.array([fn(p, tuple(x))[0] for fn in fns])
    except _DOMAIN_FAULTS:
        return None
    scale = 1.0 + float(np.max(np.abs(vals))) if len(vals) else 1.0
    eq_rows = list(range(m, sys.n))
    best: np.ndarray | None = None
    best_f = math.inf
    seen: set[tuple[int, ...]] = set()
    for band in (1e-6, 1e-5, 1e-4, 1e-3):
        active = [i for i in range(m) if abs(vals[i]) <= band * scale]
        key = tuple(active)
        if key in seen:
            continue
        seen.add(key)
        y = _descend_working_set(fns, m, p, objective_vg, x, active, eq_rows, scale, max_steps)
        if y is None:
            continue
        try:
            if _full_residual(fns, m, p, y) > tol_feas:
                continue
            fval, _ = objective_vg(y)
        except _DOMAIN_FAULTS:
            continue
        if math.isfinite(fval) and fval < best_f:
            best, best_f = y, fval
    return best


def _restore_onto_rows(fns, p, y, rows, scale, max_steps) -> np.ndarray | None:
    """Min-norm Newton iteration driving the given constraint rows to
    zero, starting from ``y``."""
    y = np.array(y, dtype=float)
    if not rows:
        return y
    for _ in range(max_steps):
        try:
            hv = np.empty(len(rows))
            J = np.empty((len(rows), len(y)))
            for k, i in enumerate(rows):
                hv[k], J[k] = fns[i](p, tuple(y))
        except _DOMAIN_FAULTS:
            return None
        if float(np.max(np.abs(hv))) <= 1e-14 * scale:
            break
        step, *_ = np.linalg.lstsq(J, -hv, rcond=None)
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) <= 1e-16:
            break
        y = y + step
    return y if np.all(np.isfinite(y)) else None


def _descend_working_set(
    fns,
    m: int,
    p: tuple,
    objective_vg,
    x: np.ndarray,
    active: list[int],
    eq_rows: list[int],
    scale: float,
    max_steps: int,
) -> np.ndarray | None:
    """Minimize the objective on the working-set surface near ``x``.

    Repeats restore / multiplier-sign pruning / reduced-gradient descent
    until the reduced gradient vanishes; returns None when stationarity
    cannot be certified on any pruned working set (e.g. an interior
    candidate with a nonzero gradient, which needs curvature information
    this refinement deliberately avoids).
    """
    active = list(active)
    for _ in range(len(active) + 1):
        rows = active + eq_rows
        y = _restore_onto_rows(fns, p, x, rows, scale, max_steps)
        if y is None:
            return None
        try:
            fval, fgrad = objective_vg(y)
        except _DOMAIN_FAULTS:
            return None
        g = np.asarray(fgrad, dtype=float)
        gscale = 1.0 + float(np.linalg.norm(g))
        if not rows:
            return y if float(np.linalg.norm(g)) <= 1e-7 * gscale else None
        # Tangential descent: remove the component of the gradient not
        # explained by the working-set rows, restoring after each step.
        for _ in range(50):
            try:
                J = np.vstack([fns[i](p, tuple(y))[1] for i in rows])
            except _DOMAIN_FAULTS:
                return None
            lam, *_ = np.linalg.lstsq(J.T, -g, rcond=None)
            reduced = g + J.T @ lam
            if float(np.linalg.norm(reduced)) <= 1e-9 * gscale:
                break
            step = 1.0
            improved = None
            for _ in range(30):
                trial = _restore_onto_rows(fns, p, y - step * reduced, rows, scale, max_steps)
                if trial is not None:
                    try:
                        tval, tgrad = objective_vg(trial)
                    except _DOMAIN_FAULTS:
                        tval, tgrad = math.inf, None
                    if tval < fval:
                        improved = (trial, tval, tgrad)
                        break
                step *= 0.5
            if improved is None:
                break
            y, fval, fgrad = improved
            g = np.asarray(fgrad, dtype=float)
            gscale = 1.0 + float(np.linalg.norm(g))
        try:
            J = np.vstack([fns[i](p, tuple(y))[1] for i in rows])
        except _DOMAIN_FAULTS:
            return None
        lam, *_ = np.linalg.lstsq(J.T, -np.asarray(objective_vg(y)[1], dtype=float), rcond=None)
        if float(np.linalg.norm(np.asarray(objective_vg(y)[1], dtype=float) + J.T @ lam)) > 1e-7 * gscale:
            return None
        negative = [
            k
            for k in range(len(active))
            if lam[k] < -1e-10 * (1.0 + float(np.max(np.abs(lam))))
        ]
        if not negative:
            return y
        active = [i for k, i in enumerate(active) if k not in negative]
    return None
