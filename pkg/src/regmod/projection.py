"""Metric projection onto parametric feasible sets and the multiplier
sets attached to projections.

``project`` finds a nearest feasible point by multi-start augmented
Lagrangian with a KKT polish.  It is a local method: a converged result
certifies that the parameter's feasible set is nonempty and gives an
upper bound on the true distance, while failure to converge is reported
as a status, never as a proof of infeasibility.  Brute-force grid oracles
in the test suite bound the gap at low dimension.

Multiplier recovery solves a sign-constrained least-squares problem on
the active constraint gradients.  Normalized multipliers scale the raw
coefficients by the distance, so their magnitudes are comparable across
query points; their absolute sum is the quantity whose boundedness near a
reference point characterizes local error-bound behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .numerics import nnls_minnorm
from .solver import SolverOptions, kkt_polish_projection, solve_multistart
from .system import ActiveSet, ParametricSystem

__all__ = [
    "ProjectOptions",
    "ProjectionResult",
    "project",
    "MultiplierResult",
    "multipliers",
    "MultiplierNormDetail",
    "multiplier_norm_detail",
    "min_multiplier_norm",
]


@dataclass(frozen=True)
class ProjectOptions:
    tol_feas: float = 1e-8
    tol_kkt: float = 1e-7
    n_starts: int = 8
    max_outer: int = 200
    max_inner: int = 500
    start_radius: float | None = None

    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            tol_feas=self.tol_feas,
            tol_stat=self.tol_kkt,
            n_starts=self.n_starts,
            max_outer=self.max_outer,
            max_inner=self.max_inner,
            start_radius=self.start_radius,
        )


@dataclass(frozen=True)
class ProjectionResult:
    """Projection outcome.

    ``multipliers_hat`` are the raw representation coefficients of
    ``v - x_star`` in the active gradients (length n, zeros off the active
    set); ``multipliers`` are those divided by the distance, or None when
    the distance is ~zero.  ``status`` is ``converged``, ``max_iter``
    (feasible point found but optimality tolerance missed), or
    ``infeasible_system`` (no start reached feasibility; the parameter may
    be outside the domain of the feasible-set map, or the solver failed).
    """

    x_star: np.ndarray
    distance: float
    feas_residual: float
    kkt_residual: float
    multipliers_hat: np.ndarray
    multipliers: np.ndarray | None
    active: ActiveSet
    status: str
    n_starts_converged: int

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def project(
    sys: ParametricSystem,
    p: Sequence[float],
    v: Sequence[float],
    opts: ProjectOptions = ProjectOptions(),
) -> ProjectionResult:
    """Project ``v`` onto the feasible set of ``sys`` at parameter ``p``."""
    sys._check_dims(p, list(v))
    v = np.asarray(v, dtype=float)
    p = tuple(float(t) for t in p)

    # Feasible inputs project to themselves.
    if sys.residual(p, v) <= opts.tol_feas:
        active = sys.active_set(p, v)
        n = sys.n
        return ProjectionResult(
            x_star=v.copy(),
            distance=0.0,
            feas_residual=sys.residual(p, v),
            kkt_residual=0.0,
            multipliers_hat=np.zeros(n),
            multipliers=None,
            active=active,
            status="converged",
            n_starts_converged=1,
        )

    def objective_vg(x: np.ndarray):
        d = x - v
        return 0.5 * float(d @ d), d

    def polish(x: np.ndarray):
        return kkt_polish_projection(sys, p, v, x, opts.tol_feas)

    res = solve_multistart(sys, p, objective_vg, anchor=v, opts=opts.solver_options(), polish=polish)
    if not res.converged:
        return ProjectionResult(
            x_star=res.x,
            distance=math.inf,
            feas_residual=res.feas_residual,
            kkt_residual=math.inf,
            multipliers_hat=np.zeros(sys.n),
            multipliers=None,
            active=ActiveSet(indices=(), eta=0.0),
            status="infeasible_system",
            n_starts_converged=0,
        )

    x_star = res.x
    distance = float(np.linalg.norm(x_star - v))
    active = sys.active_set(p, x_star)
    lam_hat, kkt_residual = _representation(sys, p, x_star, v - x_star, active)
    lam = lam_hat / distance if distance > 1e-12 else None
    status = "converged" if kkt_residual <= opts.tol_kkt * (1.0 + distance) else "max_iter"
    return ProjectionResult(
        x_star=x_star,
        distance=distance,
        feas_residual=res.feas_residual,
        kkt_residual=kkt_residual,
        multipliers_hat=lam_hat,
        multipliers=lam,
        active=active,
        status=status,
        n_starts_converged=res.n_starts_converged,
    )


def _representation(
    sys: ParametricSystem,
    p: Sequence[float],
    x: np.ndarray,
    b: np.ndarray,
    active: ActiveSet,
) -> tuple[np.ndarray, float]:
    """Min-norm coefficients representing ``b`` in the active gradients.

    Active inequality coefficients are nonnegative; equality coefficients
    are sign-free.  Returns a full-length coefficient vector (zeros off
    the active set) and the representation residual.
    """
    rows = list(active.indices) + list(range(sys.n_ineq + 1, sys.n + 1))
    if not rows:
        return np.zeros(sys.n), float(np.linalg.norm(b))
    columns = sys.jacobian(p, x, rows=rows).T
    sign_free = tuple(k for k, i in enumerate(rows) if sys.is_equality(i))
    sol = nnls_minnorm(columns, b, sign_free=sign_free)
    full = np.zeros(sys.n)
    for k, i in enumerate(rows):
        full[i - 1] = sol.coeffs[k]
    return full, sol.residual


@dataclass(frozen=True)
class MultiplierResult:
    """Normalized multipliers at a feasible point for a given outside
    point.

    ``empty_at_tolerance`` is True when no sign-feasible combination of
    active gradients reproduces the unit direction within ``tol``: at this
    tolerance the multiplier set is empty.
    """

    lam: np.ndarray
    stationarity_residual: float
    active: ActiveSet
    empty_at_tolerance: bool


def multipliers(
    sys: ParametricSystem,
    p: Sequence[float],
    x: Sequence[float],
    v: Sequence[float],
    tol: float = 1e-7,
    eta: float | None = None,
) -> MultiplierResult:
    """Solve for normalized multipliers: coefficients ``lam >= 0`` on the
    active inequalities (sign-free on equalities, zero elsewhere) with

        (x - v)/|x - v| + sum_i lam_i grad_x h_i(p, x) ~ 0.

    Requires ``x`` feasible and ``v != x``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if not sys.is_feasible(p, x):
        raise ValueError("x must be feasible at p")
    d = float(np.linalg.norm(x - v))
    if d <= 1e-12:
        raise ValueError("v must differ from x")
    active = sys.active_set(p, x, eta=eta)
    unit = (v - x) / d
    lam, residual = _representation(sys, p, x, unit, active)
    return MultiplierResult(
        lam=lam,
        stationarity_residual=residual,
        active=active,
        empty_at_tolerance=residual > tol,
    )


@dataclass(frozen=True)
class MultiplierNormDetail:
    """Absolute-coefficient norms of the multiplier set.

    ``sum_abs`` is the 1-norm of the least-Euclidean-norm element (the
    returned proxy).  When the representation is exact enough to pose a
    linear program, ``sum_abs_min1`` is the true minimum 1-norm and
    ``gap`` their difference; both are None otherwise.
    """

    sum_abs: float
    sum_abs_min1: float | None
    gap: float | None
    stationarity_residual: float


def multiplier_norm_detail(
    sys: ParametricSystem,
    p: Sequence[float],
    x: Sequence[float],
    v: Sequence[float],
    tol: float = 1e-7,
) -> MultiplierNormDetail:
    res = multipliers(sys, p, x, v, tol=tol)
    sum_abs = float(np.sum(np.abs(res.lam)))
    sum_abs_min1 = None
    gap = None
    if not res.empty_at_tolerance:
        sum_abs_min1 = _min_one_norm(sys, p, np.asarray(x, float), np.asarray(v, float), res.active)
        if sum_abs_min1 is not None:
            gap = sum_abs - sum_abs_min1
    return MultiplierNormDetail(
        sum_abs=sum_abs,
        sum_abs_min1=sum_abs_min1,
        gap=gap,
        stationarity_residual=res.stationarity_residual,
    )


def min_multiplier_norm(
    sys: ParametricSystem,
    p: Sequence[float],
    x: Sequence[float],
    v: Sequence[float],
) -> float:
    """Sum of absolute normalized multipliers at the least-norm element.

    A proxy for the smallest coefficient budget under which the
    multiplier set is nonempty; the gap to the exact minimum 1-norm is
    available from :func:`multiplier_norm_detail`.
    """
    return multiplier_norm_detail(sys, p, x, v).sum_abs


def _min_one_norm(
    sys: ParametricSystem,
    p: Sequence[float],
    x: np.ndarray,
    v: np.ndarray,
    active: ActiveSet,
) -> float | None:
    """Exact minimum 1-norm multiplier via a small linear program; None
    when the program is infeasible at solver tolerance."""
    rows = list(active.indices) + list(range(sys.n_ineq + 1, sys.n + 1))
    if not rows:
        return 0.0
    d = float(np.linalg.norm(x - v))
    unit = (v - x) / d
    a = sys.jacobian(p, x, rows=rows).T  # (dx, k)
    k = a.shape[1]
    eq_cols = [ki for ki, i in enumerate(rows) if sys.is_equality(i)]
    # variables: lam_i >= 0 for inequality columns; split u - w for equalities
    blocks = [a]
    for ki in eq_cols:
        blocks.append(-a[:, [ki]])
    a_eq = np.hstack(blocks)
    c = np.ones(a_eq.shape[1])
    res = linprog(c, A_eq=a_eq, b_eq=unit, bounds=(0, None), method="highs")
    if not res.success:
        return None
    return float(res.fun)
