"""Bilevel problems: lower-level value functions and exact penalties.

A bilevel problem couples an upper objective ``G(p, x)`` with a lower
level that minimizes ``f(p, x)`` over the feasible set of a parametric
constraint system.  The optimal-value function is

    phi(p) = inf { f(p, x) : x feasible for p },

and the partially penalized single-level objective is

    G(p, x) + mu * (f(p, x) - phi(p))

minimized over the joint constraint region.  Everything here is sampling
based: values come from multi-start local solves and results are reported
as estimates with witnesses, never as certificates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .cq import InfeasibleBaseError
from .expr import Expr
from .numerics import unit_ball_points
from .projection import ProjectOptions, project
from .regularity import (
    RegularityReport,
    SampleRecord,
    ShrinkSchedule,
    estimate_r_modulus,
)
from .solver import SolverOptions, kkt_polish_objective, solve_multistart
from .system import DEFAULT_TOL_FEAS, ParametricSystem

__all__ = [
    "BilevelProblem",
    "InfeasibleAnchorError",
    "LowerSolveResult",
    "PenaltyRow",
    "PenaltyReport",
    "solve_lower",
    "estimate_lipschitz_constant",
    "phi_lipschitz_estimate",
    "penalized_objective",
    "find_penalty_threshold",
    "replay_phi_pair",
    "DEFAULT_MU_GRID",
]

VALUE_TOL = 1e-8
PENALTY_TEST_TOL = 1e-9
DEFAULT_MU_GRID = tuple(2.0**k for k in range(-4, 9))

H1_NOTE = (
    "assumed without verification: admissible parameters where the lower level "
    "has solutions coincide with admissible parameters where the constraint "
    "system is feasible"
)
LOCAL_SOLVE_NOTE = (
    "lower-level values come from multi-start local solves; they are upper "
    "bounds on the true optimal value and solution lists may be incomplete"
)


class BilevelProblem:
    """Upper objective, lower objective, and constraint system.

    ``pcons`` are parameter-only inequality constraints ``g_j(p) <= 0``
    restricting the admissible parameter region; an empty tuple means the
    whole parameter space is admissible.
    """

    __slots__ = ("name", "system", "upper", "lower", "pcons")

    def __init__(
        self,
        name: str,
        system: ParametricSystem,
        upper: Expr,
        lower: Expr,
        pcons: tuple[Expr, ...] = (),
    ):
        for e in (upper, lower, *pcons):
            if e.dp != system.dp or e.dx != system.dx:
                raise ValueError("objective dimensions do not match the system")
        for j, g in enumerate(pcons, start=1):
            if g.depends_on_x():
                raise ValueError(f"parameter constraint g{j} must not depend on x")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "system", system)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "pcons", tuple(pcons))

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("BilevelProblem is immutable")

    def __repr__(self) -> str:
        return f"BilevelProblem({self.name!r}, dp={self.system.dp}, dx={self.system.dx})"

    def p_admissible(self, p: Sequence[float], tol: float = DEFAULT_TOL_FEAS) -> bool:
        """Whether ``p`` satisfies all parameter constraints within tol."""
        zeros = [0.0] * self.system.dx
        return all(g.eval(p, zeros) <= tol for g in self.pcons)

    def in_joint_region(self, p: Sequence[float], x: Sequence[float], tol: float = DEFAULT_TOL_FEAS) -> bool:
        """Whether ``(p, x)`` satisfies the constraint system and the
        parameter constraints within tol (the joint region used by the
        penalty analysis)."""
        if not self.p_admissible(p, tol):
            return False
        return self.system.residual(p, x) <= tol


class InfeasibleAnchorError(ValueError):
    """The anchor point fails the feasibility preconditions."""


# ---------------------------------------------------------------------------
# Lower-level value function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LowerSolveResult:
    """Lower-level optimal value and the local minimizers that attain it.

    ``phi`` is the best value over all starts; ``x_solutions`` are the
    distinct feasible candidates whose value lies within ``VALUE_TOL`` of
    the best, sorted lexicographically.  Status ``infeasible_system``
    means no start produced a feasible point; because detection is
    operational this never certifies that the feasible set is empty.
    """

    phi: float
    x_solutions: tuple[tuple[float, ...], ...]
    status: str
    n_starts_converged: int
    start_radius_used: float
    notes: tuple[str, ...]

    @property
    def converged(self) -> bool:
        return self.status == "ok"


def _as_system_and_objective(source) -> tuple[ParametricSystem, Expr]:
    if isinstance(source, BilevelProblem):
        return source.system, source.lower
    sys, f = source
    if f.dp != sys.dp or f.dx != sys.dx:
        raise ValueError("objective dimensions do not match the system")
    return sys, f


def _dedup_solutions(
    candidates: Sequence[tuple[float, tuple[float, ...]]],
    best: float,
    value_tol: float,
) -> tuple[tuple[float, ...], ...]:
    near_best = sorted(x for val, x in candidates if val <= best + value_tol)
    kept: list[tuple[float, ...]] = []
    for x in near_best:
        if all(max(abs(a - b) for a, b in zip(x, y)) > 1e-6 for y in kept):
            kept.append(x)
    return tuple(kept)


def solve_lower(
    source,
    p: Sequence[float],
    opts: SolverOptions = SolverOptions(),
    value_tol: float = VALUE_TOL,
) -> LowerSolveResult:
    """Multi-start local minimization of the lower objective over F(p).

    ``source`` is a BilevelProblem or a (system, objective) pair.  The
    start ball is at least twice the diameter of the solution hull it
    discovers: whenever the best minimizer lands near the edge of the
    current ball, the ball is doubled and the solve repeated.
    """
    sys, f = _as_system_and_objective(source)
    p = tuple(float(t) for t in p)
    if len(p) != sys.dp:
        raise ValueError(f"expected {sys.dp} parameter values, got {len(p)}")
    fn = f.value_gradx_fn

    def objective_vg(x: np.ndarray):
        return fn(p, tuple(x))

    def polish(y: np.ndarray):
        return kkt_polish_objective(sys, p, objective_vg, y, opts.tol_feas)

    anchor = np.zeros(sys.dx)
    radius = opts.start_radius if opts.start_radius is not None else 10.0
    result = None
    for _ in range(3):
        run_opts = replace(opts, start_radius=radius)
        result = solve_multistart(sys, p, objective_vg, anchor, run_opts, polish=polish)
        if not result.converged:
            break
        furthest = max(
            (float(np.max(np.abs(np.array(x)))) for _, x in result.candidates),
            default=0.0,
        )
        if furthest <= 0.45 * radius:
            break
        radius *= 2.0
    if result is None or not result.converged:
        return LowerSolveResult(
            phi=math.inf,
            x_solutions=(),
            status="infeasible_system",
            n_starts_converged=0,
            start_radius_used=radius,
            notes=(LOCAL_SOLVE_NOTE,),
        )
    return LowerSolveResult(
        phi=result.objective,
        x_solutions=_dedup_solutions(result.candidates, result.objective, value_tol),
        status="ok",
        n_starts_converged=result.n_starts_converged,
        start_radius_used=radius,
        notes=(LOCAL_SOLVE_NOTE,),
    )


# ---------------------------------------------------------------------------
# Lipschitz-constant estimation
# ---------------------------------------------------------------------------


def estimate_lipschitz_constant(
    e: Expr,
    center: Sequence[float],
    radius: float,
    n: int = 64,
    seed: int = 0,
) -> float:
    """Sampled lower bound on the local Lipschitz constant of ``e``.

    ``center`` is a joint (p, x) point of length dp + dx.  Candidates are
    pair ratios |e(a) - e(b)| / ||a - b|| over ball samples, the same
    ratios across short gradient-aligned steps, and the analytic gradient
    norms at the samples (the limit of such ratios).  Evaluation faults
    are skipped.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    dim = e.dp + e.dx
    center = np.asarray(tuple(float(t) for t in center), dtype=float)
    if center.shape != (dim,):
        raise ValueError(f"center must have length {dim}")
    if dim == 0:
        return 0.0
    points = [center]
    points.extend(center + radius * u for u in unit_ball_points(dim, n, seed))
    value_fn = e.value_fn
    gradx_fn = e.value_gradx_fn
    gradp_fn = e.value_gradp_fn

    def split(z: np.ndarray) -> tuple[tuple, tuple]:
        return tuple(z[: e.dp]), tuple(z[e.dp :])

    best = 0.0
    usable: list[tuple[np.ndarray, float]] = []
    t_probe = 1e-5 * radius
    for z in points:
        zp, zx = split(z)
        try:
            val = value_fn(zp, zx)
            _, gx = gradx_fn(zp, zx)
            _, gp = gradp_fn(zp, zx)
        except Exception:
            continue
        g = np.array(tuple(gp) + tuple(gx), dtype=float)
        if not (math.isfinite(val) and np.all(np.isfinite(g))):
            continue
        usable.append((z, val))
        gnorm = float(np.linalg.norm(g))
        best = max(best, gnorm)
        if gnorm > 0.0:
            zt = z + t_probe * (g / gnorm)
            tp, tx = split(zt)
            try:
                tval = value_fn(tp, tx)
            except Exception:
                continue
            if math.isfinite(tval):
                best = max(best, abs(tval - val) / t_probe)
    for i in range(len(usable)):
        zi, vi = usable[i]
        for zj, vj in usable[i + 1 :]:
            sep = float(np.linalg.norm(zi - zj))
            if sep >= 1e-12:
                best = max(best, abs(vi - vj) / sep)
    return best


# ---------------------------------------------------------------------------
# Value-function Lipschitz estimate
# ---------------------------------------------------------------------------


def phi_lipschitz_estimate(
    blp: BilevelProblem,
    p0: Sequence[float],
    delta: float,
    n: int = 16,
    seed: int = 0,
    opts: SolverOptions = SolverOptions(),
) -> RegularityReport:
    """Sup of |phi(p) - phi(q)| / ||p - q|| over sampled admissible
    parameters within delta of p0.

    The report's params also carry the predicted Lipschitz bound
    l0 + alpha * M * max(l_i) assembled from sampled Lipschitz constants
    (l0 of the lower objective, l_i of the constraints) and the sampled
    residual-to-distance modulus M, for comparison only: the estimate is
    a lower bound on the true modulus while the prediction is a bound
    certified only under assumptions sampling cannot verify.
    """
    sys = blp.system
    p0 = tuple(float(t) for t in p0)
    if len(p0) != sys.dp:
        raise ValueError(f"expected {sys.dp} parameter values, got {len(p0)}")
    if delta <= 0:
        raise ValueError("delta must be positive")
    base = solve_lower(blp, p0, opts)
    if base.status != "ok":
        raise InfeasibleBaseError(f"lower level found no feasible point at {p0}")
    params: dict = {"delta": delta, "n": n, "seed": seed}
    notes = (LOCAL_SOLVE_NOTE, H1_NOTE, "predicted bound reported for comparison only")
    if sys.dp == 0:
        return RegularityReport(
            kind="lower_level_value",
            estimate=0.0,
            witness=None,
            trend=((0.0, 0.0),),
            diverging=False,
            samples_used=0,
            skipped_infeasible_p=0,
            skipped_degenerate=0,
            status="ok",
            params={**params, "constant_map": True},
            notes=notes + ("parameter space is zero-dimensional; the map is constant",),
            samples=(),
        )
    sols0 = base.x_solutions or ((),)
    diam = 0.0
    for a in sols0:
        for b in sols0:
            diam = max(diam, float(np.linalg.norm(np.array(a) - np.array(b))))
    min_radius = 2.0 * diam
    lower_opts = opts
    if lower_opts.start_radius is None or lower_opts.start_radius < min_radius:
        base_radius = opts.start_radius if opts.start_radius is not None else 10.0
        lower_opts = replace(opts, start_radius=max(base_radius, min_radius))
    params["start_radius_used"] = (
        lower_opts.start_radius if lower_opts.start_radius is not None else 10.0
    )

    p0a = np.array(p0)
    pool: list[tuple[tuple[float, ...], str]] = [(p0, "stencil")]
    for i in range(sys.dp):
        for s in (1.0, -1.0):
            q = p0a.copy()
            q[i] += s * delta
            pool.append((tuple(float(t) for t in q), "stencil"))
    for u in unit_ball_points(sys.dp, n, seed):
        pool.append((tuple(float(t) for t in p0a + delta * u), "sampled"))

    evaluated: list[tuple[tuple[float, ...], float, tuple[float, ...], str]] = []
    skipped_p = 0
    for q, source in pool:
        if not blp.p_admissible(q):
            skipped_p += 1
            continue
        res = solve_lower(blp, q, lower_opts)
        if res.status != "ok":
            skipped_p += 1
            continue
        x_at = res.x_solutions[0] if res.x_solutions else ()
        evaluated.append((q, res.phi, x_at, source))

    records: list[SampleRecord] = []
    skipped_deg = 0
    for i in range(len(evaluated)):
        pi, phii, _, si = evaluated[i]
        for j in range(i + 1, len(evaluated)):
            pj, phij, xj, sj = evaluated[j]
            sep = float(np.linalg.norm(np.array(pi) - np.array(pj)))
            if sep < 1e-9:
                skipped_deg += 1
                continue
            records.append(
                SampleRecord(
                    step=0,
                    radius=delta,
                    p_from=pi,
                    p_to=pj,
                    point=xj,
                    value=abs(phii - phij) / sep,
                    source="stencil" if si == sj == "stencil" else "sampled",
                )
            )
    estimate = math.nan
    witness = None
    for rec in records:
        if witness is None or rec.value > estimate:
            estimate = rec.value
            witness = rec

    x_ref = sols0[0] if sols0[0] else tuple(np.zeros(sys.dx))
    lip_radius = 2.0 * delta + diam
    l0 = estimate_lipschitz_constant(blp.lower, p0 + x_ref, lip_radius, n=n, seed=seed + 1)
    l_cons = [
        estimate_lipschitz_constant(h, p0 + x_ref, lip_radius, n=n, seed=seed + 1)
        for h in sys.ineq + sys.eq
    ]
    max_li = max(l_cons) if l_cons else 0.0
    mod_sched = ShrinkSchedule(r0=delta, factor=0.5, steps=3, samples_per_step=max(8, n // 2))
    mod = estimate_r_modulus(sys, p0, x_ref, mod_sched, seed=seed + 2)
    alpha = l0 * (1.0 + 1e-3)
    params["predicted_bound"] = l0 + alpha * mod.estimate * max_li
    params["predicted_bound_inputs"] = {
        "l0": l0,
        "alpha": alpha,
        "r_modulus": mod.estimate,
        "r_modulus_status": mod.status,
        "max_constraint_lipschitz": max_li,
        "lipschitz_radius": lip_radius,
    }
    return RegularityReport(
        kind="lower_level_value",
        estimate=estimate,
        witness=witness,
        trend=((delta, estimate),),
        diverging=False,
        samples_used=len(records),
        skipped_infeasible_p=skipped_p,
        skipped_degenerate=skipped_deg,
        status="ok" if records else "no_usable_samples",
        params=params,
        notes=notes,
        samples=tuple(records),
    )


def replay_phi_pair(
    blp: BilevelProblem,
    record: SampleRecord,
    opts: SolverOptions = SolverOptions(),
) -> float:
    """Recompute a value-function pair ratio from scratch."""
    if record.p_from is None:
        raise ValueError("value-function pair record lacks p_from")
    a = solve_lower(blp, record.p_from, opts)
    b = solve_lower(blp, record.p_to, opts)
    if a.status != "ok" or b.status != "ok":
        raise ValueError("lower level failed on replay")
    sep = float(np.linalg.norm(np.array(record.p_from) - np.array(record.p_to)))
    return abs(a.phi - b.phi) / sep


# ---------------------------------------------------------------------------
# Partial penalty
# ---------------------------------------------------------------------------


def penalized_objective(
    blp: BilevelProblem,
    mu: float,
    p: Sequence[float],
    x: Sequence[float],
    opts: SolverOptions = SolverOptions(),
    tol: float = DEFAULT_TOL_FEAS,
) -> float:
    """G(p, x) + mu * (f(p, x) - phi(p)) for feasible admissible (p, x)."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    p = tuple(float(t) for t in p)
    x = tuple(float(t) for t in x)
    if blp.system.residual(p, x) > tol:
        raise ValueError("x is not feasible for the constraint system at p")
    if not blp.p_admissible(p, tol):
        raise ValueError("p violates the parameter constraints")
    lower = solve_lower(blp, p, opts)
    if lower.status != "ok":
        raise ValueError("lower level found no feasible point at p")
    return blp.upper.eval(p, x) + mu * (blp.lower.eval(p, x) - lower.phi)


@dataclass(frozen=True)
class PenaltyRow:
    """Outcome of the local-minimum test for one penalty weight."""

    mu: float
    passed: bool
    n_violations: int
    worst_deficit: float
    witness: tuple[tuple[float, ...], tuple[float, ...]] | None


@dataclass(frozen=True)
class PenaltyReport:
    """Empirical penalty-threshold evidence and the formula value.

    ``mu0_empirical`` (smallest grid weight whose penalized objective
    dominates the anchor on every sample) and ``mu0_formula`` (product of
    the sampled upper-objective Lipschitz constant and the sampled
    modulus of the value-level-augmented map) answer different questions
    and are reported side by side, never combined.
    """

    p_star: tuple[float, ...]
    x_star: tuple[float, ...]
    anchor_upper: float
    anchor_gap: float
    mu_grid: tuple[float, ...]
    per_mu: tuple[PenaltyRow, ...]
    mu0_empirical: float | None
    mu0_formula: float
    formula_inputs: dict
    n_samples: int
    n_rejected: int
    n_lower_failures: int
    status: str
    params: dict
    notes: tuple[str, ...]


def find_penalty_threshold(
    blp: BilevelProblem,
    p_star: Sequence[float],
    x_star: Sequence[float],
    mu_grid: Sequence[float] | None = None,
    radius: float = 0.25,
    n: int = 64,
    seed: int = 0,
    opts: SolverOptions = SolverOptions(),
    tol: float = PENALTY_TEST_TOL,
) -> PenaltyReport:
    """Grid search for an empirical exact-penalty threshold at an anchor.

    Samples the joint constraint region near (p_star, x_star); for each
    penalty weight, checks that the penalized objective at every sample
    stays above the anchor's penalized value minus ``tol``.  Lower-level
    values are solved once per sampled parameter and shared across all
    weights.
    """
    sys = blp.system
    p_star = tuple(float(t) for t in p_star)
    x_star = tuple(float(t) for t in x_star)
    if mu_grid is None:
        mu_grid = DEFAULT_MU_GRID
    mu_grid = tuple(float(m) for m in mu_grid)
    if any(m < 0 for m in mu_grid) or not mu_grid:
        raise ValueError("mu_grid must be nonempty and nonnegative")
    if radius <= 0 or n <= 0:
        raise ValueError("radius and n must be positive")

    if sys.residual(p_star, x_star) > DEFAULT_TOL_FEAS:
        raise InfeasibleAnchorError("x_star is not feasible for the constraint system")
    if not blp.p_admissible(p_star):
        raise InfeasibleAnchorError("p_star violates the parameter constraints")
    anchor_lower = solve_lower(blp, p_star, opts)
    if anchor_lower.status != "ok":
        raise InfeasibleAnchorError("lower level found no feasible point at p_star")
    f_star = blp.lower.eval(p_star, x_star)
    if f_star > anchor_lower.phi + VALUE_TOL:
        raise InfeasibleAnchorError(
            f"x_star is not lower-level optimal: f = {f_star:.9g} exceeds "
            f"phi = {anchor_lower.phi:.9g} beyond the value tolerance"
        )
    anchor_upper = blp.upper.eval(p_star, x_star)
    anchor_gap = f_star - anchor_lower.phi

    phi_cache: dict[tuple[float, ...], float] = {p_star: anchor_lower.phi}

    def phi_of(p: tuple[float, ...]) -> float | None:
        if p not in phi_cache:
            res = solve_lower(blp, p, opts)
            phi_cache[p] = res.phi if res.status == "ok" else math.nan
        value = phi_cache[p]
        return None if math.isnan(value) else value

    center = np.array(p_star + x_star)
    dim = sys.dp + sys.dx
    samples: list[tuple[tuple[float, ...], tuple[float, ...], float, float, float]] = []
    n_rejected = 0
    n_lower_failures = 0
    batch_seed = seed
    draws_left = 50 * n
    while len(samples) < n and draws_left > 0:
        block = unit_ball_points(dim, min(n, draws_left), batch_seed)
        batch_seed += 1
        draws_left -= len(block)
        for u in block:
            if len(samples) >= n:
                break
            z = center + radius * u
            p = tuple(float(t) for t in z[: sys.dp])
            x = tuple(float(t) for t in z[sys.dp :])
            if not blp.in_joint_region(p, x):
                n_rejected += 1
                continue
            phi_p = phi_of(p)
            if phi_p is None:
                n_lower_failures += 1
                continue
            samples.append((p, x, blp.upper.eval(p, x), blp.lower.eval(p, x), phi_p))

    rows: list[PenaltyRow] = []
    mu0_empirical = None
    for mu in mu_grid:
        anchor_value = anchor_upper + mu * anchor_gap
        worst_deficit = -math.inf
        worst: tuple[tuple[float, ...], tuple[float, ...]] | None = None
        n_viol = 0
        for p, x, g_val, f_val, phi_p in samples:
            deficit = anchor_value - (g_val + mu * (f_val - phi_p))
            if deficit > tol:
                n_viol += 1
            if deficit > worst_deficit:
                worst_deficit = deficit
                worst = (p, x)
        if not samples:
            worst_deficit = math.nan
        passed = bool(samples) and n_viol == 0
        rows.append(
            PenaltyRow(
                mu=mu,
                passed=passed,
                n_violations=n_viol,
                worst_deficit=worst_deficit,
                witness=worst if (samples and n_viol > 0) else None,
            )
        )
        if passed and mu0_empirical is None:
            mu0_empirical = mu

    l0 = estimate_lipschitz_constant(blp.upper, p_star + x_star, radius, n=n, seed=seed + 1)
    m_hat, m_used, m_skipped = _c_modulus_estimate(
        blp, p_star, x_star, radius, min(64, max(8, n // 4)), seed + 2, opts, phi_of
    )
    formula_inputs = {
        "upper_lipschitz": l0,
        "c_modulus": m_hat,
        "c_modulus_samples_used": m_used,
        "c_modulus_samples_skipped": m_skipped,
        "c_modulus_note": (
            "modulus of the map sending p to the feasible points whose "
            "lower objective does not exceed phi(p); this augmented map "
            "substitutes for the argmin map, whose modulus is not "
            "estimated directly"
        ),
    }
    return PenaltyReport(
        p_star=p_star,
        x_star=x_star,
        anchor_upper=anchor_upper,
        anchor_gap=anchor_gap,
        mu_grid=mu_grid,
        per_mu=tuple(rows),
        mu0_empirical=mu0_empirical,
        mu0_formula=l0 * m_hat,
        formula_inputs=formula_inputs,
        n_samples=len(samples),
        n_rejected=n_rejected,
        n_lower_failures=n_lower_failures,
        status="ok" if samples else "no_usable_samples",
        params={
            "radius": radius,
            "n": n,
            "seed": seed,
            "tol": tol,
            "value_tol": VALUE_TOL,
        },
        notes=(
            LOCAL_SOLVE_NOTE,
            H1_NOTE,
            "the local-minimum test is empirical evidence on a finite "
            "sample, not a partial-calmness certificate",
        ),
    )


def _c_modulus_estimate(
    blp: BilevelProblem,
    p_star: tuple[float, ...],
    x_star: tuple[float, ...],
    radius: float,
    n: int,
    seed: int,
    opts: SolverOptions,
    phi_of,
) -> tuple[float, int, int]:
    """Sampled residual-to-distance modulus of the value-level-augmented
    map: constraints of the system plus f(p, x) <= phi(p).

    phi(p) enters as a per-parameter constant, so a fresh augmented
    system is assembled for each sampled parameter.
    """
    sys = blp.system
    center = np.array(p_star + x_star)
    dim = sys.dp + sys.dx
    proj_opts = ProjectOptions(
        tol_feas=opts.tol_feas,
        tol_kkt=opts.tol_stat,
        n_starts=opts.n_starts,
        max_outer=opts.max_outer,
        max_inner=opts.max_inner,
    )
    best = math.nan
    used = 0
    skipped = 0
    for k in range(3):
        r = radius * 0.5**k
        for u in unit_ball_points(dim, n, seed):
            z = center + r * u
            p = tuple(float(t) for t in z[: sys.dp])
            x = tuple(float(t) for t in z[sys.dp :])
            phi_p = phi_of(p)
            if phi_p is None or not math.isfinite(phi_p):
                skipped += 1
                continue
            level = blp.lower.minus_constant(phi_p)
            aug = ParametricSystem(
                f"{sys.name}+level", sys.dp, sys.dx, sys.ineq + (level,), sys.eq
            )
            residual = aug.residual(p, x)
            if residual <= 1e-12:
                skipped += 1
                continue
            res = project(aug, p, x, proj_opts)
            if not res.converged:
                skipped += 1
                continue
            ratio = res.distance / residual
            used += 1
            if math.isnan(best) or ratio > best:
                best = ratio
    return best, used, skipped
