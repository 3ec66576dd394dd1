"""Sampling-based regularity diagnostics for parametric feasible-set
maps.

Four estimators probe how the feasible set responds to parameter
perturbations near a base pair (p0, x0):

- ``estimate_r_modulus``: sup of distance-to-feasible over constraint
  residual across shrinking joint neighborhoods (error-bound modulus).
- ``check_multiplier_bound``: sup of the minimal projection-multiplier
  norm across shrinking neighborhoods (boundedness diagnostic).
- ``estimate_aubin_modulus``: sup of dist(x, F(p2)) / |p1 - p2| over
  sampled parameter pairs and feasible slice points (two-parameter
  Lipschitz behavior).
- ``estimate_lower_lipschitz``: the one-sided slice of the above with
  p1 fixed at p0 and x fixed at x0.

plus ``check_lsc`` (does the feasible set stay within reach of x0 for
nearby parameters?) and ``cone_compare`` (linearized cone membership
versus sampled tangency ratios).

All estimates are suprema over finite samples: they are lower bounds on
the true moduli, and the ``diverging`` flag is falsification evidence,
never proof.  Distances come from one local projection per sample; the
projection map may be multi-valued and other selections are not
enumerated.  That caveat is recorded in every report.

Sampling is deterministic: a fixed axis stencil is evaluated first at
each step (so closed-form witnesses land at predictable points), and
low-discrepancy directions drawn once per run are rescaled for every
radius step, which keeps per-step suprema on clean geometric trends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cq import InfeasibleBaseError
from .numerics import unit_ball_points
from .projection import ProjectOptions, min_multiplier_norm, project
from .system import DEFAULT_TOL_FEAS, ParametricSystem

__all__ = [
    "GROWTH_FACTOR",
    "GROWTH_RUN_LENGTH",
    "RESIDUAL_FLOOR",
    "PAIR_SEPARATION",
    "ShrinkSchedule",
    "SampleRecord",
    "RegularityReport",
    "MultiplierBoundReport",
    "LscReport",
    "DirectionRecord",
    "ConeCompareReport",
    "estimate_r_modulus",
    "check_multiplier_bound",
    "estimate_aubin_modulus",
    "estimate_lower_lipschitz",
    "check_lsc",
    "cone_compare",
    "replay_sample",
]

GROWTH_FACTOR = 1.8
GROWTH_RUN_LENGTH = 3
RESIDUAL_FLOOR = 1e-12
PAIR_SEPARATION = 1e-9

_SINGLE_PROJECTION_NOTE = (
    "distances and multipliers use one local projection per sample; the "
    "projection map may be multi-valued and other selections are not enumerated"
)
_CONSTANT_MAP_NOTE = "parameter space is zero-dimensional; the map is constant"


@dataclass(frozen=True)
class ShrinkSchedule:
    """Geometric radius schedule r0 * factor^k for k = 0..steps-1."""

    r0: float
    factor: float = 0.5
    steps: int = 8
    samples_per_step: int = 16

    def __post_init__(self):
        if not self.r0 > 0:
            raise ValueError("r0 must be positive")
        if not 0.0 < self.factor < 1.0:
            raise ValueError("factor must lie in (0, 1)")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.samples_per_step < 0:
            raise ValueError("samples_per_step must be >= 0")

    @property
    def radii(self) -> tuple[float, ...]:
        return tuple(self.r0 * self.factor**k for k in range(self.steps))

    def params(self) -> dict:
        return {
            "r0": self.r0,
            "factor": self.factor,
            "steps": self.steps,
            "samples_per_step": self.samples_per_step,
        }


@dataclass(frozen=True)
class SampleRecord:
    """One recorded sample.

    ``p_from``/``p_to`` name the parameter pair when the ratio involves
    one (``p_from`` is None for residual-denominator kinds); ``point`` is
    the probed point in variable space (x for residual ratios, v for
    multiplier norms, the slice point for pair ratios).  ``source`` is
    "stencil" for the deterministic axis probes, "sampled" for
    low-discrepancy draws, "extra" for caller-supplied pairs.
    """

    step: int
    radius: float
    p_from: tuple[float, ...] | None
    p_to: tuple[float, ...]
    point: tuple[float, ...]
    value: float
    source: str


@dataclass(frozen=True)
class RegularityReport:
    kind: str  # r_modulus | aubin | lower_lipschitz
    estimate: float
    witness: SampleRecord | None
    trend: tuple[tuple[float, float], ...]  # (radius_k, sup_ratio_k)
    diverging: bool
    samples_used: int
    skipped_infeasible_p: int
    skipped_degenerate: int
    status: str  # "ok" | "no_usable_samples"
    params: dict
    notes: tuple[str, ...]
    samples: tuple[SampleRecord, ...]


@dataclass(frozen=True)
class MultiplierBoundReport:
    estimate: float
    witness: SampleRecord | None
    trend: tuple[tuple[float, float], ...]
    bounded: bool
    samples_used: int
    skipped_infeasible_p: int
    skipped_degenerate: int
    status: str
    params: dict
    notes: tuple[str, ...]
    samples: tuple[SampleRecord, ...]


@dataclass(frozen=True)
class LscReport:
    holds_on_samples: bool
    witness: tuple[float, ...] | None
    witness_distance: float | None
    n_checked: int
    skipped_infeasible_p: int
    params: dict
    notes: tuple[str, ...]
    samples: tuple[SampleRecord, ...]


@dataclass(frozen=True)
class DirectionRecord:
    direction: tuple[float, ...]
    in_gamma: bool
    ratios: tuple[tuple[float, float], ...]  # (t, dist(x + t d, F(p)) / t)
    tangent_on_samples: bool | None
    agree: bool | None
    status: str  # "ok" | "inconclusive"


@dataclass(frozen=True)
class ConeCompareReport:
    p: tuple[float, ...]
    x: tuple[float, ...]
    records: tuple[DirectionRecord, ...]
    all_agree: bool
    flagged_disagreement: bool
    params: dict
    notes: tuple[str, ...]


# ---------------------------------------------------------------------------
# Shared machinery
# ---------------------------------------------------------------------------


def _require_feasible_base(sys: ParametricSystem, p0, x0) -> tuple[tuple, tuple]:
    sys._check_dims(p0, x0)
    p0 = tuple(float(t) for t in p0)
    x0 = tuple(float(t) for t in x0)
    residual = sys.residual(p0, x0)
    if residual > DEFAULT_TOL_FEAS:
        raise InfeasibleBaseError(
            f"base point is infeasible: residual {residual:.3e} > {DEFAULT_TOL_FEAS:.3e}"
        )
    return p0, x0


def _growth_run_length(sups: Sequence[float], g: float = GROWTH_FACTOR) -> int:
    """Longest run of consecutive trend transitions growing by >= g."""
    best = run = 0
    prev: float | None = None
    for s in sups:
        grew = (
            prev is not None
            and math.isfinite(prev)
            and math.isfinite(s)
            and prev > 0.0
            and s >= g * prev
        )
        run = run + 1 if grew else 0
        best = max(best, run)
        prev = s
    return best


def _is_diverging(trend: Sequence[tuple[float, float]]) -> bool:
    return _growth_run_length([s for _, s in trend]) >= GROWTH_RUN_LENGTH


def _joint_stencil(p0: np.ndarray, x0: np.ndarray, r: float):
    """Deterministic probes: each parameter axis, each variable axis,
    then all (parameter, variable) sign combinations, at full radius."""
    dp, dx = len(p0), len(x0)
    for i in range(dp):
        for s in (1.0, -1.0):
            p = p0.copy()
            p[i] += s * r
            yield p, x0.copy()
    for j in range(dx):
        for s in (1.0, -1.0):
            x = x0.copy()
            x[j] += s * r
            yield p0.copy(), x
    for i in range(dp):
        for j in range(dx):
            for sp in (1.0, -1.0):
                for sx in (1.0, -1.0):
                    p = p0.copy()
                    x = x0.copy()
                    p[i] += sp * r
                    x[j] += sx * r
                    yield p, x


def _trend_and_estimate(
    records: Sequence[SampleRecord], radii: Sequence[float]
) -> tuple[tuple[tuple[float, float], ...], float, SampleRecord | None]:
    trend = []
    for k, r in enumerate(radii):
        step_vals = [rec.value for rec in records if rec.step == k]
        trend.append((r, max(step_vals) if step_vals else math.nan))
    estimate = math.nan
    witness = None
    for rec in records:
        if witness is None or rec.value > estimate:
            estimate = rec.value
            witness = rec
    return tuple(trend), estimate, witness


# ---------------------------------------------------------------------------
# Residual-ratio modulus
# ---------------------------------------------------------------------------


def estimate_r_modulus(
    sys: ParametricSystem,
    p0: Sequence[float],
    x0: Sequence[float],
    schedule: ShrinkSchedule,
    seed: int = 0,
    opts: ProjectOptions = ProjectOptions(),
    extra_samples: Sequence[tuple[Sequence[float], Sequence[float]]] = (),
) -> RegularityReport:
    """Sup of dist(x, F(p)) / residual(p, x) over shrinking joint
    neighborhoods of (p0, x0).

    Samples with residual below the floor are already feasible and carry
    no ratio; samples whose projection fails are counted and skipped
    (the parameter may lie outside the domain of the map - never treated
    as evidence).  ``extra_samples`` joins caller-supplied (p, x) pairs
    to the pool, recorded with step -1.
    """
    p0t, x0t = _require_feasible_base(sys, p0, x0)
    p0a, x0a = np.array(p0t), np.array(x0t)
    dim = sys.dp + sys.dx
    dirs = unit_ball_points(dim, schedule.samples_per_step, seed)
    records: list[SampleRecord] = []
    skipped_p = 0
    skipped_deg = 0
    for k, r in enumerate(schedule.radii):
        pool = [(p, x, "stencil") for p, x in _joint_stencil(p0a, x0a, r)]
        pool.extend(
            (p0a + r * u[: sys.dp], x0a + r * u[sys.dp :], "sampled") for u in dirs
        )
        for p, x, source in pool:
            rec = _r_ratio_record(sys, p, x, k, r, source, opts)
            if rec == "infeasible":
                skipped_p += 1
            elif rec == "degenerate":
                skipped_deg += 1
            else:
                records.append(rec)
    for p, x in extra_samples:
        rec = _r_ratio_record(
            sys, np.asarray(p, float), np.asarray(x, float), -1, math.nan, "extra", opts
        )
        if rec == "infeasible":
            skipped_p += 1
        elif rec == "degenerate":
            skipped_deg += 1
        else:
            records.append(rec)
    trend, estimate, witness = _trend_and_estimate(records, schedule.radii)
    return RegularityReport(
        kind="r_modulus",
        estimate=estimate,
        witness=witness,
        trend=trend,
        diverging=_is_diverging(trend),
        samples_used=len(records),
        skipped_infeasible_p=skipped_p,
        skipped_degenerate=skipped_deg,
        status="ok" if records else "no_usable_samples",
        params={**schedule.params(), "seed": seed},
        notes=(_SINGLE_PROJECTION_NOTE,),
        samples=tuple(records),
    )


def _r_ratio_record(sys, p, x, step, radius, source, opts):
    pt = tuple(float(t) for t in p)
    xt = tuple(float(t) for t in x)
    try:
        residual = sys.residual(pt, xt)
    except Exception:
        return "degenerate"
    if not math.isfinite(residual):
        return "degenerate"
    if residual <= RESIDUAL_FLOOR:
        return "degenerate"
    res = project(sys, pt, xt, opts)
    if not res.converged:
        return "infeasible"
    return SampleRecord(
        step=step,
        radius=radius,
        p_from=None,
        p_to=pt,
        point=xt,
        value=res.distance / residual,
        source=source,
    )


# ---------------------------------------------------------------------------
# Multiplier-norm boundedness
# ---------------------------------------------------------------------------


def check_multiplier_bound(
    sys: ParametricSystem,
    p0: Sequence[float],
    x0: Sequence[float],
    schedule: ShrinkSchedule,
    seed: int = 0,
    opts: ProjectOptions = ProjectOptions(),
) -> MultiplierBoundReport:
    """Sup of the minimal projection-multiplier norm over shrinking
    neighborhoods: sample outside points v near x0 and parameters p near
    p0, project v onto F(p), and record the absolute sum of the
    least-norm multipliers at the projection."""
    p0t, x0t = _require_feasible_base(sys, p0, x0)
    p0a, x0a = np.array(p0t), np.array(x0t)
    dim = sys.dp + sys.dx
    dirs = unit_ball_points(dim, schedule.samples_per_step, seed)
    records: list[SampleRecord] = []
    skipped_p = 0
    skipped_deg = 0
    for k, r in enumerate(schedule.radii):
        pool = [(p, v, "stencil") for p, v in _joint_stencil(p0a, x0a, r)]
        pool.extend(
            (p0a + r * u[: sys.dp], x0a + r * u[sys.dp :], "sampled") for u in dirs
        )
        for p, v, source in pool:
            pt = tuple(float(t) for t in p)
            vt = tuple(float(t) for t in v)
            residual = sys.residual(pt, vt)
            if not math.isfinite(residual) or residual <= RESIDUAL_FLOOR:
                skipped_deg += 1
                continue
            res = project(sys, pt, vt, opts)
            if not res.converged:
                skipped_p += 1
                continue
            try:
                norm = min_multiplier_norm(sys, pt, res.x_star, vt)
            except ValueError:
                skipped_deg += 1
                continue
            records.append(
                SampleRecord(
                    step=k,
                    radius=r,
                    p_from=None,
                    p_to=pt,
                    point=vt,
                    value=norm,
                    source=source,
                )
            )
    trend, estimate, witness = _trend_and_estimate(records, schedule.radii)
    return MultiplierBoundReport(
        estimate=estimate,
        witness=witness,
        trend=trend,
        bounded=not _is_diverging(trend),
        samples_used=len(records),
        skipped_infeasible_p=skipped_p,
        skipped_degenerate=skipped_deg,
        status="ok" if records else "no_usable_samples",
        params={**schedule.params(), "seed": seed},
        notes=(_SINGLE_PROJECTION_NOTE,),
        samples=tuple(records),
    )


# ---------------------------------------------------------------------------
# Pair ratios: two-parameter and one-sided Lipschitz behavior
# ---------------------------------------------------------------------------


def _lolip_directions(dp: int, n: int, seed: int) -> np.ndarray:
    """Unit-sphere parameter directions.

    Drawing on the sphere keeps every sampled parameter at separation
    exactly delta_k from the base, so per-step suprema compare points at
    matched distances and shrinking steps stratify the neighborhood.
    """
    pts = unit_ball_points(dp, n, seed)
    dirs = np.empty_like(pts)
    for i, u in enumerate(pts):
        norm = float(np.linalg.norm(u))
        if norm < 1e-12:
            dirs[i] = np.zeros(dp)
            dirs[i][0] = 1.0
        else:
            dirs[i] = u / norm
    return dirs


def _lolip_step_parameters(p0a: np.ndarray, delta_k: float, dirs: np.ndarray):
    """Stencil parameters first, then rescaled low-discrepancy ones."""
    for i in range(len(p0a)):
        for s in (1.0, -1.0):
            p = p0a.copy()
            p[i] += s * delta_k
            yield p, "stencil"
    for u in dirs:
        yield p0a + delta_k * u, "sampled"


def estimate_lower_lipschitz(
    sys: ParametricSystem,
    p0: Sequence[float],
    x0: Sequence[float],
    delta: float,
    n: int = 16,
    seed: int = 0,
    steps: int = 6,
    factor: float = 0.5,
    opts: ProjectOptions = ProjectOptions(),
) -> RegularityReport:
    """Sup of dist(x0, F(p)) / |p - p0| over p sampled from shrinking
    parameter balls around p0."""
    p0t, x0t = _require_feasible_base(sys, p0, x0)
    params = {"delta": delta, "n": n, "seed": seed, "steps": steps, "factor": factor}
    if sys.dp == 0:
        return _constant_map_report("lower_lipschitz", params)
    schedule = ShrinkSchedule(r0=delta, factor=factor, steps=steps, samples_per_step=n)
    p0a = np.array(p0t)
    dirs = _lolip_directions(sys.dp, n, seed)
    records: list[SampleRecord] = []
    skipped_p = 0
    skipped_deg = 0
    for k, r in enumerate(schedule.radii):
        for p, source in _lolip_step_parameters(p0a, r, dirs):
            pt = tuple(float(t) for t in p)
            sep = float(np.linalg.norm(p - p0a))
            if sep < PAIR_SEPARATION:
                skipped_deg += 1
                continue
            res = project(sys, pt, x0t, opts)
            if not res.converged:
                skipped_p += 1
                continue
            records.append(
                SampleRecord(
                    step=k,
                    radius=r,
                    p_from=p0t,
                    p_to=pt,
                    point=x0t,
                    value=res.distance / sep,
                    source=source,
                )
            )
    trend, estimate, witness = _trend_and_estimate(records, schedule.radii)
    return RegularityReport(
        kind="lower_lipschitz",
        estimate=estimate,
        witness=witness,
        trend=trend,
        diverging=_is_diverging(trend),
        samples_used=len(records),
        skipped_infeasible_p=skipped_p,
        skipped_degenerate=skipped_deg,
        status="ok" if records else "no_usable_samples",
        params=params,
        notes=(_SINGLE_PROJECTION_NOTE,),
        samples=tuple(records),
    )


def estimate_aubin_modulus(
    sys: ParametricSystem,
    p0: Sequence[float],
    x0: Sequence[float],
    delta: float,
    eps: float,
    n_pairs: int = 16,
    seed: int = 0,
    steps: int = 6,
    factor: float = 0.5,
    opts: ProjectOptions = ProjectOptions(),
) -> RegularityReport:
    """Sup of dist(x, F(p2)) / |p1 - p2| over parameter pairs sampled
    from shrinking balls and slice points x in F(p1) within eps of x0.

    The first block of every step fixes p1 = p0 and x = x0 and sweeps p2
    through exactly the parameters used by :func:`estimate_lower_lipschitz`
    with the same (delta, n, seed, steps, factor), so the one-sided
    estimate can never exceed this one on shared inputs.
    """
    p0t, x0t = _require_feasible_base(sys, p0, x0)
    params = {
        "delta": delta,
        "eps": eps,
        "n_pairs": n_pairs,
        "seed": seed,
        "steps": steps,
        "factor": factor,
    }
    if sys.dp == 0:
        return _constant_map_report("aubin", params)
    if eps <= 0:
        raise ValueError("eps must be positive")
    schedule = ShrinkSchedule(r0=delta, factor=factor, steps=steps, samples_per_step=n_pairs)
    p0a, x0a = np.array(p0t), np.array(x0t)
    slice_dirs = _lolip_directions(sys.dp, n_pairs, seed)
    triple_dirs = unit_ball_points(2 * sys.dp + sys.dx, n_pairs, seed)
    records: list[SampleRecord] = []
    skipped_p = 0
    skipped_deg = 0
    for k, r in enumerate(schedule.radii):
        # One-sided slice block: p1 = p0, x = x0.
        for p2, source in _lolip_step_parameters(p0a, r, slice_dirs):
            rec = _pair_ratio_record(sys, p0t, x0t, p2, k, r, source, opts)
            if rec == "infeasible":
                skipped_p += 1
            elif rec == "degenerate":
                skipped_deg += 1
            else:
                records.append(rec)
        # Generic block: both parameters perturbed, slice point projected
        # from an eps-perturbation of x0 onto F(p1).
        for u in triple_dirs:
            p1 = p0a + r * u[: sys.dp]
            p2 = p0a + r * u[sys.dp : 2 * sys.dp]
            w = u[2 * sys.dp :]
            p1t = tuple(float(t) for t in p1)
            res1 = project(sys, p1t, tuple(x0a + eps * w), opts)
            if not res1.converged:
                skipped_p += 1
                continue
            x_slice = res1.x_star
            if float(np.linalg.norm(x_slice - x0a)) > eps:
                skipped_deg += 1
                continue
            rec = _pair_ratio_record(
                sys, p1t, tuple(float(t) for t in x_slice), p2, k, r, "sampled", opts
            )
            if rec == "infeasible":
                skipped_p += 1
            elif rec == "degenerate":
                skipped_deg += 1
            else:
                records.append(rec)
    trend, estimate, witness = _trend_and_estimate(records, schedule.radii)
    return RegularityReport(
        kind="aubin",
        estimate=estimate,
        witness=witness,
        trend=trend,
        diverging=_is_diverging(trend),
        samples_used=len(records),
        skipped_infeasible_p=skipped_p,
        skipped_degenerate=skipped_deg,
        status="ok" if records else "no_usable_samples",
        params=params,
        notes=(_SINGLE_PROJECTION_NOTE,),
        samples=tuple(records),
    )


def _pair_ratio_record(sys, p1t, xt, p2, step, radius, source, opts):
    p2t = tuple(float(t) for t in p2)
    sep = float(np.linalg.norm(np.array(p2t) - np.array(p1t)))
    if sep < PAIR_SEPARATION:
        return "degenerate"
    res = project(sys, p2t, xt, opts)
    if not res.converged:
        return "infeasible"
    return SampleRecord(
        step=step,
        radius=radius,
        p_from=p1t,
        p_to=p2t,
        point=xt,
        value=res.distance / sep,
        source=source,
    )


def _constant_map_report(kind: str, params: dict) -> RegularityReport:
    """Zero-dimensional parameter space: the map never moves, and both
    pair-ratio moduli are exactly zero with no samples to draw."""
    return RegularityReport(
        kind=kind,
        estimate=0.0,
        witness=None,
        trend=(),
        diverging=False,
        samples_used=0,
        skipped_infeasible_p=0,
        skipped_degenerate=0,
        status="ok",
        params=params,
        notes=(_SINGLE_PROJECTION_NOTE, _CONSTANT_MAP_NOTE),
        samples=(),
    )


# ---------------------------------------------------------------------------
# Lower semicontinuity probe
# ---------------------------------------------------------------------------


def check_lsc(
    sys: ParametricSystem,
    p0: Sequence[float],
    x0: Sequence[float],
    delta: float,
    eps: float,
    n: int = 32,
    seed: int = 0,
    opts: ProjectOptions = ProjectOptions(),
) -> LscReport:
    """Does F(p) stay within eps of x0 for sampled p near p0?

    Evaluates dist(x0, F(p)) for p in the half/quarter-radius stencil
    (half first, so sign-dependent failures produce predictable
    witnesses), then the full-radius stencil, then low-discrepancy
    samples.  The first p with distance >= eps becomes the witness.
    """
    p0t, x0t = _require_feasible_base(sys, p0, x0)
    if delta <= 0 or eps <= 0:
        raise ValueError("delta and eps must be positive")
    params = {"delta": delta, "eps": eps, "n": n, "seed": seed}
    if sys.dp == 0:
        return LscReport(
            holds_on_samples=True,
            witness=None,
            witness_distance=None,
            n_checked=1,
            skipped_infeasible_p=0,
            params=params,
            notes=(_SINGLE_PROJECTION_NOTE, _CONSTANT_MAP_NOTE),
            samples=(
                SampleRecord(
                    step=0, radius=0.0, p_from=p0t, p_to=p0t, point=x0t, value=0.0, source="stencil"
                ),
            ),
        )
    p0a = np.array(p0t)
    pool: list[tuple[np.ndarray, str]] = []
    for scale in (0.5, 0.25, 1.0):
        for i in range(sys.dp):
            for s in (1.0, -1.0):
                p = p0a.copy()
                p[i] += s * scale * delta
                pool.append((p, "stencil"))
    for u in unit_ball_points(sys.dp, n, seed):
        pool.append((p0a + delta * u, "sampled"))
    records: list[SampleRecord] = []
    skipped_p = 0
    witness = None
    witness_distance = None
    for p, source in pool:
        pt = tuple(float(t) for t in p)
        res = project(sys, pt, x0t, opts)
        if not res.converged:
            skipped_p += 1
            continue
        records.append(
            SampleRecord(
                step=0,
                radius=delta,
                p_from=p0t,
                p_to=pt,
                point=x0t,
                value=res.distance,
                source=source,
            )
        )
        if witness is None and res.distance >= eps:
            witness = pt
            witness_distance = res.distance
    return LscReport(
        holds_on_samples=witness is None,
        witness=witness,
        witness_distance=witness_distance,
        n_checked=len(records),
        skipped_infeasible_p=skipped_p,
        params=params,
        notes=(_SINGLE_PROJECTION_NOTE,),
        samples=tuple(records),
    )


# ---------------------------------------------------------------------------
# Cone comparison
# ---------------------------------------------------------------------------

_GAMMA_TOL = 1e-9
_TANGENT_THRESHOLD = 1e-3
_DEFAULT_T_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)


def cone_compare(
    sys: ParametricSystem,
    p: Sequence[float],
    x: Sequence[float],
    directions: Sequence[Sequence[float]],
    t_schedule: Sequence[float] = _DEFAULT_T_SCHEDULE,
    eta: float | None = None,
    cq_verified: bool = False,
    opts: ProjectOptions = ProjectOptions(),
) -> ConeCompareReport:
    """Compare linearized-cone membership with sampled tangency.

    ``in_gamma``: every active inequality gradient has inner product
    <= 1e-9 with the direction, every equality gradient has absolute
    inner product <= 1e-9.  Tangency: dist(x + t d, F(p)) / t must fall
    to <= 1e-3 at the last t without net growth.  When the caller vouches
    that the constant-rank check verified this base point
    (``cq_verified``), any disagreement is flagged: under a verified
    certificate the two classifications must coincide, so disagreement
    indicates a tolerance failure or bug.
    """
    pt, xt = _require_feasible_base(sys, p, x)
    if not t_schedule or any(t <= 0 for t in t_schedule):
        raise ValueError("t_schedule must contain positive values")
    active = sys.active_set(pt, xt, eta=eta)
    jac_active = (
        sys.jacobian(pt, xt, rows=active.indices) if active.indices else np.empty((0, sys.dx))
    )
    eq_rows = list(range(sys.n_ineq + 1, sys.n + 1))
    jac_eq = sys.jacobian(pt, xt, rows=eq_rows) if eq_rows else np.empty((0, sys.dx))
    records: list[DirectionRecord] = []
    for d in directions:
        da = np.asarray(d, dtype=float)
        if da.shape != (sys.dx,):
            raise ValueError(f"direction {d!r} has wrong dimension")
        nrm = float(np.linalg.norm(da))
        if abs(nrm - 1.0) > 1e-6:
            raise ValueError(f"direction {d!r} is not unit norm")
        in_gamma = bool(
            np.all(jac_active @ da <= _GAMMA_TOL) and np.all(np.abs(jac_eq @ da) <= _GAMMA_TOL)
        )
        ratios: list[tuple[float, float]] = []
        inconclusive = False
        for t in t_schedule:
            res = project(sys, pt, tuple(np.array(xt) + t * da), opts)
            # Tangency only needs the distance to a certified-feasible
            # point, so a projection whose multiplier recovery stalled
            # (degenerate active gradients) still yields a usable ratio.
            if not math.isfinite(res.distance) or res.feas_residual > opts.tol_feas:
                inconclusive = True
                break
            ratios.append((float(t), res.distance / float(t)))
        if inconclusive:
            records.append(
                DirectionRecord(
                    direction=tuple(float(t) for t in da),
                    in_gamma=in_gamma,
                    ratios=tuple(ratios),
                    tangent_on_samples=None,
                    agree=None,
                    status="inconclusive",
                )
            )
            continue
        last = ratios[-1][1]
        first = ratios[0][1]
        tangent = last <= _TANGENT_THRESHOLD and last <= first + 1e-9
        records.append(
            DirectionRecord(
                direction=tuple(float(t) for t in da),
                in_gamma=in_gamma,
                ratios=tuple(ratios),
                tangent_on_samples=tangent,
                agree=tangent == in_gamma,
                status="ok",
            )
        )
    conclusive = [rec for rec in records if rec.status == "ok"]
    all_agree = all(rec.agree for rec in conclusive) if conclusive else True
    return ConeCompareReport(
        p=pt,
        x=xt,
        records=tuple(records),
        all_agree=all_agree,
        flagged_disagreement=bool(cq_verified and not all_agree),
        params={
            "t_schedule": tuple(float(t) for t in t_schedule),
            "n_directions": len(records),
            "gamma_tol": _GAMMA_TOL,
            "tangent_threshold": _TANGENT_THRESHOLD,
            "cq_verified": cq_verified,
        },
        notes=(_SINGLE_PROJECTION_NOTE,),
    )


# ---------------------------------------------------------------------------
# Witness replay
# ---------------------------------------------------------------------------


def replay_sample(
    sys: ParametricSystem,
    kind: str,
    record: SampleRecord,
    opts: ProjectOptions = ProjectOptions(),
) -> float:
    """Recompute a recorded sample's value from scratch.

    Deterministic projections make replay exact; reports promise
    agreement within 1e-9.
    """
    if kind == "r_modulus":
        residual = sys.residual(record.p_to, record.point)
        res = project(sys, record.p_to, record.point, opts)
        if not res.converged:
            raise ValueError("projection did not converge on replay")
        return res.distance / residual
    if kind == "multiplier_bound":
        res = project(sys, record.p_to, record.point, opts)
        if not res.converged:
            raise ValueError("projection did not converge on replay")
        return min_multiplier_norm(sys, record.p_to, res.x_star, record.point)
    if kind in ("aubin", "lower_lipschitz"):
        if record.p_from is None:
            raise ValueError("pair-ratio record lacks p_from")
        sep = float(np.linalg.norm(np.array(record.p_to) - np.array(record.p_from)))
        res = project(sys, record.p_to, record.point, opts)
        if not res.converged:
            raise ValueError("projection did not converge on replay")
        return res.distance / sep
    if kind == "lsc":
        res = project(sys, record.p_to, record.point, opts)
        if not res.converged:
            raise ValueError("projection did not converge on replay")
        return res.distance
    raise ValueError(f"unknown report kind {kind!r}")
