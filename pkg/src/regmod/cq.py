"""Constant-rank checks for parametric constraint systems.

``check_rcrcq`` tests whether every subfamily of active constraint
gradients keeps a constant rank in a neighborhood of a base point.  The
check enumerates all subsets of the active inequalities (the equality
block participates in every subset, and alone in the empty subset),
computes each subfamily's rank at the base point, and compares against
ranks sampled across a ball in joint parameter-variable space.

A "violated" verdict carries a concrete witness point and is a
certificate up to rank tolerance.  A passing verdict is reported as
"verified_on_samples": sampling can never prove rank constancy on a
continuum, so the wording is deliberate and fixed.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .numerics import DEFAULT_RANK_TOL, ball_points, max_li_subset, numerical_rank
from .system import DEFAULT_TOL_FEAS, ActiveSet, ParametricSystem

__all__ = [
    "ACTIVE_SET_CAP",
    "ActiveSetCapError",
    "InfeasibleBaseError",
    "SubsetRankRecord",
    "RcrcqReport",
    "check_rcrcq",
    "select_i0_prime",
]

ACTIVE_SET_CAP = 12

_DOMAIN_FAULTS = (ZeroDivisionError, ValueError, OverflowError, FloatingPointError)


class InfeasibleBaseError(ValueError):
    """The base point is not feasible at the base parameter."""


class ActiveSetCapError(ValueError):
    """Too many active constraints for exhaustive subset enumeration.

    Subset enumeration is intentionally exhaustive: the property being
    checked quantifies over every subset, and silently subsampling
    subsets would change what "verified" means.  Beyond the cap the
    check refuses instead.
    """


@dataclass(frozen=True)
class SubsetRankRecord:
    """Rank behavior of one gradient subfamily.

    ``subset`` lists the active inequality indices joined with the
    equality block (1-based, inequality numbering); ``witness`` is the
    first sampled (p, x) whose rank differs from ``base_rank``, or None.
    """

    subset: tuple[int, ...]
    base_rank: int
    sampled_rank_min: int
    sampled_rank_max: int
    witness: tuple[tuple[float, ...], tuple[float, ...]] | None
    witness_rank: int | None

    @property
    def constant(self) -> bool:
        return self.sampled_rank_min == self.base_rank == self.sampled_rank_max


@dataclass(frozen=True)
class RcrcqReport:
    base_p: tuple[float, ...]
    base_x: tuple[float, ...]
    active: ActiveSet
    per_subset: tuple[SubsetRankRecord, ...]
    verdict: str  # "verified_on_samples" | "violated"
    radius: float
    n_samples: int
    seed: int
    rank_tol: float
    n_points_evaluated: int
    n_points_skipped: int

    @property
    def violated(self) -> bool:
        return self.verdict == "violated"

    def witnesses(self) -> list[SubsetRankRecord]:
        return [rec for rec in self.per_subset if rec.witness is not None]


def _sample_points(
    z0: np.ndarray, radius: float, n_samples: int, seed: int
) -> list[np.ndarray]:
    """Deterministic evaluation order: axis stencil at half/quarter
    radius first (stable across seeds, so witnesses are reproducible),
    then the seeded low-discrepancy ball samples."""
    points: list[np.ndarray] = []
    dim = len(z0)
    for axis in range(dim):
        for offset in (0.5 * radius, -0.5 * radius, 0.25 * radius, -0.25 * radius):
            z = z0.copy()
            z[axis] += offset
            points.append(z)
    if n_samples > 0:
        points.extend(ball_points(z0, radius, n_samples, seed))
    return points


def check_rcrcq(
    sys: ParametricSystem,
    p0: Sequence[float],
    x0: Sequence[float],
    radius: float = 1e-2,
    n_samples: int = 64,
    rank_tol: float = DEFAULT_RANK_TOL,
    eta: float | None = None,
    seed: int = 0,
    tol_feas: float = DEFAULT_TOL_FEAS,
) -> RcrcqReport:
    """Sample-based constant-rank verdict at ``(p0, x0)``.

    Samples live in the joint (p, x) ball of the given radius: the rank
    condition concerns a full neighborhood, not just feasible points.
    """
    sys._check_dims(p0, x0)
    if radius <= 0:
        raise ValueError("radius must be positive")
    p0 = tuple(float(t) for t in p0)
    x0 = tuple(float(t) for t in x0)
    if sys.residual(p0, x0) > tol_feas:
        raise InfeasibleBaseError(
            f"base point is infeasible: residual {sys.residual(p0, x0):.3e} > {tol_feas:.3e}"
        )
    active = sys.active_set(p0, x0, eta=eta)
    if len(active.indices) > ACTIVE_SET_CAP:
        raise ActiveSetCapError(
            f"{len(active.indices)} active constraints exceed the enumeration cap "
            f"of {ACTIVE_SET_CAP} (2^{len(active.indices)} subsets)"
        )

    eq_rows = list(range(sys.n_ineq + 1, sys.n + 1))
    subsets: list[tuple[int, ...]] = []
    for size in range(len(active.indices) + 1):
        subsets.extend(combinations(active.indices, size))

    z0 = np.array(p0 + x0, dtype=float)
    dp = sys.dp
    points = _sample_points(z0, radius, n_samples, seed)

    base_jac = sys.jacobian(p0, x0)
    sampled_jacs: list[tuple[tuple[float, ...], tuple[float, ...], np.ndarray]] = []
    n_skipped = 0
    for z in points:
        p = tuple(z[:dp])
        x = tuple(z[dp:])
        try:
            jac = sys.jacobian(p, x)
        except _DOMAIN_FAULTS:
            n_skipped += 1
            continue
        if not np.all(np.isfinite(jac)):
            n_skipped += 1
            continue
        sampled_jacs.append((p, x, jac))

    records: list[SubsetRankRecord] = []
    for subset in subsets:
        rows0 = [i - 1 for i in subset] + [i - 1 for i in eq_rows]
        base_rank = numerical_rank(base_jac[rows0], rank_tol).rank
        rmin = base_rank
        rmax = base_rank
        witness = None
        witness_rank = None
        for p, x, jac in sampled_jacs:
            r = numerical_rank(jac[rows0], rank_tol).rank
            rmin = min(rmin, r)
            rmax = max(rmax, r)
            if witness is None and r != base_rank:
                witness = (p, x)
                witness_rank = r
        records.append(
            SubsetRankRecord(
                subset=subset,
                base_rank=base_rank,
                sampled_rank_min=rmin,
                sampled_rank_max=rmax,
                witness=witness,
                witness_rank=witness_rank,
            )
        )

    verdict = "violated" if any(not rec.constant for rec in records) else "verified_on_samples"
    return RcrcqReport(
        base_p=p0,
        base_x=x0,
        active=active,
        per_subset=tuple(records),
        verdict=verdict,
        radius=float(radius),
        n_samples=int(n_samples),
        seed=int(seed),
        rank_tol=float(rank_tol),
        n_points_evaluated=len(sampled_jacs),
        n_points_skipped=n_skipped,
    )


def select_i0_prime(
    sys: ParametricSystem,
    p0: Sequence[float],
    x0: Sequence[float],
    rank_tol: float = DEFAULT_RANK_TOL,
) -> tuple[int, ...]:
    """Greedy maximal linearly independent subfamily of the equality
    gradients at ``(p0, x0)``.

    Returns full-system constraint indices (1-based, equality block);
    its size equals the numerical rank of the equality gradient block.
    Earlier constraints win ties, so the selection is deterministic.
    """
    sys._check_dims(p0, x0)
    if sys.n_eq == 0:
        return ()
    eq_rows = list(range(sys.n_ineq + 1, sys.n + 1))
    jac = sys.jacobian(p0, x0, rows=eq_rows)
    positions = max_li_subset(jac, rank_tol)
    return tuple(eq_rows[k] for k in positions)
