"""Shared numerical kernels.

Rank decisions go through one SVD-based routine so every module applies
the same thresholding.  The brute-force grid oracles are deliberately
independent of the iterative solvers and serve as ground truth in tests
at small dimensions.  Sampling helpers produce deterministic
low-discrepancy point sets: the same seed always yields the same points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import lsq_linear
from scipy.stats import qmc

from .system import DEFAULT_TOL_FEAS, ParametricSystem

__all__ = [
    "DEFAULT_RANK_TOL",
    "RankResult",
    "numerical_rank",
    "max_li_subset",
    "MinNormSolution",
    "nnls_minnorm",
    "GridBracket",
    "GridEmptyError",
    "grid_distance",
    "grid_min",
    "ball_points",
    "unit_ball_points",
    "unit_sphere_points",
]

DEFAULT_RANK_TOL = 1e-7

_GRID_MAX_DIM = 3
_GRID_MAX_PER_AXIS = 401


# ---------------------------------------------------------------------------
# Rank
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RankResult:
    """Numerical rank with the evidence used to decide it."""

    rank: int
    singular_values: tuple[float, ...]
    threshold_used: float


def numerical_rank(matrix: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> RankResult:
    """Rank of ``matrix`` as the number of singular values above
    ``rank_tol * max(largest_singular_value, 1)``.

    An empty matrix (no rows or no columns) has rank 0.
    """
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    if a.size == 0:
        return RankResult(rank=0, singular_values=(), threshold_used=rank_tol)
    sv = np.linalg.svd(a, compute_uv=False)
    threshold = rank_tol * max(float(sv[0]), 1.0)
    rank = int(np.sum(sv > threshold))
    return RankResult(rank=rank, singular_values=tuple(float(s) for s in sv), threshold_used=threshold)


def max_li_subset(rows: Sequence[np.ndarray], rank_tol: float = DEFAULT_RANK_TOL) -> tuple[int, ...]:
    """Greedy maximal linearly independent subset of ``rows``.

    Scans rows in order and keeps each row that increases the numerical
    rank, so earlier rows win ties.  Returns 0-based row positions; the
    result size equals the numerical rank of the full stack.
    """
    selected: list[int] = []
    stack: list[np.ndarray] = []
    for i, row in enumerate(rows):
        candidate = stack + [np.asarray(row, dtype=float)]
        if numerical_rank(np.vstack(candidate), rank_tol).rank > len(stack):
            selected.append(i)
            stack = candidate
    return tuple(selected)


# ---------------------------------------------------------------------------
# Sign-constrained min-norm least squares
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinNormSolution:
    """Least-squares solution of smallest Euclidean norm.

    ``coeffs[i] >= 0`` unless column ``i`` was marked sign-free.
    """

    coeffs: np.ndarray
    residual: float


def nnls_minnorm(
    columns: np.ndarray,
    b: np.ndarray,
    sign_free: Sequence[int] = (),
) -> MinNormSolution:
    """Minimize ``||A @ coeffs - b||`` subject to sign constraints, and
    among minimizers pick the one of least Euclidean norm.

    ``columns`` has shape ``(d, k)`` with one column per coefficient;
    ``sign_free`` lists 0-based columns allowed to be negative.  The
    min-norm selection runs a vanishing Tikhonov sequence (three decades)
    and Richardson-extrapolates the last two solutions, rather than
    enumerating active sets.
    """
    a = np.asarray(columns, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    if a.ndim != 2:
        raise ValueError("columns must be a 2-d array")
    d, k = a.shape
    if len(b) != d:
        raise ValueError(f"b has length {len(b)}, expected {d}")
    if k == 0:
        return MinNormSolution(coeffs=np.zeros(0), residual=float(np.linalg.norm(b)))

    free = set(int(i) for i in sign_free)
    if not all(0 <= i < k for i in free):
        raise ValueError("sign_free indices out of range")
    lower = np.array([-np.inf if i in free else 0.0 for i in range(k)])
    upper = np.full(k, np.inf)

    # The sign-constraint cone is invariant under positive scaling, so
    # normalizing b is exact and keeps lsq_linear's internal tolerances
    # meaningful when b is many orders of magnitude from unit size.
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return MinNormSolution(coeffs=np.zeros(k), residual=0.0)
    b = b / b_norm

    scale = max(1.0, float(np.linalg.norm(a)))
    solutions = []
    epsilons = [1e-4 * scale, 1e-5 * scale, 1e-6 * scale]
    for eps in epsilons:
        a_aug = np.vstack([a, eps * np.eye(k)])
        b_aug = np.concatenate([b, np.zeros(k)])
        # lsq_linear's trust-region internals can transiently produce
        # inf*0 on badly scaled columns; the returned solution is still
        # checked against the direct solve below.
        with np.errstate(invalid="ignore"):
            res = lsq_linear(a_aug, b_aug, bounds=(lower, upper), tol=1e-14, max_iter=500)
        solutions.append(res.x)

    # Tikhonov bias is O(eps^2); extrapolate the two smallest-eps solves.
    l1, l2 = solutions[-2], solutions[-1]
    w = epsilons[-1] ** 2 / (epsilons[-2] ** 2 - epsilons[-1] ** 2)
    lam = l2 + (l2 - l1) * w
    for i in range(k):
        if i not in free:
            lam[i] = max(lam[i], 0.0)
    residual = float(np.linalg.norm(a @ lam - b))

    # Guard: extrapolation must not worsen the fit beyond the direct solve.
    direct = solutions[-1]
    direct_res = float(np.linalg.norm(a @ direct - b))
    if residual > direct_res + 1e-12 * scale:
        lam, residual = direct, direct_res
    return MinNormSolution(coeffs=lam * b_norm, residual=residual * b_norm)


# ---------------------------------------------------------------------------
# Brute-force grid oracles
# ---------------------------------------------------------------------------


class GridEmptyError(Exception):
    """No feasible grid point inside the box at this resolution."""


@dataclass(frozen=True)
class GridBracket:
    """Distance bracket from an exhaustive feasibility sweep.

    ``upper`` is the distance to the nearest grid point that is feasible
    at ``tol_feas``; ``lower = max(0, upper - diagonal)`` where
    ``diagonal`` is the length of one grid cell's diagonal.
    """

    lower: float
    upper: float
    diagonal: float
    spacing: tuple[float, ...]
    n_feasible: int
    tol_feas: float
    nearest: tuple[float, ...]


def _make_grid(box: Sequence[tuple[float, float]], n_per_axis: int):
    axes = [np.linspace(lo, hi, n_per_axis) for lo, hi in box]
    return np.meshgrid(*axes, indexing="ij")


def _check_grid_args(sys: ParametricSystem, box, n_per_axis: int) -> None:
    if sys.dx > _GRID_MAX_DIM:
        raise ValueError(f"grid oracle supports dx <= {_GRID_MAX_DIM}, got dx={sys.dx}")
    if not 2 <= n_per_axis <= _GRID_MAX_PER_AXIS:
        raise ValueError(f"n_per_axis must be in 2..{_GRID_MAX_PER_AXIS}")
    if len(box) != sys.dx:
        raise ValueError(f"box must have {sys.dx} (lo, hi) pairs")
    for lo, hi in box:
        if not lo < hi:
            raise ValueError("box bounds must satisfy lo < hi")


def grid_distance(
    sys: ParametricSystem,
    p: Sequence[float],
    v: Sequence[float],
    box: Sequence[tuple[float, float]],
    n_per_axis: int = 201,
    tol_feas: float = DEFAULT_TOL_FEAS,
) -> GridBracket:
    """Bracket the distance from ``v`` to the feasible set by exhaustive
    sweep over a regular grid in ``box``.

    The caller must choose a box containing the region of interest; the
    bracket is only meaningful when the nearest feasible point lies well
    inside.  Raises :class:`GridEmptyError` when no grid point is feasible
    at ``tol_feas``.
    """
    _check_grid_args(sys, box, n_per_axis)
    grids = _make_grid(box, n_per_axis)
    residual = sys.residual_grid(p, grids)
    feasible = residual <= tol_feas  # NaN compares false
    n_feasible = int(np.count_nonzero(feasible))
    if n_feasible == 0:
        raise GridEmptyError(
            f"no feasible grid point in box at resolution {n_per_axis} (tol_feas={tol_feas})"
        )
    v = np.asarray(v, dtype=float)
    dist2 = np.zeros_like(residual)
    for axis_vals, vi in zip(grids, v):
        dist2 = dist2 + (axis_vals - vi) ** 2
    dist2 = np.where(feasible, dist2, np.inf)
    flat_idx = int(np.argmin(dist2))
    upper = float(np.sqrt(dist2.flat[flat_idx]))
    spacing = tuple((hi - lo) / (n_per_axis - 1) for lo, hi in box)
    diagonal = float(np.sqrt(sum(s * s for s in spacing)))
    nearest = tuple(float(g.flat[flat_idx]) for g in grids)
    return GridBracket(
        lower=max(0.0, upper - diagonal),
        upper=upper,
        diagonal=diagonal,
        spacing=spacing,
        n_feasible=n_feasible,
        tol_feas=tol_feas,
        nearest=nearest,
    )


def grid_min(
    sys: ParametricSystem,
    p: Sequence[float],
    objective,
    box: Sequence[tuple[float, float]],
    n_per_axis: int = 201,
    tol_feas: float = DEFAULT_TOL_FEAS,
) -> tuple[float, tuple[float, ...]]:
    """Minimum of ``objective`` over feasible grid points; ground-truth
    companion to the local lower-level solver at dx <= 3.

    ``objective`` is an Expr over the same dimensions.  Returns the best
    value and the grid point attaining it.
    """
    _check_grid_args(sys, box, n_per_axis)
    grids = _make_grid(box, n_per_axis)
    residual = sys.residual_grid(p, grids)
    feasible = residual <= tol_feas
    if not np.any(feasible):
        raise GridEmptyError(
            f"no feasible grid point in box at resolution {n_per_axis} (tol_feas={tol_feas})"
        )
    vals = objective.eval_array(p, grids)
    vals = np.where(feasible & np.isfinite(vals), vals, np.inf)
    flat_idx = int(np.argmin(vals))
    return float(vals.flat[flat_idx]), tuple(float(g.flat[flat_idx]) for g in grids)


# ---------------------------------------------------------------------------
# Deterministic low-discrepancy sampling
# ---------------------------------------------------------------------------


def _halton_unit_cube(dim: int, n: int, seed: int) -> np.ndarray:
    sampler = qmc.Halton(d=dim, scramble=True, seed=int(seed))
    return sampler.random(n)


def unit_ball_points(dim: int, n: int, seed: int) -> np.ndarray:
    """``n`` scrambled-Halton points in the closed unit ball, shape
    ``(n, dim)``.  Deterministic for a given ``(dim, n, seed)``.

    ``dim == 0`` returns ``n`` empty rows (useful for parameter-free
    systems).
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if dim == 0:
        return np.zeros((n, 0))
    sampler = qmc.Halton(d=dim, scramble=True, seed=int(seed))
    out: list[np.ndarray] = []
    while len(out) < n:
        batch = 2.0 * sampler.random(max(2 * (n - len(out)), 8)) - 1.0
        for row in batch:
            if np.dot(row, row) <= 1.0:
                out.append(row)
                if len(out) == n:
                    break
    return np.array(out)


def unit_sphere_points(dim: int, n: int, seed: int) -> np.ndarray:
    """``n`` deterministic points on the unit sphere."""
    if dim == 0:
        return np.zeros((n, 0))
    pts = unit_ball_points(dim, max(2 * n, 8), seed)
    out = []
    for row in pts:
        norm = float(np.linalg.norm(row))
        if norm > 1e-9:
            out.append(row / norm)
            if len(out) == n:
                break
    return np.array(out)


def ball_points(center: Sequence[float], radius: float, n: int, seed: int) -> np.ndarray:
    """Deterministic low-discrepancy points in a ball around ``center``."""
    c = np.asarray(center, dtype=float)
    return c + radius * unit_ball_points(len(c), n, seed)
