"""Parametric constraint systems.

A system holds inequality constraints ``h_1..h_m <= 0`` and equality
constraints ``h_{m+1}..h_n = 0``, each an :class:`~regmod.expr.Expr` over
a shared parameter block ``p`` (dimension ``dp``) and decision block ``x``
(dimension ``dx``).  Constraint indices are 1-based everywhere in the
public interface, matching the labels ``h1..hn`` used in problem files;
inequalities occupy ``1..m`` and equalities ``m+1..n``.

Membership in the domain of the feasible-set map is only ever detected
operationally: a converged projection certifies that a parameter has a
nonempty feasible set, while failure to converge is reported as such and
never as a proof of emptiness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import Expr

__all__ = ["ActiveSet", "ParametricSystem", "DEFAULT_TOL_FEAS"]

DEFAULT_TOL_FEAS = 1e-8


@dataclass(frozen=True)
class ActiveSet:
    """Inequality constraints within ``eta`` of zero at a point.

    ``indices`` are 1-based inequality indices, sorted ascending.
    """

    indices: tuple[int, ...]
    eta: float

    def __contains__(self, i: int) -> bool:
        return i in self.indices


class ParametricSystem:
    """Immutable bundle of inequality and equality constraints."""

    __slots__ = ("name", "dp", "dx", "ineq", "eq", "_bundles")

    def __init__(
        self,
        name: str,
        dp: int,
        dx: int,
        ineq: Sequence[Expr],
        eq: Sequence[Expr] = (),
    ):
        if dp < 0 or dx <= 0:
            raise ValueError("need dp >= 0 and dx >= 1")
        for e in list(ineq) + list(eq):
            if e.dp != dp or e.dx != dx:
                raise ValueError(
                    f"constraint dimensions ({e.dp}, {e.dx}) do not match system ({dp}, {dx})"
                )
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "dp", dp)
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "ineq", tuple(ineq))
        object.__setattr__(self, "eq", tuple(eq))
        object.__setattr__(self, "_bundles", {})

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("ParametricSystem is immutable")

    @property
    def n_ineq(self) -> int:
        return len(self.ineq)

    @property
    def n_eq(self) -> int:
        return len(self.eq)

    @property
    def n(self) -> int:
        return len(self.ineq) + len(self.eq)

    def constraint(self, index: int) -> Expr:
        """Constraint by 1-based index (inequalities first)."""
        if not 1 <= index <= self.n:
            raise IndexError(f"constraint index {index} out of range 1..{self.n}")
        if index <= self.n_ineq:
            return self.ineq[index - 1]
        return self.eq[index - self.n_ineq - 1]

    def is_equality(self, index: int) -> bool:
        return index > self.n_ineq

    def label(self, index: int) -> str:
        if self.is_equality(index):
            return f"e{index - self.n_ineq}"
        return f"h{index}"

    def __repr__(self) -> str:
        return (
            f"ParametricSystem({self.name!r}, dp={self.dp}, dx={self.dx}, "
            f"m={self.n_ineq}, equalities={self.n_eq})"
        )

    # -- evaluation -----------------------------------------------------

    def _check_dims(self, p: Sequence[float], x: Sequence[float]) -> None:
        if len(p) != self.dp:
            raise ValueError(f"expected {self.dp} parameter values, got {len(p)}")
        if len(x) != self.dx:
            raise ValueError(f"expected {self.dx} decision values, got {len(x)}")

    def values(self, p: Sequence[float], x: Sequence[float]) -> np.ndarray:
        """All constraint values ``(h_1(p,x), ..., h_n(p,x))``."""
        self._check_dims(p, x)
        return np.array([e.eval(p, x) for e in self.ineq + self.eq])

    def residual(self, p: Sequence[float], x: Sequence[float]) -> float:
        """Feasibility residual ``max(0, h_i for i in I, |h_j| for j in I0)``.

        Zero exactly on the feasible set; always nonnegative.
        """
        self._check_dims(p, x)
        r = 0.0
        for e in self.ineq:
            r = max(r, e.eval(p, x))
        for e in self.eq:
            r = max(r, abs(e.eval(p, x)))
        return r

    def is_feasible(self, p: Sequence[float], x: Sequence[float], tol_feas: float = DEFAULT_TOL_FEAS) -> bool:
        return self.residual(p, x) <= tol_feas

    def scale_at(self, p: Sequence[float], x: Sequence[float]) -> float:
        """Constraint magnitude scale ``1 + max_i |h_i(p,x)|``."""
        vals = self.values(p, x)
        return 1.0 + (float(np.max(np.abs(vals))) if len(vals) else 0.0)

    def default_eta(self, p: Sequence[float], x: Sequence[float]) -> float:
        """Default activity band ``1e-6 * (1 + constraint scale)``."""
        return 1e-6 * self.scale_at(p, x)

    def active_set(self, p: Sequence[float], x: Sequence[float], eta: float | None = None) -> ActiveSet:
        """Inequalities with ``|h_i(p,x)| <= eta`` (1-based indices)."""
        if eta is None:
            eta = self.default_eta(p, x)
        self._check_dims(p, x)
        idx = tuple(
            i + 1 for i, e in enumerate(self.ineq) if abs(e.eval(p, x)) <= eta
        )
        return ActiveSet(indices=idx, eta=eta)

    def jacobian(
        self,
        p: Sequence[float],
        x: Sequence[float],
        rows: Sequence[int] | None = None,
    ) -> np.ndarray:
        """Stacked x-gradients of the selected constraints.

        ``rows`` are 1-based constraint indices in the requested order;
        defaults to all constraints.  Returns an array of shape
        ``(len(rows), dx)``.
        """
        self._check_dims(p, x)
        if rows is None:
            rows = range(1, self.n + 1)
        out = np.empty((len(tuple(rows)), self.dx))
        for k, i in enumerate(rows):
            out[k] = self.constraint(i).grad_x(p, x)
        return out

    def residual_grid(self, p: Sequence[float], grids: Sequence[np.ndarray]) -> np.ndarray:
        """Vectorized feasibility residual over broadcastable x arrays.

        Singular constraint evaluations poison the residual with NaN so
        those points never count as feasible.
        """
        parts = []
        for e in self.ineq:
            parts.append(np.maximum(e.eval_array(p, grids), 0.0))
        for e in self.eq:
            parts.append(np.abs(e.eval_array(p, grids)))
        if not parts:
            return np.zeros(np.broadcast(*grids).shape if grids else ())
        out = parts[0]
        for q in parts[1:]:
            out = np.maximum(out, q)
        return out

    # -- compiled bundles for solver hot loops --------------------------

    def compiled_values_gradx(self):
        """List of ``f(p, x) -> (value, grad_tuple)`` for all constraints,
        inequalities first."""
        key = "vgx"
        fns = self._bundles.get(key)
        if fns is None:
            fns = [e.value_gradx_fn for e in self.ineq + self.eq]
            self._bundles[key] = fns
        return fns

    def compiled_values(self):
        key = "v"
        fns = self._bundles.get(key)
        if fns is None:
            fns = [e.value_fn for e in self.ineq + self.eq]
            self._bundles[key] = fns
        return fns
