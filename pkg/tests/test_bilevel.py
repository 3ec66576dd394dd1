"""Tests for lower-level values, Lipschitz estimation, and penalties.

Frozen values marked [DERIVED] come from closed forms:

* Scalar problem (f = -x1 over [-1, p1]): phi(p) = -p1 attained at
  x = p1; the set is empty for p1 < -1.
* Box problem (f = p1*x1 + x2 over [-1,1]^2): phi(p) = -|p1| - 1, with
  the whole bottom edge optimal at p1 = 0.
* Upper objective G = x1^2 + (p1 - 0.5)^2 near (0.25, 0.25): the exact
  local Lipschitz constant on a ball of radius 0.2 is the sup of the
  gradient norm, 2*(sqrt(0.125) + 0.2) = 1.10710678...
* Penalty threshold for the scalar problem at anchor (0.25, 0.25): on
  feasible directions (dp, dx) with dx <= dp the penalized objective
  changes by (mu - 0.5)*(dp - dx) to first order, so weights below 0.5
  admit descent and weights at or above 0.5 do not.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from regmod.bilevel import (
    DEFAULT_MU_GRID,
    BilevelProblem,
    InfeasibleAnchorError,
    estimate_lipschitz_constant,
    find_penalty_threshold,
    penalized_objective,
    phi_lipschitz_estimate,
    replay_phi_pair,
    solve_lower,
)
from regmod.cq import InfeasibleBaseError
from regmod.expr import parse
from regmod.fixtures_registry import load_fixture
from regmod.numerics import grid_min
from regmod.problem_io import parse_problem_text

SQRT2 = math.sqrt(2.0)
PENALTY_GRID = (0.125, 0.25, 0.5 * (1 + 1e-3), 1.0, 2.0, 4.0)


@pytest.fixture(scope="module")
def blpp1():
    return load_fixture("BLPP-1").bilevel


@pytest.fixture(scope="module")
def blpp_box():
    return load_fixture("BLPP-BOX").bilevel


@pytest.fixture(scope="module")
def ball():
    return load_fixture("SYS-BALL").system


class TestSolveLower:
    def test_scalar_interval(self, blpp1):
        res = solve_lower(blpp1, (0.4,))
        # [DERIVED] max x1 over [-1, 0.4] gives f = -0.4 at x = 0.4.
        assert res.status == "ok"
        assert res.phi == pytest.approx(-0.4, abs=1e-9)
        assert len(res.x_solutions) == 1
        assert res.x_solutions[0] == pytest.approx((0.4,), abs=1e-9)

    def test_empty_interval_reported(self, blpp1):
        res = solve_lower(blpp1, (-2.0,))
        # [DERIVED] [-1, p1] is empty for p1 < -1.
        assert res.status == "infeasible_system"
        assert math.isinf(res.phi)
        assert res.x_solutions == ()
        assert not res.converged

    def test_system_objective_pair(self, ball):
        res = solve_lower((ball, parse("x1", 0, 2)), ())
        # [TRIVIAL] linear objective over the disk.
        assert res.phi == pytest.approx(-1.0, abs=1e-9)
        assert res.x_solutions[0] == pytest.approx((-1.0, 0.0), abs=1e-6)

    @pytest.mark.parametrize(
        "p,expected", [((0.3,), -1.3), ((0.0,), -1.0), ((-0.7,), -1.7)]
    )
    def test_box_value(self, blpp_box, p, expected):
        res = solve_lower(blpp_box, p)
        # [DERIVED] phi(p) = -|p1| - 1 at a bottom corner of the box.
        assert res.phi == pytest.approx(expected, abs=1e-9)

    def test_box_degenerate_edge_solutions(self, blpp_box):
        res = solve_lower(blpp_box, (0.0,))
        # [DERIVED] at p1 = 0 every (x1, -1) is optimal; the solver keeps
        # each distinct minimizer it finds.
        assert len(res.x_solutions) >= 2
        for x in res.x_solutions:
            assert x[1] == pytest.approx(-1.0, abs=1e-9)

    def test_grid_oracle_agreement(self, blpp_box):
        res = solve_lower(blpp_box, (0.3,))
        val, point = grid_min(
            blpp_box.system,
            (0.3,),
            blpp_box.lower,
            box=[(-2.0, 2.0), (-2.0, 2.0)],
            n_per_axis=201,
        )
        # The lattice contains the optimal corner, so the oracle is exact.
        assert res.phi == pytest.approx(val, abs=1e-9)
        assert res.x_solutions[0] == pytest.approx(point, abs=1e-9)

    def test_dimension_mismatch_rejected(self, ball, blpp1):
        with pytest.raises(ValueError):
            solve_lower((ball, parse("x1", 1, 1)), ())
        with pytest.raises(ValueError):
            solve_lower(blpp1, (0.1, 0.2))

    def test_deterministic(self, blpp_box):
        a = solve_lower(blpp_box, (0.0,))
        b = solve_lower(blpp_box, (0.0,))
        assert a.phi == b.phi
        assert a.x_solutions == b.x_solutions


class TestPhiMonotonicity:
    BASE = "[problem] name=m dp=1 dx=1\n[ineq]\nh1 = x1 - p1\nh2 = -1 - x1\n"

    def _phi(self, text, p):
        sys = parse_problem_text(text).system
        return solve_lower((sys, parse("-x1", 1, 1)), p).phi

    def test_redundant_constraint_keeps_phi(self):
        base = self._phi(self.BASE, (0.4,))
        widened = self._phi(self.BASE + "h3 = x1 - 5\n", (0.4,))
        assert widened == pytest.approx(base, abs=1e-9)

    def test_binding_constraint_raises_phi(self):
        base = self._phi(self.BASE, (0.4,))
        tightened = self._phi(self.BASE + "h3 = x1 - p1 + 0.2\n", (0.4,))
        # [DERIVED] the extra cut moves the maximum from p1 to p1 - 0.2.
        assert tightened == pytest.approx(base + 0.2, abs=1e-9)
        assert tightened >= base - 1e-9


class TestLipschitzConstant:
    def test_linear_expression_exact(self):
        e = parse("3*p1 + 4*x1", 1, 1)
        # [TRIVIAL] constant gradient (3, 4).
        assert estimate_lipschitz_constant(e, (0.0, 0.0), 1.0, n=32, seed=0) == pytest.approx(
            5.0, abs=1e-6
        )

    def test_constant_expression_zero(self):
        assert estimate_lipschitz_constant(parse("7", 1, 1), (0.0, 0.0), 1.0) == 0.0

    def test_quadratic_upper_objective(self, blpp1):
        est = estimate_lipschitz_constant(blpp1.upper, (0.25, 0.25), 0.2, n=256, seed=0)
        # [DERIVED] sup of the gradient norm on the ball.
        analytic = 2.0 * (math.sqrt(0.125) + 0.2)
        assert est <= analytic + 1e-6
        assert est >= 0.95 * analytic

    def test_scaling_doubles_the_estimate(self, blpp1):
        doubled = parse(f"2*({blpp1.upper})", 1, 1)
        a = estimate_lipschitz_constant(blpp1.upper, (0.25, 0.25), 0.2, n=64, seed=0)
        b = estimate_lipschitz_constant(doubled, (0.25, 0.25), 0.2, n=64, seed=0)
        assert b == pytest.approx(2.0 * a, rel=1e-12)

    def test_bad_arguments_rejected(self):
        e = parse("x1", 1, 1)
        with pytest.raises(ValueError):
            estimate_lipschitz_constant(e, (0.0, 0.0), 0.0)
        with pytest.raises(ValueError):
            estimate_lipschitz_constant(e, (0.0,), 1.0)


class TestPhiLipschitz:
    def test_scalar_problem(self, blpp1):
        rep = phi_lipschitz_estimate(blpp1, (0.4,), 0.2, n=8, seed=0)
        # [DERIVED] phi(p) = -p1 so every pair ratio is exactly 1.
        assert rep.kind == "lower_level_value"
        assert rep.status == "ok"
        assert rep.estimate == pytest.approx(1.0, rel=1e-6)
        assert not rep.diverging

    def test_predicted_bound_inputs(self, blpp1):
        rep = phi_lipschitz_estimate(blpp1, (0.4,), 0.2, n=8, seed=0)
        inputs = rep.params["predicted_bound_inputs"]
        # [DERIVED] l0 = 1 (f = -x1), M = 1 (distance equals residual),
        # max l_i = sqrt(2) (joint gradient of x1 - p1).
        assert inputs["l0"] == pytest.approx(1.0, rel=1e-6)
        assert inputs["r_modulus"] == pytest.approx(1.0, rel=1e-3)
        assert inputs["max_constraint_lipschitz"] == pytest.approx(SQRT2, rel=1e-6)
        predicted = rep.params["predicted_bound"]
        assert predicted == pytest.approx(1.0 + 1.001 * SQRT2, rel=1e-3)
        # The prediction bounds the sampled estimate from above here.
        assert rep.estimate <= predicted

    def test_box_problem(self, blpp_box):
        rep = phi_lipschitz_estimate(blpp_box, (0.0,), 0.2, n=8, seed=0)
        # [DERIVED] phi(p) = -|p1| - 1 has slope 1 on either side.
        assert rep.estimate == pytest.approx(1.0, rel=1e-6)

    def test_witness_replays(self, blpp1):
        rep = phi_lipschitz_estimate(blpp1, (0.4,), 0.2, n=8, seed=0)
        assert abs(replay_phi_pair(blpp1, rep.witness) - rep.witness.value) <= 1e-9

    def test_constant_map(self, ball):
        blp = BilevelProblem("disk", ball, parse("x1^2", 0, 2), parse("x1", 0, 2))
        rep = phi_lipschitz_estimate(blp, (), 0.2)
        assert rep.estimate == 0.0
        assert any("constant" in note for note in rep.notes)

    def test_infeasible_base_rejected(self, blpp1):
        with pytest.raises(InfeasibleBaseError):
            phi_lipschitz_estimate(blpp1, (-2.0,), 0.2)

    def test_hypothesis_note_present(self, blpp1):
        rep = phi_lipschitz_estimate(blpp1, (0.4,), 0.2, n=8, seed=0)
        assert any("assumed without verification" in note for note in rep.notes)


class TestPenalizedObjective:
    def test_zero_gap_at_lower_optimum(self, blpp1):
        # [DERIVED] G(0.25, 0.25) = 0.125 and f - phi = 0 there.
        assert penalized_objective(blpp1, 1.0, (0.25,), (0.25,)) == pytest.approx(
            0.125, abs=1e-9
        )

    def test_positive_gap(self, blpp1):
        # [DERIVED] G = 0.0625, f - phi = 0 - (-0.25) = 0.25.
        assert penalized_objective(blpp1, 1.0, (0.25,), (0.0,)) == pytest.approx(
            0.3125, abs=1e-9
        )

    def test_mu_zero_is_plain_upper(self, blpp1):
        assert penalized_objective(blpp1, 0.0, (0.25,), (0.0,)) == pytest.approx(
            0.0625, abs=1e-9
        )

    def test_dominates_upper_objective(self, blpp1):
        # f - phi >= -tol on the feasible set, so the penalized value
        # never drops below G by more than solver noise.
        rng = np.random.RandomState(0)
        for _ in range(20):
            p = float(rng.uniform(-0.5, 0.5))
            x = float(rng.uniform(-1.0, p))
            val = penalized_objective(blpp1, 2.0, (p,), (x,))
            assert val >= blpp1.upper.eval((p,), (x,)) - 1e-8

    def test_preconditions(self, blpp1):
        with pytest.raises(ValueError):
            penalized_objective(blpp1, -1.0, (0.25,), (0.25,))
        with pytest.raises(ValueError):
            penalized_objective(blpp1, 1.0, (0.25,), (0.5,))
        restricted = BilevelProblem(
            "r",
            blpp1.system,
            blpp1.upper,
            blpp1.lower,
            pcons=(parse("p1 - 0.2", 1, 1),),
        )
        with pytest.raises(ValueError):
            penalized_objective(restricted, 1.0, (0.25,), (0.1,))


@pytest.fixture(scope="module")
def report(blpp1):
    return find_penalty_threshold(
        blpp1, (0.25,), (0.25,), mu_grid=PENALTY_GRID, radius=0.05, n=200, seed=0
    )


class TestPenaltyThreshold:
    def test_rows_split_at_half(self, report):
        by_mu = {row.mu: row for row in report.per_mu}
        # [DERIVED] descent direction with dx < dp exists iff mu < 0.5.
        assert not by_mu[0.125].passed
        assert not by_mu[0.25].passed
        assert by_mu[0.125].witness is not None
        assert by_mu[0.25].witness is not None
        for mu in PENALTY_GRID[2:]:
            assert by_mu[mu].passed
            assert by_mu[mu].witness is None

    def test_monotone_in_mu(self, report):
        passes = [row.passed for row in report.per_mu]
        assert passes == sorted(passes)

    def test_empirical_threshold(self, report):
        assert report.mu0_empirical == pytest.approx(0.5 * (1 + 1e-3))

    def test_anchor_values(self, report):
        assert report.anchor_upper == pytest.approx(0.125, abs=1e-9)
        assert abs(report.anchor_gap) <= 1e-8

    def test_witness_is_sampled_violator(self, report, blpp1):
        row = next(r for r in report.per_mu if not r.passed)
        p, x = row.witness
        assert blpp1.in_joint_region(p, x)
        val = penalized_objective(blpp1, row.mu, p, x)
        anchor = report.anchor_upper + row.mu * report.anchor_gap
        assert anchor - val == pytest.approx(row.worst_deficit, abs=1e-9)
        assert row.worst_deficit > 1e-9

    def test_formula_product_structure(self, report, blpp1):
        doubled = BilevelProblem(
            "double",
            blpp1.system,
            parse(f"2*({blpp1.upper})", 1, 1),
            blpp1.lower,
        )
        rep2 = find_penalty_threshold(
            doubled, (0.25,), (0.25,), mu_grid=PENALTY_GRID, radius=0.05, n=200, seed=0
        )
        assert rep2.mu0_formula == pytest.approx(2.0 * report.mu0_formula, rel=0.05)
        assert report.mu0_formula > 0

    def test_formula_and_empirical_are_separate(self, report):
        assert report.mu0_formula != report.mu0_empirical
        assert "c_modulus" in report.formula_inputs

    def test_deterministic(self, report, blpp1):
        again = find_penalty_threshold(
            blpp1, (0.25,), (0.25,), mu_grid=PENALTY_GRID, radius=0.05, n=200, seed=0
        )
        assert again.per_mu == report.per_mu
        assert again.mu0_formula == report.mu0_formula

    def test_anchor_validation(self, blpp1):
        with pytest.raises(InfeasibleAnchorError):
            find_penalty_threshold(blpp1, (0.25,), (0.5,))
        with pytest.raises(InfeasibleAnchorError):
            find_penalty_threshold(blpp1, (0.25,), (0.0,))
        restricted = BilevelProblem(
            "r",
            blpp1.system,
            blpp1.upper,
            blpp1.lower,
            pcons=(parse("p1 - 0.2", 1, 1),),
        )
        with pytest.raises(InfeasibleAnchorError):
            find_penalty_threshold(restricted, (0.25,), (0.25,))

    def test_bad_grid_rejected(self, blpp1):
        with pytest.raises(ValueError):
            find_penalty_threshold(blpp1, (0.25,), (0.25,), mu_grid=())
        with pytest.raises(ValueError):
            find_penalty_threshold(blpp1, (0.25,), (0.25,), mu_grid=(-1.0,))

    def test_default_grid_shape(self):
        assert DEFAULT_MU_GRID[0] == pytest.approx(2.0**-4)
        assert DEFAULT_MU_GRID[-1] == pytest.approx(2.0**8)
        assert len(DEFAULT_MU_GRID) == 13

    def test_thin_region_has_no_usable_samples(self):
        degen = load_fixture("SYS-DEGEN").system
        blp = BilevelProblem("thin", degen, parse("p1^2 + x1^2", 1, 2), parse("x1^2", 1, 2))
        rep = find_penalty_threshold(blp, (0.0,), (0.0, 0.0), radius=0.1, n=16, seed=0)
        assert rep.status == "no_usable_samples"
        assert rep.n_samples == 0
        assert rep.mu0_empirical is None
