"""Numerical kernel tests.

Rank expectations for 2x2 matrices are checked against a closed-form
singular value oracle (eigenvalues of A^T A); grid oracle expectations
are frozen from hand geometry on the disk and corner fixtures.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from regmod.fixtures_registry import load_fixture
from regmod.numerics import (
    GridBracket,
    GridEmptyError,
    MinNormSolution,
    ball_points,
    grid_distance,
    grid_min,
    max_li_subset,
    nnls_minnorm,
    numerical_rank,
    unit_ball_points,
    unit_sphere_points,
)

BALL = load_fixture("SYS-BALL").system
EX1 = load_fixture("SYS-EX1").system
LIN = load_fixture("SYS-LIN").system
DEGEN = load_fixture("SYS-DEGEN").system


def sv_2x2(a):
    """Closed-form singular values of a 2x2 matrix.

    The large one comes from the trace formula; the small one from the
    product identity sigma1 * sigma2 = |det A|, which stays accurate when
    the trace formula would cancel catastrophically.
    """
    a = np.asarray(a, dtype=float)
    g = a.T @ a
    tr = g[0, 0] + g[1, 1]
    det_a = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    disc = math.sqrt(max(tr * tr - 4.0 * det_a * det_a, 0.0))
    s1 = math.sqrt((tr + disc) / 2)
    s2 = abs(det_a) / s1 if s1 > 0 else 0.0
    return s1, s2


class TestNumericalRank:
    def test_near_singular_frozen(self):
        # sigma_2 of [[1,0],[1,1e-12]] is ~7.1e-13 by the closed form,
        # far below the threshold 1e-7 * sigma_1
        a = np.array([[1.0, 0.0], [1.0, 1e-12]])
        s1, s2 = sv_2x2(a)
        assert s2 == pytest.approx(7.0710678e-13, rel=1e-6)
        assert s2 < 1e-7 * s1
        r = numerical_rank(a, rank_tol=1e-7)
        assert r.rank == 1
        assert r.singular_values[0] == pytest.approx(s1, rel=1e-12)
        assert r.singular_values[1] == pytest.approx(s2, rel=1e-6)

    def test_full_rank_frozen(self):
        r = numerical_rank(np.array([[1.0, 0.0], [1.0, 0.5]]))
        assert r.rank == 2

    def test_zero_and_empty(self):
        assert numerical_rank(np.zeros((3, 2))).rank == 0
        assert numerical_rank(np.zeros((0, 2))).rank == 0
        assert numerical_rank(np.zeros((0, 0))).rank == 0

    def test_threshold_relative_to_scale(self):
        # a tiny but well-conditioned matrix keeps full rank
        a = 1e-5 * np.eye(2)
        assert numerical_rank(a).rank == 2

    @given(
        hnp.arrays(np.float64, (3, 2), elements=st.floats(-10, 10)),
        st.floats(0.5, 2.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_scaling_invariance(self, a, c):
        assert numerical_rank(a).rank == numerical_rank(c * a).rank

    @given(hnp.arrays(np.float64, (4, 3), elements=st.floats(-5, 5)), st.permutations(range(4)))
    @settings(max_examples=100, deadline=None)
    def test_permutation_invariance(self, a, perm):
        assert numerical_rank(a).rank == numerical_rank(a[list(perm)]).rank

    @given(hnp.arrays(np.float64, (4, 3), elements=st.floats(-5, 5)), st.integers(1, 3))
    @settings(max_examples=100, deadline=None)
    def test_submatrix_rank_bounded(self, a, k):
        assert numerical_rank(a[:k]).rank <= numerical_rank(a).rank


class TestMaxLiSubset:
    def test_parallel_rows(self):
        assert max_li_subset([np.array([0.0, 1.0]), np.array([0.0, -1.0])]) == (0,)

    def test_independent_rows(self):
        assert max_li_subset([np.array([1.0, 0.0]), np.array([0.0, 1.0])]) == (0, 1)

    def test_zero_row_skipped(self):
        assert max_li_subset([np.array([0.0, 0.0]), np.array([1.0, 0.0])]) == (1,)

    def test_earliest_wins(self):
        rows = [np.array([1.0, 1.0]), np.array([2.0, 2.0]), np.array([1.0, 0.0])]
        assert max_li_subset(rows) == (0, 2)

    @given(hnp.arrays(np.float64, (5, 3), elements=st.floats(-3, 3)))
    @settings(max_examples=100, deadline=None)
    def test_size_equals_rank(self, a):
        sel = max_li_subset(list(a))
        assert len(sel) == numerical_rank(a).rank


class TestNnlsMinNorm:
    def test_single_column_frozen(self):
        r = nnls_minnorm(np.array([[2.0], [0.0]]), np.array([1.0, 0.0]))
        assert r.coeffs[0] == pytest.approx(0.5, abs=1e-9)
        assert r.residual == pytest.approx(0.0, abs=1e-9)

    def test_corner_representation_frozen(self):
        # columns are the active gradients at the pinned corner of the
        # tilted-cut box at p=0.1; b = v - x for v=(0.1,-1), x=(1,-1).
        # Exact min-norm nonnegative solution is (0, 9, 9), by hand.
        a = np.array([[1.0, 0.0, -0.1], [0.0, -1.0, 1.0]])
        b = np.array([-0.9, 0.0])
        r = nnls_minnorm(a, b)
        np.testing.assert_allclose(r.coeffs, [0.0, 9.0, 9.0], atol=1e-6)
        assert r.residual == pytest.approx(0.0, abs=1e-8)

    def test_sign_constraint_binds(self):
        a = np.array([[1.0]])
        b = np.array([-2.0])
        constrained = nnls_minnorm(a, b)
        assert constrained.coeffs[0] == pytest.approx(0.0, abs=1e-9)
        assert constrained.residual == pytest.approx(2.0, abs=1e-9)
        free = nnls_minnorm(a, b, sign_free=(0,))
        assert free.coeffs[0] == pytest.approx(-2.0, abs=1e-9)
        assert free.residual == pytest.approx(0.0, abs=1e-9)

    def test_empty_columns(self):
        r = nnls_minnorm(np.zeros((2, 0)), np.array([3.0, 4.0]))
        assert r.coeffs.shape == (0,)
        assert r.residual == pytest.approx(5.0)

    def test_min_norm_among_minimizers(self):
        # any residual-zero solution has lam3 >= 9; check ours is smallest
        a = np.array([[1.0, 0.0, -0.1], [0.0, -1.0, 1.0]])
        b = np.array([-0.9, 0.0])
        ours = nnls_minnorm(a, b)
        for t in (0.5, 1.0, 2.0):
            other = np.array([0.1 * t, 9.0 + t, 9.0 + t])
            assert np.linalg.norm(a @ other - b) < 1e-12
            assert np.linalg.norm(ours.coeffs) < np.linalg.norm(other) - 1e-6

    @given(
        hnp.arrays(np.float64, (3, 2), elements=st.floats(-2, 2)),
        hnp.arrays(np.float64, (3,), elements=st.floats(-2, 2)),
        hnp.arrays(np.float64, (2,), elements=st.floats(0, 3)),
    )
    @settings(max_examples=100, deadline=None)
    def test_residual_not_beaten_by_candidates(self, a, b, candidate):
        ours = nnls_minnorm(a, b)
        assert ours.residual <= np.linalg.norm(a @ candidate - b) + 1e-7


class TestGridDistance:
    def test_disk_from_outside(self):
        br = grid_distance(BALL, [], [2.0, 0.0], box=[(-1.5, 1.5), (-1.5, 1.5)], n_per_axis=201)
        spacing = 3.0 / 200
        assert br.diagonal == pytest.approx(spacing * math.sqrt(2))
        assert 1.0 <= br.upper <= 1.0 + br.diagonal
        assert br.lower == pytest.approx(br.upper - br.diagonal)
        assert 13000 < br.n_feasible < 15000  # ~ pi/9 of 201^2 points

    def test_pinned_corner_exact_on_grid(self):
        # the singleton (1,-1) is a grid node of [-2,2]^2 at 201 per axis,
        # so the oracle distance is exactly 0.9
        br = grid_distance(EX1, [0.1], [0.1, -1.0], box=[(-2.0, 2.0), (-2.0, 2.0)], n_per_axis=201)
        assert br.upper == pytest.approx(0.9, abs=1e-12)
        assert br.nearest == pytest.approx((1.0, -1.0))

    def test_feasible_point_distance_zero(self):
        br = grid_distance(BALL, [], [0.0, 0.0], box=[(-1.5, 1.5), (-1.5, 1.5)], n_per_axis=201)
        assert br.upper == pytest.approx(0.0, abs=1e-12)
        assert br.lower == 0.0

    def test_empty_box_raises(self):
        with pytest.raises(GridEmptyError):
            grid_distance(LIN, [5.0], [0.5], box=[(0.0, 1.0)], n_per_axis=101)

    def test_thin_set_on_aligned_grid(self):
        # line x2 = p with p on a grid coordinate: box [-2,2], spacing 0.02
        p = -2.0 + 137 * 0.02
        br = grid_distance(DEGEN, [p], [0.3, p + 0.7], box=[(-2.0, 2.0), (-2.0, 2.0)], n_per_axis=201)
        assert br.upper == pytest.approx(0.7, abs=0.011)

    def test_dimension_guard(self):
        with pytest.raises(ValueError):
            grid_distance(BALL, [], [0.0, 0.0], box=[(-1, 1), (-1, 1)], n_per_axis=1000)


class TestGridMin:
    def test_box_linear_objective(self):
        loaded = load_fixture("BLPP-BOX")
        val, arg = grid_min(
            loaded.system, [0.5], loaded.bilevel.lower, box=[(-1.2, 1.2), (-1.2, 1.2)], n_per_axis=241
        )
        assert val == pytest.approx(-1.5, abs=1e-9)
        assert arg == pytest.approx((-1.0, -1.0))


class TestSampling:
    def test_deterministic(self):
        a = unit_ball_points(3, 64, seed=42)
        b = unit_ball_points(3, 64, seed=42)
        np.testing.assert_array_equal(a, b)
        c = unit_ball_points(3, 64, seed=43)
        assert not np.array_equal(a, c)

    def test_inside_ball(self):
        pts = unit_ball_points(4, 200, seed=1)
        assert pts.shape == (200, 4)
        assert (np.linalg.norm(pts, axis=1) <= 1.0 + 1e-12).all()

    def test_sphere_unit_norm(self):
        pts = unit_sphere_points(2, 50, seed=5)
        np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-12)

    def test_dim_zero(self):
        pts = unit_ball_points(0, 10, seed=0)
        assert pts.shape == (10, 0)

    def test_center_and_radius(self):
        pts = ball_points([5.0, -3.0], 0.25, 40, seed=9)
        assert (np.linalg.norm(pts - np.array([5.0, -3.0]), axis=1) <= 0.25 + 1e-12).all()
