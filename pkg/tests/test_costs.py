import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covform import costs, se2
from covform.team import CostWeights, FormationSpec, RangeGraph, SortedIds, TeamConfig, default_full_graph


def state_with_positions(positions, angles=None):
    positions = np.asarray(positions, dtype=np.float64)
    if angles is None:
        angles = np.zeros(len(positions))
    poses = [se2.Pose2.from_angle(a, p) for a, p in zip(angles, positions)]
    return se2.FormationState.from_poses(poses)


def line_spec(n, **kw):
    return FormationSpec.line(n, **kw)


class TestCollision:
    def test_pair_value_at_0p7(self):
        x = state_with_positions([(0.7, 0.0)])
        val = costs.j_col_pair(x, 2, 1, 0.9, 0.5)
        assert abs(val - 16.0 / 9.0) <= 1e-12

    def test_pair_zero_at_activation_radius(self):
        x = state_with_positions([(0.9, 0.0)])
        assert costs.j_col_pair(x, 2, 1, 0.9, 0.5) == 0.0

    def test_pair_zero_beyond_activation(self):
        x = state_with_positions([(2.0, 0.0)])
        assert costs.j_col_pair(x, 2, 1, 0.9, 0.5) == 0.0

    def test_pair_sentinel_inside_collision_radius(self):
        x = state_with_positions([(0.4, 0.0)])
        assert costs.j_col_pair(x, 2, 1, 0.9, 0.5) == costs.SATURATION

    def test_pair_symmetric_in_m_n(self):
        x = state_with_positions([(0.7, 0.2), (1.0, -0.4)])
        assert costs.j_col_pair(x, 2, 3, 0.9, 0.5) == costs.j_col_pair(x, 3, 2, 0.9, 0.5)

    def test_total_counts_ordered_pairs_twice(self):
        x = state_with_positions([(0.7, 0.0)])
        spec = line_spec(2)
        assert costs.j_col(x, spec) == pytest.approx(2 * 16.0 / 9.0, abs=1e-12)

    def test_total_zero_when_all_far(self):
        x = state_with_positions([(3.0, 0.0), (6.0, 0.0)])
        assert costs.j_col(x, line_spec(3)) == 0.0

    def test_bad_radii_rejected(self):
        x = state_with_positions([(0.7, 0.0)])
        with pytest.raises(ValueError):
            costs.j_col_pair(x, 2, 1, 0.5, 0.9)


class TestEst:
    def test_empty_graph_saturates(self):
        team = TeamConfig.uniform(3)
        x = state_with_positions([(1.0, 0.0), (2.0, 0.0)])
        assert costs.j_est(x, team, RangeGraph((), ())) == costs.SATURATION

    def test_sigma_scaling_law(self):
        # scaling all sigmas by c adds 6(N-1) ln c
        team = TeamConfig.uniform(3)
        x = state_with_positions([(1.0, 0.3), (2.0, -0.4)], angles=[0.3, -0.8])
        c = 3.0
        base = costs.j_est(x, team, default_full_graph(team, sigma=0.1))
        scaled = costs.j_est(x, team, default_full_graph(team, sigma=0.1 * c))
        assert scaled - base == pytest.approx(6 * 2 * np.log(c), rel=1e-9)

    def test_finite_for_generic_geometry(self):
        team = TeamConfig.uniform(4)
        x = state_with_positions([(1.0, 0.2), (2.1, -0.3), (0.4, 1.4)], angles=[1.0, -2.0, 0.5])
        assert costs.j_est(x, team, default_full_graph(team)) < costs.SATURATION


class TestDesiredOffset:
    def test_adjacent_pair_single_term(self):
        spec = line_spec(5)
        s = SortedIds.identity(TeamConfig.uniform(5))
        np.testing.assert_allclose(costs.desired_offset(spec, s, 2, 3), [1.0, 0.0])

    def test_two_term_sum(self):
        spec = line_spec(5)
        s = SortedIds.identity(TeamConfig.uniform(5))
        np.testing.assert_allclose(costs.desired_offset(spec, s, 1, 3), [2.0, 0.0])

    def test_v_shape_traces_a_v(self):
        # desired offsets from slot 1 rise for 5 slots, then descend
        spec = FormationSpec.vee(9)
        s = SortedIds.identity(TeamConfig.uniform(9))
        pts = np.array([costs.desired_offset(spec, s, 1, m) for m in range(2, 10)])
        ys = np.concatenate([[0.0], pts[:, 1]])
        assert np.all(np.diff(ys[:5]) > 0)       # ascending arm
        assert np.all(np.diff(ys[4:]) < 0)       # descending arm
        assert np.all(np.diff(np.concatenate([[0.0], pts[:, 0]])) > 0)  # x always advances
        # summation oracle for the apex: 4 steps of (r_k+1 + r_k) / sqrt(2)
        np.testing.assert_allclose(pts[3], [4 / np.sqrt(2), 4 / np.sqrt(2)])

    def test_index_order_validated(self):
        spec = line_spec(3)
        s = SortedIds.identity(TeamConfig.uniform(3))
        with pytest.raises(ValueError, match="n < m"):
            costs.desired_offset(spec, s, 2, 2)


class TestAdj:
    def make_sorted(self, n):
        return SortedIds.identity(TeamConfig.uniform(n))

    def test_zero_at_desired_formation(self):
        spec = line_spec(4)
        s = self.make_sorted(4)
        x = state_with_positions([(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)])
        assert costs.j_adj(x, spec, s) == pytest.approx(0.0, abs=1e-24)

    def test_two_robots_unit_residual(self):
        spec = line_spec(2)
        s = self.make_sorted(2)
        x = state_with_positions([(2.0, 0.0)])
        assert costs.j_adj(x, spec, s) == pytest.approx(1.0, abs=1e-12)

    def test_respects_sorted_order(self):
        spec = line_spec(3)
        team = TeamConfig.uniform(3)
        # robots 2 and 3 physically swapped; sorted order (1, 3, 2) zeroes the cost
        x = state_with_positions([(2.0, 0.0), (1.0, 0.0)])
        swapped = SortedIds((1, 3, 2), (0.5, 0.5, 0.5))
        assert costs.j_adj(x, spec, swapped) == pytest.approx(0.0, abs=1e-24)
        assert costs.j_adj(x, spec, SortedIds.identity(team)) > 1.0


class TestOverlap:
    def test_two_robot_zero_cost_separation(self):
        # lambda = 0.25, radii 0.5: zero exactly at 0.75 m
        spec = line_spec(2, overlap_fraction=0.25)
        s = SortedIds.identity(TeamConfig.uniform(2))
        x = state_with_positions([(0.75, 0.0)])
        assert costs.j_overlap(x, spec, s) == pytest.approx(0.0, abs=1e-24)

    def test_scan_localizes_minimizer(self):
        # 1D scan oracle: the minimizer over separation sits at 0.75 +- 1e-3
        spec = line_spec(2, overlap_fraction=0.25)
        s = SortedIds.identity(TeamConfig.uniform(2))
        seps = np.arange(0.2, 2.0, 1e-4)
        vals = [costs.j_overlap(state_with_positions([(d, 0.0)]), spec, s) for d in seps]
        assert abs(seps[int(np.argmin(vals))] - 0.75) < 1e-3

    def test_lambda_zero_means_tangent_circles(self):
        spec = line_spec(2, overlap_fraction=0.0)
        s = SortedIds.identity(TeamConfig.uniform(2))
        x = state_with_positions([(1.0, 0.0)])
        assert costs.j_overlap(x, spec, s) == pytest.approx(0.0, abs=1e-24)

    def test_direction_free(self):
        # cost depends on distance only, any direction of the pair works
        spec = line_spec(2, overlap_fraction=0.25)
        s = SortedIds.identity(TeamConfig.uniform(2))
        for ang in np.linspace(0, 2 * np.pi, 7):
            x = state_with_positions([(0.75 * np.cos(ang), 0.75 * np.sin(ang))])
            assert costs.j_overlap(x, spec, s) == pytest.approx(0.0, abs=1e-20)

    def test_exempt_slot_contributes_nothing(self):
        s = SortedIds.identity(TeamConfig.uniform(3))
        free = line_spec(3, overlap_fraction=0.25)
        exempt = line_spec(3, overlap_fraction=0.25, overlap_exempt_slots=frozenset({3}))
        x = state_with_positions([(0.75, 0.0), (9.0, 9.0)])  # slot 3 far off target
        assert costs.j_overlap(x, free, s) > 1.0
        assert costs.j_overlap(x, exempt, s) == pytest.approx(0.0, abs=1e-20)

    def test_all_slots_exempt_is_zero(self):
        s = SortedIds.identity(TeamConfig.uniform(2))
        spec = line_spec(2, overlap_exempt_slots=frozenset({1, 2}))
        x = state_with_positions([(5.0, 5.0)])
        assert costs.j_overlap(x, spec, s) == 0.0

    def test_coincident_pair_raises_with_names(self):
        spec = line_spec(2)
        s = SortedIds.identity(TeamConfig.uniform(2))
        x = state_with_positions([(0.0, 0.0)])
        with pytest.raises(ValueError, match="coincident"):
            costs.j_overlap(x, spec, s)


class TestCombinations:
    def setup_method(self):
        self.team = TeamConfig.uniform(3)
        self.graph = default_full_graph(self.team)
        self.sorted = SortedIds.identity(self.team)
        self.x = state_with_positions([(1.1, 0.2), (2.3, -0.1)], angles=[0.4, -0.2])

    def test_opt_total_is_est_plus_col(self):
        spec = line_spec(3)
        b = costs.j_opt(self.x, self.team, self.graph, spec)
        assert b.total == b.est + b.col
        assert b.adj == 0.0 and b.overlap == 0.0

    def test_opt_far_apart_reduces_to_est(self):
        spec = line_spec(3)
        x = state_with_positions([(3.0, 0.0), (6.0, 0.0)], angles=[0.3, 0.9])
        b = costs.j_opt(x, self.team, self.graph, spec)
        assert b.col == 0.0
        assert b.total == b.est

    def test_cov_weighted_sum(self):
        spec = line_spec(3, weights=CostWeights(adj=2.0, overlap=0.5, est=1.5, col=3.0))
        b = costs.j_cov(self.x, self.team, self.graph, spec, self.sorted)
        expected = 2.0 * b.adj + 0.5 * b.overlap + 1.5 * b.est + 3.0 * b.col
        assert b.total == pytest.approx(expected, abs=1e-12)

    def test_cov_zero_weights_zero_total(self):
        spec = line_spec(3, weights=CostWeights(0.0, 0.0, 0.0, 0.0))
        b = costs.j_cov(self.x, self.team, self.graph, spec, self.sorted)
        assert b.total == 0.0

    def test_cov_unit_weights_plain_sum(self):
        spec = line_spec(3)
        b = costs.j_cov(self.x, self.team, self.graph, spec, self.sorted)
        assert b.total == pytest.approx(b.adj + b.overlap + b.est + b.col, abs=1e-12)

    def test_cost_function_factory(self):
        spec = line_spec(3)
        for kind in ("adj", "opt", "cov"):
            f = costs.cost_function(kind, self.team, self.graph, spec, self.sorted)
            assert np.isfinite(f(self.x))
        with pytest.raises(ValueError, match="unknown cost kind"):
            costs.cost_function("bogus", self.team, self.graph, spec, self.sorted)


@given(st.lists(st.tuples(st.floats(-4, 4), st.floats(-4, 4)), min_size=2, max_size=5))
@settings(max_examples=80, deadline=None)
def test_shape_costs_are_nonnegative(points):
    n = len(points) + 1
    spec = FormationSpec.line(n)
    s = SortedIds.identity(TeamConfig.uniform(n))
    x = state_with_positions(points)
    assert costs.j_adj(x, spec, s) >= 0.0
    assert costs.j_col(x, spec) >= 0.0
    pos = x.positions()
    d = np.linalg.norm(pos[:, None] - pos[None, :], axis=-1)
    if np.all(d[np.triu_indices(n, 1)] > 1e-6):
        assert costs.j_overlap(x, spec, s) >= 0.0
