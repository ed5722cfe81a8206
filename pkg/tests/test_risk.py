import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from riskplan.errors import UnknownTerrainError
from riskplan.grid_map import MultiLayerGridMap, Path, Pose
from riskplan.risk import (
    RiskBreakdown,
    build_collision_cost_layer,
    build_total_risk_layer,
    collision_risk,
    ground_pressure,
    path_risk,
    pose_risk,
    slip_risk,
    slip_risk_from_slope,
    slip_value,
    traversability_cost,
)
from riskplan.robot import RobotModel
from riskplan.terrain import TerrainParams, compute_derived_layers

from conftest import make_known_map, pose_at

# Frozen chain for the worked slip example (m=50, t=0.1, l=0.2, N=4,
# mu=0.6, theta=15deg, theta_max=30deg), recomputed from the formulas
# Pr = m g cos(theta) / (t l N) and s = Pr tan(theta) / mu.
EXPECTED_PR = 5922.332722434849
EXPECTED_S = 2644.8071171413835
EXPECTED_PR_MAX = 5309.818256953339
EXPECTED_S_MAX = 5109.374999999999
EXPECTED_R_S = 0.5176380902050415


def flat_map_with_walls(robot, wall_cols=(), rows=5, cols=8, res=0.5):
    """Flat known map; selected columns forced untraversable."""
    grid = make_known_map(np.zeros((rows, cols)), resolution=res)
    compute_derived_layers(grid, robot, TerrainParams())
    trav = grid.layers["traversability"]
    for c in wall_cols:
        trav[:, c] = 0.0
    build_collision_cost_layer(grid, robot)
    return grid


class TestCollisionLayer:
    def test_no_untraversable_cells_means_zero_risk(self, robot):
        grid = flat_map_with_walls(robot)
        assert np.all(grid.layers["collision_cost"] == 0.0)

    def test_distance_equal_footprint_gives_one(self):
        robot = RobotModel(footprint_dim=1.0)
        grid = flat_map_with_walls(robot, wall_cols=(0,))
        # col 2 center is exactly 1.0 m from the wall column centers
        assert grid.layers["collision_cost"][2, 2] == 1.0

    def test_exponential_decay_value(self):
        # footprint 0.8, d_min 1.8 -> exp(-1)
        robot = RobotModel(footprint_dim=0.8)
        grid = make_known_map(np.zeros((4, 6)), resolution=0.6)
        compute_derived_layers(grid, robot, TerrainParams())
        grid.layers["traversability"][:, 0] = 0.0
        build_collision_cost_layer(grid, robot)
        assert grid.layers["collision_cost"][1, 3] == pytest.approx(
            math.exp(-1.0), abs=1e-12
        )

    def test_untraversable_cells_hold_one(self, robot):
        grid = flat_map_with_walls(robot, wall_cols=(3,))
        assert np.all(grid.layers["collision_cost"][:, 3] == 1.0)

    def test_clamped_inside_inflation_radius(self):
        robot = RobotModel(footprint_dim=0.8)
        grid = flat_map_with_walls(robot, wall_cols=(0,), res=0.5)
        # col 1 center is 0.5 m < footprint -> clamped to 1
        assert np.all(grid.layers["collision_cost"][:, 1] == 1.0)

    def test_matches_brute_force_distance_oracle(self, robot):
        rng = np.random.default_rng(23)
        grid = make_known_map(np.zeros((9, 9)))
        compute_derived_layers(grid, robot, TerrainParams())
        trav = grid.layers["traversability"]
        blocked = rng.random((9, 9)) < 0.2
        blocked[4, 4] = True  # ensure at least one source
        trav[blocked] = 0.0
        build_collision_cost_layer(grid, robot)
        sources = np.argwhere(trav == 0.0)
        for r in range(9):
            for c in range(9):
                if trav[r, c] == 0.0:
                    continue
                d_min = min(
                    math.hypot((r - sr) * 0.5, (c - sc) * 0.5)
                    for sr, sc in sources
                )
                expected = min(1.0, math.exp(robot.footprint_dim - d_min))
                assert grid.layers["collision_cost"][r, c] == pytest.approx(
                    expected, abs=1e-9
                )

    @given(d_shift=st.integers(min_value=0, max_value=20))
    def test_monotone_in_distance(self, d_shift):
        robot = RobotModel(footprint_dim=0.8)
        d1 = robot.footprint_dim + 0.1 * d_shift
        d2 = d1 + 0.05
        r1 = min(1.0, math.exp(robot.footprint_dim - d1))
        r2 = min(1.0, math.exp(robot.footprint_dim - d2))
        assert r2 <= r1


class TestCollisionRisk:
    def test_pose_lookup_two_meters_past_footprint(self):
        robot = RobotModel(footprint_dim=1.0)
        grid = flat_map_with_walls(robot, wall_cols=(0,), cols=10)
        # col 6 center: d_min = 3.0 = footprint + 2 -> exp(-2)
        assert collision_risk(grid, pose_at(grid, 2, 6)) == pytest.approx(
            math.exp(-2.0), abs=1e-12
        )

    def test_adjacent_to_wall_clamped(self, robot):
        grid = flat_map_with_walls(robot, wall_cols=(0,))
        assert collision_risk(grid, pose_at(grid, 2, 1)) == 1.0

    def test_open_plain_near_zero(self, robot):
        grid = flat_map_with_walls(robot)
        assert collision_risk(grid, pose_at(grid, 2, 4)) == 0.0


class TestTraversabilityCost:
    def make_map(self, robot, slope, roughness):
        grid = make_known_map(np.zeros((5, 5)))
        compute_derived_layers(grid, robot, TerrainParams())
        grid.layers["slope"][:] = slope
        grid.layers["roughness"][:] = roughness
        return grid

    def test_flat_smooth_is_zero(self, robot):
        grid = self.make_map(robot, 0.0, 0.0)
        assert traversability_cost(grid, pose_at(grid, 2, 2), robot) == 0.0

    def test_both_limits_give_two(self, robot):
        grid = self.make_map(robot, robot.max_slope, 0.1)
        assert traversability_cost(grid, pose_at(grid, 2, 2), robot) == pytest.approx(2.0)

    def test_half_slope_half_roughness(self, robot):
        grid = self.make_map(robot, math.radians(15.0), 0.05)
        assert traversability_cost(grid, pose_at(grid, 2, 2), robot) == pytest.approx(1.0)

    def test_unknown_cell_raises(self, robot):
        grid = self.make_map(robot, 0.0, 0.0)
        grid.known_mask[2, 2] = False
        with pytest.raises(UnknownTerrainError):
            traversability_cost(grid, pose_at(grid, 2, 2), robot)


class TestSlipRisk:
    def test_zero_slope_is_zero(self, robot):
        assert slip_risk_from_slope(robot, 0.0) == 0.0

    def test_max_slope_is_one(self, robot):
        assert slip_risk_from_slope(robot, robot.max_slope) == 1.0

    def test_worked_example_chain(self, robot):
        theta = math.radians(15.0)
        assert ground_pressure(robot, theta) == pytest.approx(EXPECTED_PR, rel=1e-12)
        assert slip_value(robot, theta) == pytest.approx(EXPECTED_S, rel=1e-12)
        assert ground_pressure(robot, robot.max_slope) == pytest.approx(
            EXPECTED_PR_MAX, rel=1e-12
        )
        assert slip_value(robot, robot.max_slope) == pytest.approx(
            EXPECTED_S_MAX, rel=1e-12
        )
        assert slip_risk_from_slope(robot, theta) == pytest.approx(
            EXPECTED_R_S, abs=1e-12
        )

    def test_strictly_increasing_in_slope(self, robot):
        thetas = np.linspace(0.01, robot.max_slope - 0.01, 50)
        values = [slip_risk_from_slope(robot, t) for t in thetas]
        assert all(b > a for a, b in zip(values, values[1:]))

    @given(mu=st.floats(min_value=0.1, max_value=2.0, allow_nan=False))
    def test_slip_value_decreasing_in_friction(self, mu):
        lo = RobotModel(friction=mu)
        hi = RobotModel(friction=mu + 0.1)
        theta = math.radians(12.0)
        assert slip_value(hi, theta) < slip_value(lo, theta)

    @given(
        mu1=st.floats(min_value=0.1, max_value=2.0, allow_nan=False),
        mu2=st.floats(min_value=0.1, max_value=2.0, allow_nan=False),
        theta_frac=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
    )
    def test_normalized_risk_independent_of_friction(self, mu1, mu2, theta_frac):
        # R_s = (cos t tan t)/(cos tm tan tm): friction cancels against s_max.
        theta = theta_frac * math.radians(30.0)
        a = slip_risk_from_slope(RobotModel(friction=mu1), theta)
        b = slip_risk_from_slope(RobotModel(friction=mu2), theta)
        assert a == pytest.approx(b, abs=1e-12)

    def test_beyond_max_slope_clamped(self, robot):
        assert slip_risk_from_slope(robot, robot.max_slope + 0.2) == 1.0

    def test_unknown_cell_raises(self, robot):
        grid = make_known_map(np.zeros((3, 3)))
        compute_derived_layers(grid, robot, TerrainParams())
        grid.known_mask[1, 1] = False
        with pytest.raises(UnknownTerrainError):
            slip_risk(grid, pose_at(grid, 1, 1), robot)


class TestPoseAndPathRisk:
    def test_flat_open_plain_is_zero(self, robot):
        grid = flat_map_with_walls(robot)
        breakdown = pose_risk(grid, pose_at(grid, 2, 4), robot)
        assert breakdown.total == 0.0

    def test_worked_component_sum(self, robot):
        grid = make_known_map(np.zeros((5, 5)))
        compute_derived_layers(grid, robot, TerrainParams())
        grid.layers["slope"][:] = math.radians(15.0)
        grid.layers["roughness"][:] = 0.05
        grid.add_layer("collision_cost", np.full((5, 5), math.exp(-1.0)))
        breakdown = pose_risk(grid, pose_at(grid, 2, 2), robot)
        assert breakdown.total == pytest.approx(1.8855175313764838, abs=1e-9)

    def test_breakdown_total_is_component_sum(self):
        b = RiskBreakdown(collision=0.3, traversability=1.1, slip=0.25)
        assert b.total == pytest.approx(1.65)

    def _map_with_cell_risks(self, robot, values):
        # 3 rows so slope is defined; the path runs along the middle row.
        grid = make_known_map(np.zeros((3, max(len(values), 2))))
        compute_derived_layers(grid, robot, TerrainParams())
        collision = np.zeros((3, max(len(values), 2)))
        collision[1, : len(values)] = values
        grid.add_layer("collision_cost", collision)
        return grid

    def test_single_waypoint_path(self, robot):
        grid = self._map_with_cell_risks(robot, [0.7])
        path = Path([pose_at(grid, 1, 0)])
        assert path_risk(grid, path, robot) == pytest.approx(0.7)

    def test_three_waypoint_mean(self, robot):
        grid = self._map_with_cell_risks(robot, [0.2, 0.4, 0.6])
        path = Path([pose_at(grid, 1, c) for c in range(3)])
        assert path_risk(grid, path, robot) == pytest.approx(0.4)

    def test_flat_ground_path_zero(self, robot):
        grid = flat_map_with_walls(robot)
        path = Path([pose_at(grid, 2, c) for c in range(5)])
        assert path_risk(grid, path, robot) == 0.0

    @given(perm=st.permutations([0.1, 0.5, 0.9, 0.3]))
    def test_permutation_invariant_and_bounded(self, robot, perm):
        grid = self._map_with_cell_risks(robot, perm)
        path = Path([pose_at(grid, 1, c) for c in range(4)])
        value = path_risk(grid, path, robot)
        assert value == pytest.approx(np.mean(perm))
        assert min(perm) <= value <= max(perm)

    def test_zero_risk_waypoint_dilutes_mean(self, robot):
        grid = self._map_with_cell_risks(robot, [0.5, 0.5, 0.0])
        risky = Path([pose_at(grid, 1, 0), pose_at(grid, 1, 1)])
        extended = Path(list(risky.waypoints) + [pose_at(grid, 1, 2)])
        assert path_risk(grid, extended, robot) < path_risk(grid, risky, robot)


class TestTotalRiskLayer:
    def test_matches_pose_risk(self, robot):
        rng = np.random.default_rng(17)
        grid = make_known_map(rng.uniform(-0.5, 0.5, size=(7, 7)))
        compute_derived_layers(grid, robot, TerrainParams())
        build_collision_cost_layer(grid, robot)
        total = build_total_risk_layer(grid, robot)
        for r in range(7):
            for c in range(7):
                if np.isnan(total[r, c]):
                    continue
                expected = pose_risk(grid, pose_at(grid, r, c), robot).total
                assert total[r, c] == pytest.approx(expected, abs=1e-12)
