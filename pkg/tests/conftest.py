import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from riskplan.grid_map import MultiLayerGridMap, Pose
from riskplan.robot import RobotModel
from riskplan.terrain import TerrainParams, compute_derived_layers

# Property suites must run with at least 200 cases per property.
settings.register_profile(
    "default",
    max_examples=200,
    derandomize=True,
    deadline=None,
    # the robot fixture is read-only, safe to share across generated inputs
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture
def robot() -> RobotModel:
    """The worked-example robot used throughout the risk model tests."""
    return RobotModel(
        mass=50.0,
        wheel_thickness=0.1,
        wheel_contact_length=0.2,
        wheel_count=4,
        max_slope=math.radians(30.0),
        max_speed=1.0,
        footprint_dim=0.8,
        friction=0.6,
    )


def make_known_map(
    heights: np.ndarray,
    resolution: float = 0.5,
    origin: tuple[float, float] = (0.0, 0.0),
) -> MultiLayerGridMap:
    """Fully-known map from a truth heightmap."""
    heights = np.asarray(heights, dtype=float)
    grid = MultiLayerGridMap(*heights.shape, resolution=resolution, origin=origin)
    grid.set_known_elevation(heights)
    return grid


def make_analyzed_map(
    heights: np.ndarray,
    robot: RobotModel,
    params: TerrainParams | None = None,
    resolution: float = 0.5,
) -> MultiLayerGridMap:
    """Fully-known map with all derived layers computed."""
    grid = make_known_map(heights, resolution=resolution)
    compute_derived_layers(grid, robot, params or TerrainParams())
    return grid


def pose_at(grid: MultiLayerGridMap, row: int, col: int) -> Pose:
    """Pose standing at a cell center (z from the elevation layer)."""
    x, y = grid.cell_center((row, col))
    z = grid.layers["elevation"][row, col]
    if math.isnan(z):
        z = 0.0
    return Pose(np.array([x, y, z]))


def make_truth_world(
    heights: np.ndarray,
    robot: RobotModel,
    start: tuple[int, int],
    resolution: float = 0.5,
):
    """Hand-built TruthWorld from a heightmap (layers fully computed)."""
    from riskplan.grid_map import CellIndex
    from riskplan.risk import build_collision_cost_layer
    from riskplan.worldgen import TruthWorld, WorldGenParams

    grid = make_known_map(heights, resolution=resolution)
    compute_derived_layers(grid, robot, TerrainParams())
    build_collision_cost_layer(grid, robot)
    params = WorldGenParams(
        size_m=heights.shape[1] * resolution, resolution=resolution
    )
    return TruthWorld(
        grid=grid,
        start=CellIndex(*start),
        seed=0,
        effective_seed=0,
        friction=robot.friction,
        params=params,
    )
