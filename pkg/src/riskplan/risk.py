"""Per-pose risk assessment: collision, traversability and slip components,
their sum, and the path-averaged total.

Collision risk decays exponentially with the distance to the nearest
untraversable cell and is clamped to [0, 1]; the inflation distance field
comes from an exact Euclidean distance transform over the traversability
layer. Slip risk normalizes a pressure-scaled slope-to-friction ratio by
its value at the robot's maximum climbable slope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import UnknownTerrainError
from .grid_map import (
    LAYER_COLLISION,
    LAYER_ROUGHNESS,
    LAYER_SLOPE,
    LAYER_TRAVERSABILITY,
    MultiLayerGridMap,
    Path,
    Pose,
)
from .robot import RobotModel
from .terrain import ROUGHNESS_CAP


@dataclass
class RiskBreakdown:
    """Risk components at one pose; total is their plain sum."""

    collision: float
    traversability: float
    slip: float

    @property
    def total(self) -> float:
        return self.collision + self.traversability + self.slip


def build_collision_cost_layer(
    grid: MultiLayerGridMap, robot: RobotModel
) -> np.ndarray:
    """Collision risk layer from obstacle inflation.

    For traversable cells, ``d_min`` is the exact Euclidean distance in
    meters from the cell center to the nearest untraversable cell center
    and the stored value is ``min(1, exp(footprint_dim - d_min))``.
    Untraversable cells store 1. Without any untraversable cell the layer
    is identically 0 (the d_min -> infinity limit).
    """
    trav = grid.layer(LAYER_TRAVERSABILITY)
    untraversable = trav == 0.0
    if not untraversable.any():
        layer = np.zeros((grid.rows, grid.cols))
    else:
        d_min = ndimage.distance_transform_edt(
            ~untraversable, sampling=grid.resolution
        )
        layer = np.where(
            untraversable,
            1.0,
            np.minimum(1.0, np.exp(robot.footprint_dim - d_min)),
        )
    grid.add_layer(LAYER_COLLISION, layer)
    return layer


def collision_risk(grid: MultiLayerGridMap, pose: Pose) -> float:
    """Collision risk at the pose's cell (layer lookup)."""
    cell = grid.world_to_cell(pose.xy)
    return float(grid.layer(LAYER_COLLISION)[cell.row, cell.col])


def _cell_slope_roughness(
    grid: MultiLayerGridMap, pose: Pose
) -> tuple[float, float]:
    cell = grid.world_to_cell(pose.xy)
    slope = float(grid.layer(LAYER_SLOPE)[cell.row, cell.col])
    roughness = float(grid.layer(LAYER_ROUGHNESS)[cell.row, cell.col])
    if not grid.known_mask[cell.row, cell.col] or math.isnan(slope) or math.isnan(roughness):
        raise UnknownTerrainError(f"terrain unknown at cell {tuple(cell)}")
    return slope, roughness


def traversability_cost(
    grid: MultiLayerGridMap,
    pose: Pose,
    robot: RobotModel,
    roughness_cap: float = ROUGHNESS_CAP,
) -> float:
    """Normalized slope plus normalized roughness, range [0, 2]."""
    slope, roughness = _cell_slope_roughness(grid, pose)
    return slope / robot.max_slope + roughness / roughness_cap


def ground_pressure(robot: RobotModel, slope: float) -> float:
    """Normal-force pressure the robot exerts on the slope, in pascals."""
    return robot.mass * robot.gravity * math.cos(slope) / robot.contact_area


def slip_value(robot: RobotModel, slope: float) -> float:
    """Pressure-scaled slope-to-friction ratio (unnormalized slip measure)."""
    return ground_pressure(robot, slope) * math.tan(slope) / robot.friction


def slip_risk_from_slope(robot: RobotModel, slope: float) -> float:
    """Slip risk: slip value normalized by its value at the max slope,
    clamped to 1 beyond the robot's climbing limit."""
    s_max = slip_value(robot, robot.max_slope)
    return min(1.0, slip_value(robot, slope) / s_max)


def slip_risk(grid: MultiLayerGridMap, pose: Pose, robot: RobotModel) -> float:
    slope, _ = _cell_slope_roughness(grid, pose)
    return slip_risk_from_slope(robot, slope)


def pose_risk(grid: MultiLayerGridMap, pose: Pose, robot: RobotModel) -> RiskBreakdown:
    """All risk components at a pose; raises UnknownTerrainError on
    unknown cells (collision alone is defined everywhere)."""
    slope, roughness = _cell_slope_roughness(grid, pose)
    return RiskBreakdown(
        collision=collision_risk(grid, pose),
        traversability=slope / robot.max_slope + roughness / ROUGHNESS_CAP,
        slip=slip_risk_from_slope(robot, slope),
    )


def path_risk(grid: MultiLayerGridMap, path: Path, robot: RobotModel) -> float:
    """Average total risk over the path's waypoints.

    Averaging (rather than summing) keeps longer paths from being
    penalized for having more poses.
    """
    totals = [pose_risk(grid, wp, robot).total for wp in path]
    return sum(totals) / len(totals)


def build_total_risk_layer(grid: MultiLayerGridMap, robot: RobotModel) -> np.ndarray:
    """Vectorized per-cell total risk R_c + R_t + R_s.

    NaN wherever slope or roughness is undefined; matches
    :func:`pose_risk` exactly on defined cells. Used for planner edge
    costs and fast path-risk evaluation.
    """
    collision = grid.layer(LAYER_COLLISION)
    slope = grid.layer(LAYER_SLOPE)
    roughness = grid.layer(LAYER_ROUGHNESS)
    s_max = slip_value(robot, robot.max_slope)
    with np.errstate(invalid="ignore"):
        pressure = robot.mass * robot.gravity * np.cos(slope) / robot.contact_area
        slip = np.minimum(1.0, pressure * np.tan(slope) / robot.friction / s_max)
        total = collision + slope / robot.max_slope + roughness / ROUGHNESS_CAP + slip
    return total
