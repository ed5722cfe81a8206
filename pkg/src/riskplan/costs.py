"""Energy, distance, time and exploration-gain evaluation for candidate paths."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid_map import CellIndex, MultiLayerGridMap, Path
from .robot import RobotModel

DEFAULT_COLUMN_HEIGHT = 2.0


@dataclass
class PathCosts:
    """Criterion values for one candidate path.

    gain is the raw unmapped volume in m^3, before any normalization.
    """

    energy: float
    distance: float
    time: float
    gain: float


@dataclass
class PathCandidate:
    """A planned path to one goal plus its evaluated criteria."""

    path: Path
    goal: CellIndex
    risk: float
    costs: PathCosts


def segment_power(
    robot: RobotModel, slope: float, rolling_coeff: float = 1.0
) -> float:
    """Driving power on a constant slope, in watts.

    Uphill the rolling and gradient resistances add; downhill the gradient
    term is subtracted and the result clamped at zero (no regenerative
    braking). ``rolling_coeff`` scales the rolling-resistance term and
    defaults to 1 so the plain cos+sin form is the default behavior.
    """
    if abs(slope) > math.pi / 2:
        raise ValueError("slope magnitude must be <= pi/2")
    base = robot.max_speed * robot.mass * robot.gravity
    incline = abs(slope)
    rolling = rolling_coeff * math.cos(incline)
    gradient = math.sin(incline)
    if slope >= 0:
        return base * (rolling + gradient)
    return max(0.0, base * (rolling - gradient))


def path_energy(path: Path, robot: RobotModel, rolling_coeff: float = 1.0) -> float:
    """Energy to traverse the path at max speed, in joules.

    Each segment's signed slope comes from the waypoint elevation delta
    over the horizontal segment length, which captures travel direction;
    zero-length segments are skipped.
    """
    energy = 0.0
    for start, end in path.segments():
        delta = end.position - start.position
        length = float(np.linalg.norm(delta))
        if length == 0.0:
            continue
        horizontal = math.hypot(delta[0], delta[1])
        if horizontal == 0.0:
            slope = math.copysign(math.pi / 2, delta[2])
        else:
            slope = math.atan2(delta[2], horizontal)
        power = segment_power(robot, slope, rolling_coeff)
        energy += power * (length / robot.max_speed)
    return energy


def path_distance(path: Path, squared: bool = False) -> float:
    """Sum of Euclidean segment lengths in meters.

    ``squared=True`` sums squared segment norms instead, for A/B
    comparison against the squared-distance variant.
    """
    total = 0.0
    for start, end in path.segments():
        norm = float(np.linalg.norm(end.position - start.position))
        total += norm * norm if squared else norm
    return total


def path_time(path: Path, robot: RobotModel) -> float:
    """Traversal time at max speed, in seconds."""
    return path_distance(path) / robot.max_speed


def sensor_disk_offsets(sensor_range: float, resolution: float) -> np.ndarray:
    """(dr, dc) cell offsets whose center-to-center distance is within range."""
    reach = int(math.floor(sensor_range / resolution + 1e-12))
    limit = (sensor_range / resolution) ** 2 + 1e-12
    offsets = []
    for dr in range(-reach, reach + 1):
        for dc in range(-reach, reach + 1):
            if dr * dr + dc * dc <= limit:
                offsets.append((dr, dc))
    return np.asarray(offsets, dtype=np.int64)


def estimate_gain(
    grid: MultiLayerGridMap,
    path: Path,
    sensor_range: float,
    column_height: float = DEFAULT_COLUMN_HEIGHT,
) -> float:
    """Expected unmapped volume along the path, in m^3.

    Counts the distinct currently-unknown cells within sensor range of any
    waypoint (un-occluded circular footprint, cell centers against the
    waypoint's cell center) and converts the count to volume with
    cell area x nominal column height. Overlapping footprints count each
    cell once.
    """
    if sensor_range <= 0:
        raise ValueError("sensor range must be > 0")
    offsets = sensor_disk_offsets(sensor_range, grid.resolution)
    covered = np.zeros((grid.rows, grid.cols), dtype=bool)
    for waypoint in path:
        cell = grid.world_to_cell(waypoint.xy)
        rows = offsets[:, 0] + cell.row
        cols = offsets[:, 1] + cell.col
        valid = (rows >= 0) & (rows < grid.rows) & (cols >= 0) & (cols < grid.cols)
        covered[rows[valid], cols[valid]] = True
    unknown_count = int(np.count_nonzero(covered & ~grid.known_mask))
    return unknown_count * grid.resolution**2 * column_height
