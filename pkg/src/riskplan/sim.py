"""Deterministic 2.5D exploration missions.

Per planning period the robot observes with an occlusion-aware range
sensor, recomputes the derived map layers, detects frontier goals, plans
risk-weighted shortest paths to them, selects one (VIKOR risk-reward or
gain-greedy baseline) and follows it at max speed, logging one record per
simulated second. Stepping onto truth-untraversable ground is a lethal
action: the robot is immobilized for the rest of the mission and coverage
freezes.

Everything except wall-clock planning times is bit-deterministic for a
given (world, robot, config, mode); timings are therefore kept out of the
mission CSV and written to a sidecar file.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path as FilePath
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse import csgraph

from .costs import (
    PathCandidate,
    PathCosts,
    estimate_gain,
    path_distance,
    path_energy,
    path_time,
    segment_power,
    sensor_disk_offsets,
)
from .errors import NoFeasiblePathError
from .grid_map import (
    LAYER_COLLISION,
    LAYER_ELEVATION,
    LAYER_ROUGHNESS,
    LAYER_SLOPE,
    LAYER_TRAVERSABILITY,
    CellIndex,
    MultiLayerGridMap,
    Path,
    Pose,
)
from .risk import build_collision_cost_layer, build_total_risk_layer, slip_risk_from_slope
from .robot import RobotModel
from .terrain import ROUGHNESS_CAP, TerrainParams, compute_derived_layers, fuse_elevation_batch
from .vikor import MissionState, baseline_select, dynamic_weights, select_path
from .worldgen import DIRS8, TruthWorld, WorldGenParams

MODE_RISK_AWARE = "risk_aware"
MODE_BASELINE = "baseline"
MODES = (MODE_RISK_AWARE, MODE_BASELINE)

MISSION_CSV_HEADER = (
    "t_s,x,y,risk_c,risk_t,risk_s,risk_total,coverage_m3,battery_s,lethal"
)
TIMING_CSV_HEADER = "t_s,plan_ms"


@dataclass
class SimConfig:
    """Mission and sensor parameters; worldgen params ride along so one
    object fully specifies a seeded experiment run."""

    sensor_range: float = 10.0
    sensor_height: float = 0.5
    planning_period: int = 2
    max_candidates: int = 12
    frontier_cluster_radius: float = 1.0
    duration: int = 600
    column_height: float = 2.0
    battery_time_s: float = 36000.0
    d_max: float = 1000.0
    obs_variance: float = 0.01
    majority_weight: float = 0.5
    terrain: TerrainParams = field(default_factory=TerrainParams)
    world: WorldGenParams = field(default_factory=WorldGenParams)

    def __post_init__(self) -> None:
        if self.sensor_range <= 0 or self.sensor_height < 0:
            raise ValueError("sensor_range must be > 0 and sensor_height >= 0")
        if int(self.planning_period) < 1 or int(self.duration) < 1:
            raise ValueError("planning_period and duration must be >= 1 second")
        self.planning_period = int(self.planning_period)
        self.duration = int(self.duration)
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be >= 1")
        if min(self.battery_time_s, self.d_max, self.obs_variance) <= 0:
            raise ValueError("battery_time_s, d_max and obs_variance must be > 0")


@dataclass
class MissionRecord:
    t_s: int
    x: float
    y: float
    risk_c: float
    risk_t: float
    risk_s: float
    risk_total: float
    coverage_m3: float
    battery_s: float
    lethal: bool


@dataclass
class MissionLog:
    """Per-second mission records plus wall-clock planning timings.

    The records are fully deterministic and round-trip through the mission
    CSV byte-identically; the timings are measured and live in a separate
    sidecar file so reruns of the same spec produce identical mission CSVs.
    """

    mode: str
    seed: int
    records: list[MissionRecord] = field(default_factory=list)
    plan_timings: list[tuple[int, float]] = field(default_factory=list)

    @property
    def final_coverage(self) -> float:
        return self.records[-1].coverage_m3 if self.records else 0.0

    @property
    def lethal(self) -> bool:
        return any(r.lethal for r in self.records)

    def risk_samples(self) -> np.ndarray:
        return np.array([r.risk_total for r in self.records])

    def write_csv(self, path: str | FilePath) -> None:
        lines = [MISSION_CSV_HEADER]
        for r in self.records:
            lines.append(
                f"{r.t_s},{r.x:.6f},{r.y:.6f},{r.risk_c:.6f},{r.risk_t:.6f},"
                f"{r.risk_s:.6f},{r.risk_total:.6f},{r.coverage_m3:.6f},"
                f"{r.battery_s:.6f},{int(r.lethal)}"
            )
        FilePath(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def write_timing_csv(self, path: str | FilePath) -> None:
        lines = [TIMING_CSV_HEADER]
        for t_s, plan_ms in self.plan_timings:
            lines.append(f"{t_s},{plan_ms:.3f}")
        FilePath(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_mission_csv(path: str | FilePath) -> MissionLog:
    log = MissionLog(mode="", seed=0)
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != MISSION_CSV_HEADER.split(","):
            raise ValueError(f"unexpected mission CSV header in {path}")
        for row in reader:
            log.records.append(
                MissionRecord(
                    t_s=int(row["t_s"]),
                    x=float(row["x"]),
                    y=float(row["y"]),
                    risk_c=float(row["risk_c"]),
                    risk_t=float(row["risk_t"]),
                    risk_s=float(row["risk_s"]),
                    risk_total=float(row["risk_total"]),
                    coverage_m3=float(row["coverage_m3"]),
                    battery_s=float(row["battery_s"]),
                    lethal=row["lethal"] == "1",
                )
            )
    return log


def read_timing_csv(path: str | FilePath) -> list[tuple[int, float]]:
    timings = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            timings.append((int(row["t_s"]), float(row["plan_ms"])))
    return timings


# ----------------------------------------------------------------------
# Observation


@lru_cache(maxsize=8)
def _los_kernel(sensor_range: float, resolution: float):
    """Precomputed ray-sample table for the sensor disk.

    For every cell offset in the disk, intermediate sample cells along the
    center-to-center ray (about every half cell) with their ray fractions.
    Targets closer than 1.5 cells have no intervening cell and are always
    visible.
    """
    offsets = sensor_disk_offsets(sensor_range, resolution)
    sample_of: list[int] = []
    sample_dr: list[int] = []
    sample_dc: list[int] = []
    sample_t: list[float] = []
    for k, (dr, dc) in enumerate(offsets):
        dist = math.hypot(dr, dc)
        steps = int(math.ceil(dist * 2.0))
        for i in range(1, steps):
            t = i / steps
            rr = round(dr * t)
            cc = round(dc * t)
            if (rr, cc) in ((0, 0), (dr, dc)):
                continue
            sample_of.append(k)
            sample_dr.append(rr)
            sample_dc.append(cc)
            sample_t.append(t)
    return (
        offsets,
        np.asarray(sample_of, dtype=np.int64),
        np.asarray(sample_dr, dtype=np.int64),
        np.asarray(sample_dc, dtype=np.int64),
        np.asarray(sample_t, dtype=float),
    )


def observe(
    world: TruthWorld,
    known_map: MultiLayerGridMap,
    pose: Pose,
    config: SimConfig,
) -> int:
    """Reveal every line-of-sight visible cell within sensor range.

    The sensor sits ``sensor_height`` above the truth ground at the
    robot's cell; a target is visible when no intervening truth elevation
    exceeds the straight ray to the target's top. Visible cells receive a
    truth-height observation with the configured variance. Returns the
    number of cells observed.
    """
    truth = world.grid.layer(LAYER_ELEVATION)
    rows, cols = truth.shape
    cell = world.grid.world_to_cell(pose.xy)
    offsets, sample_of, sample_dr, sample_dc, sample_t = _los_kernel(
        config.sensor_range, world.grid.resolution
    )

    target_r = offsets[:, 0] + cell.row
    target_c = offsets[:, 1] + cell.col
    in_bounds = (
        (target_r >= 0) & (target_r < rows) & (target_c >= 0) & (target_c < cols)
    )
    z0 = truth[cell.row, cell.col] + config.sensor_height
    z1 = np.full(len(offsets), np.nan)
    z1[in_bounds] = truth[target_r[in_bounds], target_c[in_bounds]]

    ground = truth[
        np.clip(sample_dr + cell.row, 0, rows - 1),
        np.clip(sample_dc + cell.col, 0, cols - 1),
    ]
    ray = z0 + (z1[sample_of] - z0) * sample_t
    with np.errstate(invalid="ignore"):
        blocking = ground > ray + 1e-9
    blocked_counts = np.bincount(
        sample_of[blocking], minlength=len(offsets)
    )
    visible = in_bounds & (blocked_counts == 0)

    obs_r = target_r[visible]
    obs_c = target_c[visible]
    fuse_elevation_batch(
        known_map,
        obs_r,
        obs_c,
        truth[obs_r, obs_c],
        config.obs_variance,
        confidence_k=config.terrain.confidence_k,
    )
    return int(visible.sum())


def refresh_layers(
    known_map: MultiLayerGridMap, robot: RobotModel, config: SimConfig
) -> np.ndarray:
    """Recompute all derived layers and return the per-cell total risk."""
    compute_derived_layers(known_map, robot, config.terrain)
    build_collision_cost_layer(known_map, robot)
    return build_total_risk_layer(known_map, robot)


# ----------------------------------------------------------------------
# Frontier detection


def detect_frontiers(
    known_map: MultiLayerGridMap,
    config: SimConfig,
    exclude: CellIndex | None = None,
) -> list[CellIndex]:
    """Clustered frontier goals, largest clusters first (at most K).

    Frontier cells are known traversable cells with at least one unknown
    4-neighbor. Cells within the cluster radius merge into one cluster;
    each cluster contributes its centroid-nearest frontier cell.
    """
    trav = known_map.layer(LAYER_TRAVERSABILITY) == 1.0
    unknown = ~known_map.known_mask
    touches_unknown = np.zeros_like(unknown)
    touches_unknown[:-1, :] |= unknown[1:, :]
    touches_unknown[1:, :] |= unknown[:-1, :]
    touches_unknown[:, :-1] |= unknown[:, 1:]
    touches_unknown[:, 1:] |= unknown[:, :-1]
    frontier = trav & touches_unknown
    if exclude is not None:
        frontier[exclude.row, exclude.col] = False
    if not frontier.any():
        return []

    radius_cells = max(1, int(round(config.frontier_cluster_radius / known_map.resolution)))
    y, x = np.ogrid[-radius_cells : radius_cells + 1, -radius_cells : radius_cells + 1]
    structure = x * x + y * y <= radius_cells * radius_cells
    dilated = ndimage.binary_dilation(frontier, structure=structure)
    labels, n_labels = ndimage.label(dilated, structure=np.ones((3, 3)))

    cells = np.argwhere(frontier)
    cell_labels = labels[frontier]
    goals: list[tuple[int, int, int, CellIndex]] = []
    for lab in range(1, n_labels + 1):
        members = cells[cell_labels == lab]
        if len(members) == 0:
            continue
        centroid = members.mean(axis=0)
        d2 = (members[:, 0] - centroid[0]) ** 2 + (members[:, 1] - centroid[1]) ** 2
        order = np.lexsort((members[:, 1], members[:, 0], d2))
        best = members[order[0]]
        goals.append(
            (
                -len(members),
                int(members[:, 0].min()),
                int(members[:, 1].min()),
                CellIndex(int(best[0]), int(best[1])),
            )
        )
    goals.sort(key=lambda item: item[:3])
    return [goal for _, _, _, goal in goals[: config.max_candidates]]


# ----------------------------------------------------------------------
# Candidate planning

_SQRT2 = math.sqrt(2.0)


def _neighbor_ok(mask: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """out[r, c] = (r+dr, c+dc) in bounds and mask[r+dr, c+dc]."""
    rows, cols = mask.shape
    out = np.zeros_like(mask)
    src_r = slice(max(0, -dr), rows - max(0, dr))
    src_c = slice(max(0, -dc), cols - max(0, dc))
    dst_r = slice(max(0, dr), rows - max(0, -dr))
    dst_c = slice(max(0, dc), cols - max(0, -dc))
    out[src_r, src_c] = mask[dst_r, dst_c]
    return out


def plan_candidates(
    known_map: MultiLayerGridMap,
    start: CellIndex,
    goals: Sequence[CellIndex],
    robot: RobotModel,
    config: SimConfig,
    risk_layer: np.ndarray,
) -> list[PathCandidate]:
    """Risk-weighted shortest paths to the goals over known traversable cells.

    Edge cost is step length times (1 + total risk at the target cell);
    diagonal moves require both orthogonal neighbors traversable. The
    start cell is admitted as a source even if its own classification has
    flipped, so the robot can always leave it. Unreachable goals are
    dropped; raises NoFeasiblePathError when none survives.
    """
    if len(goals) == 0:
        raise NoFeasiblePathError("no goals to plan to")
    rows, cols = known_map.rows, known_map.cols
    domain = known_map.layer(LAYER_TRAVERSABILITY) == 1.0
    domain[start.row, start.col] = True
    risk_flat = np.where(np.isfinite(risk_layer), risk_layer, 0.0).ravel()

    n = rows * cols
    node_ids = np.arange(n).reshape(rows, cols)
    edge_src: list[np.ndarray] = []
    edge_dst: list[np.ndarray] = []
    edge_w: list[np.ndarray] = []
    for dr, dc in DIRS8:
        ok = domain & _neighbor_ok(domain, dr, dc)
        if dr != 0 and dc != 0:
            ok &= _neighbor_ok(domain, dr, 0) & _neighbor_ok(domain, 0, dc)
        if not ok.any():
            continue
        length = (_SQRT2 if dr != 0 and dc != 0 else 1.0) * known_map.resolution
        src = node_ids[ok]
        dst = src + dr * cols + dc
        edge_src.append(src)
        edge_dst.append(dst)
        edge_w.append(length * (1.0 + risk_flat[dst]))

    if not edge_src:
        raise NoFeasiblePathError("start cell has no traversable neighbors")
    graph = sparse.csr_matrix(
        (np.concatenate(edge_w), (np.concatenate(edge_src), np.concatenate(edge_dst))),
        shape=(n, n),
    )
    start_id = start.row * cols + start.col
    dist, predecessors = csgraph.dijkstra(
        graph, indices=start_id, return_predecessors=True, directed=True
    )

    elevation = known_map.layer(LAYER_ELEVATION)
    candidates: list[PathCandidate] = []
    for goal in goals:
        goal_id = goal.row * cols + goal.col
        if not np.isfinite(dist[goal_id]):
            continue
        chain = []
        node = goal_id
        while node != -9999 and node != start_id:
            chain.append(node)
            node = predecessors[node]
        chain.append(start_id)
        chain.reverse()
        cell_rows = np.asarray(chain) // cols
        cell_cols = np.asarray(chain) % cols
        waypoints = []
        for i, (r, c) in enumerate(zip(cell_rows, cell_cols)):
            x, y = known_map.cell_center(CellIndex(int(r), int(c)))
            z = elevation[r, c]
            if i + 1 < len(cell_rows):
                heading = math.atan2(
                    float(cell_rows[i + 1] - r), float(cell_cols[i + 1] - c)
                )
            elif waypoints:
                heading = waypoints[-1].heading
            else:
                heading = 0.0
            waypoints.append(Pose(np.array([x, y, float(z)]), heading))
        path = Path(waypoints)
        candidate_risk = float(np.mean(risk_layer[cell_rows, cell_cols]))
        costs = PathCosts(
            energy=path_energy(path, robot),
            distance=path_distance(path),
            time=path_time(path, robot),
            gain=estimate_gain(
                known_map, path, config.sensor_range, config.column_height
            ),
        )
        candidates.append(
            PathCandidate(path=path, goal=goal, risk=candidate_risk, costs=costs)
        )
    if not candidates:
        raise NoFeasiblePathError("all goals unreachable")
    return candidates


# ----------------------------------------------------------------------
# Mission loop


def _record_risk(
    known_map: MultiLayerGridMap, cell: CellIndex, robot: RobotModel
) -> tuple[float, float, float]:
    """(collision, traversability, slip) risk at a known cell for logging."""
    r, c = cell
    collision = float(known_map.layer(LAYER_COLLISION)[r, c])
    slope = float(known_map.layer(LAYER_SLOPE)[r, c])
    roughness = float(known_map.layer(LAYER_ROUGHNESS)[r, c])
    if math.isnan(slope) or math.isnan(roughness):
        # Off-path standstill on a cell whose estimate degenerated; report
        # the collision term only.
        return collision, 0.0, 0.0
    r_t = slope / robot.max_slope + roughness / ROUGHNESS_CAP
    r_s = slip_risk_from_slope(robot, slope)
    return collision, r_t, r_s


class _PathFollower:
    """Continuous polyline follower with per-cell lethal checks."""

    def __init__(self, path: Path):
        self.waypoints = path.waypoints
        self.index = 0
        self.position = self.waypoints[0].position.copy()

    @property
    def done(self) -> bool:
        return self.index >= len(self.waypoints) - 1

    def current_slope(self) -> float:
        if self.done:
            return 0.0
        a = self.waypoints[self.index].position
        b = self.waypoints[self.index + 1].position
        horizontal = math.hypot(b[0] - a[0], b[1] - a[1])
        if horizontal == 0.0:
            return math.copysign(math.pi / 2, b[2] - a[2]) if b[2] != a[2] else 0.0
        return math.atan2(float(b[2] - a[2]), horizontal)


def run_mission(
    world: TruthWorld,
    robot: RobotModel,
    config: SimConfig,
    mode: str,
    seed: int = 0,
    on_plan: Callable[[int, MultiLayerGridMap, list[PathCandidate], int], None]
    | None = None,
) -> MissionLog:
    """Run one mission and return its log.

    ``mode`` selects the candidate-selection rule only; observation,
    mapping and path planning are identical in both modes. ``on_plan`` is
    a debug hook called as (t_s, known_map, candidates, selected_index)
    after every successful planning round.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    truth_trav = world.grid.layer(LAYER_TRAVERSABILITY)
    if truth_trav[world.start.row, world.start.col] != 1.0:
        raise ValueError("robot must start on a traversable truth cell")

    known_map = world.grid.copy_empty()
    start_xy = world.grid.cell_center(world.start)
    start_z = world.grid.layer(LAYER_ELEVATION)[world.start.row, world.start.col]
    pose = Pose(np.array([start_xy[0], start_xy[1], float(start_z)]))

    log = MissionLog(mode=mode, seed=seed)
    battery_energy = config.battery_time_s * robot.nominal_power
    d_traversed = 0.0
    follower: _PathFollower | None = None
    immobilized = False
    lethal = False
    cell_area_volume = world.grid.resolution**2 * config.column_height

    t = 0
    while t < config.duration:
        if not immobilized:
            observe(world, known_map, pose, config)
            risk_layer = refresh_layers(known_map, robot, config)
            robot_cell = known_map.world_to_cell(pose.xy)

            plan_start = time.perf_counter()
            goals = detect_frontiers(known_map, config, exclude=robot_cell)
            candidates: list[PathCandidate] = []
            if goals:
                try:
                    candidates = plan_candidates(
                        known_map, robot_cell, goals, robot, config, risk_layer
                    )
                except NoFeasiblePathError:
                    candidates = []
            if candidates:
                if mode == MODE_RISK_AWARE:
                    state = MissionState(
                        t_elapsed=float(t),
                        t_mission=float(config.duration),
                        d_traversed=d_traversed,
                        d_max=config.d_max,
                        t_battery=battery_energy / robot.nominal_power,
                    )
                    selected = select_path(
                        candidates, dynamic_weights(state), config.majority_weight
                    )
                else:
                    selected = baseline_select(candidates)
                follower = _PathFollower(candidates[selected].path)
                follower.position = pose.position.copy()
                if on_plan is not None:
                    on_plan(t, known_map, candidates, selected)
            else:
                follower = None
            plan_ms = (time.perf_counter() - plan_start) * 1000.0
            log.plan_timings.append((t, plan_ms))

        seconds = min(config.planning_period, config.duration - t)
        for _ in range(seconds):
            if not immobilized and follower is not None and not follower.done:
                budget = robot.max_speed * 1.0
                while budget > 1e-12 and not follower.done:
                    target = follower.waypoints[follower.index + 1].position
                    delta = target - follower.position
                    span = float(np.linalg.norm(delta))
                    if span <= 1e-12:
                        follower.index += 1
                        continue
                    step = min(span, budget)
                    slope = follower.current_slope()
                    follower.position = (
                        follower.position + delta * (step / span)
                        if step < span
                        else target.copy()
                    )
                    budget -= step
                    d_traversed += step
                    power = segment_power(robot, slope)
                    battery_energy = max(0.0, battery_energy - power * step / robot.max_speed)
                    if step >= span:
                        follower.index += 1
                    cell = world.grid.world_to_cell(follower.position[:2])
                    if truth_trav[cell.row, cell.col] != 1.0:
                        lethal = True
                        immobilized = True
                        cx, cy = world.grid.cell_center(cell)
                        cz = world.grid.layer(LAYER_ELEVATION)[cell.row, cell.col]
                        follower.position = np.array([cx, cy, float(cz)])
                        break
                moved = follower.position[:2] - pose.position[:2]
                heading = pose.heading
                if math.hypot(float(moved[0]), float(moved[1])) > 1e-9:
                    heading = math.atan2(float(moved[1]), float(moved[0]))
                pose = Pose(follower.position.copy(), heading)
            t += 1
            cell = known_map.world_to_cell(pose.xy)
            risk_c, risk_t, risk_s = _record_risk(known_map, cell, robot)
            log.records.append(
                MissionRecord(
                    t_s=t,
                    x=float(pose.position[0]),
                    y=float(pose.position[1]),
                    risk_c=risk_c,
                    risk_t=risk_t,
                    risk_s=risk_s,
                    risk_total=risk_c + risk_t + risk_s,
                    coverage_m3=float(np.count_nonzero(known_map.known_mask))
                    * cell_area_volume,
                    battery_s=battery_energy / robot.nominal_power,
                    lethal=lethal,
                )
            )
            if battery_energy <= 0.0:
                immobilized = True
    return log
