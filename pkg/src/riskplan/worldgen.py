"""Procedural cave-like truth worlds for the exploration simulator.

A world is a corridor network carved into high, rough surroundings. The
floor undulates with long-wavelength ramps (some steeper than the robot
can climb), and carries pits, trenches, boulders and rough patches.
Dangerous-by-design: pits and trenches hide behind occlusion until almost
stepped on, while walls and boulders reveal themselves from afar.

Generation is fully deterministic: the same (seed, params) pair always
produces a bit-identical world.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, fields, replace
from pathlib import Path as FilePath

import numpy as np

from .errors import GenerationFailedError
from .grid_map import (
    LAYER_ELEVATION,
    LAYER_TRAVERSABILITY,
    CellIndex,
    MultiLayerGridMap,
    load_map,
    save_map,
)
from .risk import build_collision_cost_layer
from .robot import RobotModel
from .terrain import TerrainParams, compute_derived_layers

# 8-connected moves with corner cutting forbidden (diagonal moves need both
# orthogonal neighbors free); shared with the planner and connectivity check.
DIRS8 = (
    (-1, 0), (1, 0), (0, -1), (0, 1),
    (-1, -1), (-1, 1), (1, -1), (1, 1),
)


@dataclass
class WorldGenParams:
    """Generator knobs. Densities are features per 100 m^2 of carved floor."""

    size_m: float = 80.0
    resolution: float = 0.5
    corridor_count: int = 8
    corridor_width: float = 3.5
    slope_amplitude: float = 0.55  # peak floor gradient, m per m
    roughness_density: float = 1.5
    obstacle_density: float = 1.2
    gain_trap_count: int = 0
    wall_height: float = 2.5
    pit_depth: float = 2.0
    friction: float = 0.6
    min_reachable_area: float = 20.0
    max_reseeds: int = 8

    def __post_init__(self) -> None:
        if self.size_m <= 0 or self.resolution <= 0:
            raise ValueError("size_m and resolution must be positive")
        if self.corridor_count < 1 or self.corridor_width <= 0:
            raise ValueError("corridor parameters must be positive")
        for name in ("slope_amplitude", "roughness_density", "obstacle_density",
                     "wall_height", "pit_depth"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


WORLD_PRESETS: dict[str, WorldGenParams] = {
    "flat": WorldGenParams(
        size_m=40.0,
        corridor_count=1,
        slope_amplitude=0.0,
        roughness_density=0.0,
        obstacle_density=0.0,
        wall_height=0.0,
        pit_depth=0.0,
    ),
    "cave": WorldGenParams(
        size_m=80.0,
        corridor_count=8,
        corridor_width=7.0,
        slope_amplitude=0.7,
        roughness_density=1.5,
        obstacle_density=0.8,
        gain_trap_count=2,
        min_reachable_area=250.0,
    ),
    "hazard_dense": WorldGenParams(
        size_m=80.0,
        corridor_count=12,
        corridor_width=7.5,
        slope_amplitude=0.55,
        roughness_density=1.6,
        obstacle_density=1.4,
        gain_trap_count=4,
        min_reachable_area=600.0,
    ),
}


@dataclass
class TruthWorld:
    """Ground-truth heightmap plus derived truth layers and friction.

    ``trap_mouths`` records the gain-trap lane centers (diagnostics only).
    """

    grid: MultiLayerGridMap
    start: CellIndex
    seed: int
    effective_seed: int
    friction: float
    params: WorldGenParams
    trap_mouths: list[CellIndex] = field(default_factory=list)


def _disk_cells(rows: int, cols: int, cr: float, cc: float, radius_cells: float):
    """Index arrays of in-bounds cells within radius of a (row, col) point."""
    r_lo = max(0, int(math.floor(cr - radius_cells)))
    r_hi = min(rows - 1, int(math.ceil(cr + radius_cells)))
    c_lo = max(0, int(math.floor(cc - radius_cells)))
    c_hi = min(cols - 1, int(math.ceil(cc + radius_cells)))
    if r_lo > r_hi or c_lo > c_hi:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    rr, cc_grid = np.meshgrid(
        np.arange(r_lo, r_hi + 1), np.arange(c_lo, c_hi + 1), indexing="ij"
    )
    inside = (rr - cr) ** 2 + (cc_grid - cc) ** 2 <= radius_cells**2
    return rr[inside], cc_grid[inside]


def _carve_corridors(
    rng: np.random.Generator, n: int, params: WorldGenParams
) -> np.ndarray:
    """Random-walk corridor network; returns the carved-floor mask."""
    carved = np.zeros((n, n), dtype=bool)
    brush = max(1.0, (params.corridor_width / 2.0) / params.resolution)
    margin = brush + 1.0
    anchors = [(n / 2.0, n / 2.0)]
    steps_per_corridor = int(0.9 * n)
    for _ in range(params.corridor_count):
        start_idx = rng.integers(0, len(anchors))
        r, c = anchors[start_idx]
        heading = rng.uniform(0.0, 2.0 * math.pi)
        for _ in range(steps_per_corridor):
            rr, cc = _disk_cells(n, n, r, c, brush)
            carved[rr, cc] = True
            heading += rng.normal(0.0, 0.22)
            r += math.sin(heading)
            c += math.cos(heading)
            if not (margin <= r <= n - 1 - margin):
                heading = -heading
                r = min(max(r, margin), n - 1 - margin)
            if not (margin <= c <= n - 1 - margin):
                heading = math.pi - heading
                c = min(max(c, margin), n - 1 - margin)
            if rng.random() < 0.01:
                anchors.append((r, c))
        anchors.append((r, c))
    return carved


def _undulation(rng: np.random.Generator, n: int, params: WorldGenParams) -> np.ndarray:
    """Long-wavelength height field whose gradient peaks near slope_amplitude."""
    if params.slope_amplitude <= 0:
        return np.zeros((n, n))
    y, x = np.meshgrid(
        np.arange(n) * params.resolution, np.arange(n) * params.resolution,
        indexing="ij",
    )
    height = np.zeros((n, n))
    # Long wavelengths keep curvature low so smooth ramps do not read as
    # rough terrain under the |h - smoothed| metric.
    for share in (0.5, 0.3):
        wavelength = rng.uniform(35.0, 55.0)
        direction = rng.uniform(0.0, 2.0 * math.pi)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        gradient = params.slope_amplitude * share
        amplitude = gradient * wavelength / (2.0 * math.pi)
        k = 2.0 * math.pi / wavelength
        height += amplitude * np.sin(
            k * (x * math.cos(direction) + y * math.sin(direction)) + phase
        )
    return height


def _scatter_hazards(
    rng: np.random.Generator,
    heights: np.ndarray,
    carved: np.ndarray,
    params: WorldGenParams,
    keep_clear: tuple[float, float],
) -> None:
    """Drop boulders and rough patches onto the carved floor.

    Both hazard kinds are self-revealing to the range sensor (visible from
    afar, estimated with full neighborhoods before traversal), so they
    shape routes and create occlusion shadows without hiding lethal
    ground. Hidden lethality is concentrated in the gain-trap rooms.
    """
    n = heights.shape[0]
    res = params.resolution
    carved_cells = np.argwhere(carved)
    if carved_cells.size == 0:
        return
    carved_area = len(carved_cells) * res * res
    clear_r2 = (6.0 / res) ** 2  # hazard-free bubble around the start

    def pick_center() -> tuple[float, float] | None:
        for _ in range(40):
            r, c = carved_cells[rng.integers(0, len(carved_cells))]
            if (r - keep_clear[0]) ** 2 + (c - keep_clear[1]) ** 2 > clear_r2:
                return float(r), float(c)
        return None

    n_boulders = int(round(params.obstacle_density * carved_area / 100.0))
    for _ in range(n_boulders):
        center = pick_center()
        if center is None:
            continue
        radius = rng.uniform(0.5, 1.2) / res
        bump = rng.uniform(1.2, 2.0)
        rr, cc = _disk_cells(n, n, center[0], center[1], radius)
        heights[rr, cc] += bump

    n_patches = int(round(params.roughness_density * carved_area / 100.0))
    for _ in range(n_patches):
        center = pick_center()
        if center is None:
            continue
        radius = rng.uniform(1.0, 2.5) / res
        amplitude = rng.uniform(0.05, 0.13)
        rr, cc = _disk_cells(n, n, center[0], center[1], radius)
        heights[rr, cc] += rng.uniform(-amplitude, amplitude, size=len(rr))


def _gain_traps(
    rng: np.random.Generator,
    heights: np.ndarray,
    undulation: np.ndarray,
    carved: np.ndarray,
    params: WorldGenParams,
    start_hint: tuple[float, float],
) -> list[CellIndex]:
    """Walled rooms reachable only through a pit-studded canyon.

    The ring wall keeps the room interior unobserved, so its volume is a
    large, depletion-proof exploration-gain bait. The canyon approach is
    flanked by visible walls (high estimated collision and roughness cost
    all along) and floored with occluded pits whose steep rims and
    |h - smoothed| halos are lethal in truth but invisible to the ray
    sensor until overhead. A gain-greedy selector walks in; a selector
    that weighs path risk sees a distinctly worst alternative.
    """
    mouths: list[CellIndex] = []
    if params.gain_trap_count < 1 or params.wall_height <= 0:
        return mouths
    n = heights.shape[0]
    res = params.resolution
    wall = params.wall_height + 0.5
    carved_cells = np.argwhere(carved)
    if carved_cells.size == 0:
        return mouths
    rows_grid, cols_grid = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")

    placed = 0
    placed_centers: list[tuple[float, float]] = []
    placed_angles: list[float] = []
    for _ in range(params.gain_trap_count * 40):
        if placed >= params.gain_trap_count:
            break
        wall_thick = 1.5 / res
        canyon_len = rng.uniform(3.2, 4.2) / res
        # two early-bite rooms near the start (big bait, angularly far
        # apart so the start bubble keeps trap-free directions); later
        # rooms farther out
        if placed < 2:
            room_r = rng.uniform(9.0, 11.0) / res
            mouth_gap = rng.uniform(2.0, 4.0) / res
        else:
            room_r = rng.uniform(9.0, 11.0) / res
            mouth_gap = rng.uniform(12.0, 30.0) / res
        extent = room_r + wall_thick + canyon_len
        d_hint = extent + mouth_gap
        theta = rng.uniform(0.0, 2.0 * math.pi)
        if any(
            abs(math.remainder(theta - prev, 2.0 * math.pi)) < 1.1
            for prev in placed_angles
        ):
            continue
        r0 = start_hint[0] - d_hint * math.sin(theta)
        c0 = start_hint[1] - d_hint * math.cos(theta)
        margin = room_r + wall_thick + 2.0
        if not (margin <= r0 <= n - 1 - margin and margin <= c0 <= n - 1 - margin):
            continue
        # the canyon exit must open onto carved floor
        exit_r = r0 + (extent + 1.5 / res) * math.sin(theta)
        exit_c = c0 + (extent + 1.5 / res) * math.cos(theta)
        rr, cc = _disk_cells(n, n, exit_r, exit_c, 2.0 / res)
        if len(rr) == 0 or carved[rr, cc].mean() < 0.6:
            continue
        if any(
            math.hypot(r0 - pr, c0 - pc) < 2.2 * (room_r + wall_thick)
            for pr, pc in placed_centers
        ):
            continue

        ur, uc = math.sin(theta), math.cos(theta)
        dist = np.hypot(rows_grid - r0, cols_grid - c0)
        proj = (rows_grid - r0) * ur + (cols_grid - c0) * uc
        perp = -(rows_grid - r0) * uc + (cols_grid - c0) * ur
        half_sep = 2.2 / res
        ring = (dist >= room_r) & (dist <= room_r + wall_thick)
        gap = (np.abs(perp) <= half_sep) & (proj > 0)
        canyon_side = (
            (proj >= room_r + wall_thick)
            & (proj <= extent)
            & (np.abs(perp) > half_sep)
            & (np.abs(perp) <= half_sep + 1.5 / res)
        )
        heights[(ring & ~gap) | canyon_side] += wall
        lane = (
            (np.abs(perp) <= half_sep)
            & (proj >= room_r - 1.0 / res)
            & (proj <= extent + 1.5 / res)
        )
        heights[lane] = undulation[lane]
        carved[lane] = True
        # blocker stub behind the gap: keeps the interior dark while the
        # mouth is approached, so the gain bait does not erode
        stub = (
            (np.abs(perp) <= 3.4 / res)
            & (proj >= room_r - 3.2 / res)
            & (proj <= room_r - 1.6 / res)
        )
        heights[stub] = undulation[stub] + wall
        # occluded pits every couple of meters along the canyon thread
        pit_r = 0.7 / res
        pit_proj = room_r + wall_thick + 0.6 / res
        stagger = -0.3
        while pit_proj < extent - 0.4 / res:
            pr = r0 + pit_proj * ur + (stagger / res) * (-uc)
            pc = c0 + pit_proj * uc + (stagger / res) * ur
            prr, pcc = _disk_cells(n, n, pr, pc, pit_r)
            heights[prr, pcc] = undulation[prr, pcc] - params.pit_depth
            pit_proj += 1.8 / res
            stagger = -stagger
        mouth_row = int(round(r0 + extent * ur))
        mouth_col = int(round(c0 + extent * uc))
        mouths.append(CellIndex(mouth_row, mouth_col))
        placed_centers.append((r0, c0))
        placed_angles.append(theta)
        placed += 1
    return mouths


def _bfs_reachable(trav: np.ndarray, start: CellIndex) -> np.ndarray:
    """Cells reachable from start via 8-connected traversable moves."""
    rows, cols = trav.shape
    reached = np.zeros_like(trav, dtype=bool)
    if trav[start.row, start.col] != 1.0:
        return reached
    reached[start.row, start.col] = True
    queue = deque([tuple(start)])
    while queue:
        r, c = queue.popleft()
        for dr, dc in DIRS8:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < rows and 0 <= nc < cols):
                continue
            if reached[nr, nc] or trav[nr, nc] != 1.0:
                continue
            if dr != 0 and dc != 0:  # no corner cutting
                if trav[r + dr, c] != 1.0 or trav[r, c + dc] != 1.0:
                    continue
            reached[nr, nc] = True
            queue.append((nr, nc))
    return reached


def _nearest_traversable(trav: np.ndarray, center: tuple[int, int]) -> CellIndex | None:
    """Traversable cell closest to the given cell (deterministic order)."""
    candidates = np.argwhere(trav == 1.0)
    if candidates.size == 0:
        return None
    d2 = (candidates[:, 0] - center[0]) ** 2 + (candidates[:, 1] - center[1]) ** 2
    order = np.lexsort((candidates[:, 1], candidates[:, 0], d2))
    best = candidates[order[0]]
    return CellIndex(int(best[0]), int(best[1]))


def _start_hint(
    heights: np.ndarray, carved: np.ndarray, resolution: float
) -> tuple[float, float]:
    """Gently-sloped carved cell near the network's periphery (pre-hazard).

    Starting at an entrance rather than the center gives exploration a
    coherent direction, the way a real cave mission begins at its mouth.
    """
    gy, gx = np.gradient(heights, resolution)
    gentle = carved & (np.hypot(gx, gy) < 0.3)
    if not gentle.any():
        gentle = carved
    n = heights.shape[0]
    cells = np.argwhere(gentle)
    d2 = (cells[:, 0] - n / 2.0) ** 2 + (cells[:, 1] - n / 2.0) ** 2
    order = np.lexsort((cells[:, 1], cells[:, 0], -d2))
    best = cells[order[0]]
    return float(best[0]), float(best[1])


def _build_attempt(
    rng: np.random.Generator, params: WorldGenParams
) -> tuple[np.ndarray, tuple[float, float], list[CellIndex]]:
    """One heightmap attempt from the current rng state."""
    n = max(8, int(round(params.size_m / params.resolution)))
    floor = _undulation(rng, n, params)
    if params.wall_height > 0:
        carved = _carve_corridors(rng, n, params)
        plateau_noise_amp = min(0.25, params.wall_height)
        noise = rng.uniform(-plateau_noise_amp, plateau_noise_amp, size=(n, n))
        heights = np.where(carved, floor, floor + params.wall_height + noise)
    else:
        carved = np.ones((n, n), dtype=bool)
        heights = floor.copy()
    start_hint = _start_hint(heights, carved, params.resolution)
    _scatter_hazards(rng, heights, carved, params, keep_clear=start_hint)
    mouths = _gain_traps(rng, heights, floor, carved, params, start_hint)
    return heights, start_hint, mouths


def generate_world(
    seed: int,
    params: WorldGenParams,
    robot: RobotModel | None = None,
    terrain_params: TerrainParams | None = None,
) -> TruthWorld:
    """Deterministic truth world for one mission.

    Retries the carve within a seed, then re-seeds deterministically with
    seed+1 (recorded in ``effective_seed``) when the start region cannot
    reach the required traversable area. Raises GenerationFailedError when
    every reseed is exhausted.
    """
    robot = robot or RobotModel()
    terrain_params = terrain_params or TerrainParams()
    for reseed in range(params.max_reseeds + 1):
        effective_seed = seed + reseed
        rng = np.random.default_rng(effective_seed)
        for _ in range(3):
            heights, start_hint, mouths = _build_attempt(rng, params)
            grid = MultiLayerGridMap(
                heights.shape[0], heights.shape[1], params.resolution
            )
            grid.set_known_elevation(heights)
            compute_derived_layers(grid, robot, terrain_params)
            build_collision_cost_layer(grid, robot)
            trav = grid.layer(LAYER_TRAVERSABILITY)
            hint = (int(round(start_hint[0])), int(round(start_hint[1])))
            start = _nearest_traversable(trav, hint)
            if start is None:
                continue
            reachable = _bfs_reachable(trav, start)
            area = float(np.count_nonzero(reachable)) * params.resolution**2
            if area >= params.min_reachable_area:
                return TruthWorld(
                    grid=grid,
                    start=start,
                    seed=seed,
                    effective_seed=effective_seed,
                    friction=params.friction,
                    params=params,
                    trap_mouths=mouths,
                )
    raise GenerationFailedError(
        f"no connected world for seed {seed} after {params.max_reseeds} reseeds"
    )


# ----------------------------------------------------------------------
# World files: heightmap in the grid text format plus a key=value sidecar
# carrying the generator parameters, seed and start cell.


def world_sidecar_path(map_path: str | FilePath) -> FilePath:
    return FilePath(map_path).with_suffix(".params")


def save_world(world: TruthWorld, map_path: str | FilePath) -> None:
    save_map(world.grid, map_path)
    lines = [
        f"seed = {world.seed}",
        f"effective_seed = {world.effective_seed}",
        f"start_row = {world.start.row}",
        f"start_col = {world.start.col}",
        f"friction = {world.friction!r}",
    ]
    for f in fields(WorldGenParams):
        lines.append(f"{f.name} = {getattr(world.params, f.name)!r}")
    world_sidecar_path(map_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_world(
    map_path: str | FilePath,
    robot: RobotModel | None = None,
    terrain_params: TerrainParams | None = None,
) -> TruthWorld:
    """Rebuild a TruthWorld from files; derived layers are recomputed."""
    robot = robot or RobotModel()
    terrain_params = terrain_params or TerrainParams()
    grid = load_map(map_path)
    sidecar = world_sidecar_path(map_path)
    meta: dict[str, str] = {}
    if sidecar.exists():
        for line in sidecar.read_text(encoding="utf-8").splitlines():
            key, _, value = line.partition("=")
            if value:
                meta[key.strip()] = value.strip()
    param_names = {f.name for f in fields(WorldGenParams)}
    param_kwargs = {}
    for name in param_names:
        if name in meta:
            raw = meta[name]
            param_kwargs[name] = (
                int(raw) if name in ("corridor_count", "max_reseeds") else float(raw)
            )
    params = WorldGenParams(**param_kwargs) if param_kwargs else WorldGenParams(
        size_m=grid.cols * grid.resolution, resolution=grid.resolution
    )
    compute_derived_layers(grid, robot, terrain_params)
    build_collision_cost_layer(grid, robot)
    trav = grid.layer(LAYER_TRAVERSABILITY)
    if "start_row" in meta and "start_col" in meta:
        start = CellIndex(int(meta["start_row"]), int(meta["start_col"]))
    else:
        found = _nearest_traversable(trav, (grid.rows // 2, grid.cols // 2))
        if found is None:
            raise GenerationFailedError(f"world {map_path} has no traversable cell")
        start = found
    return TruthWorld(
        grid=grid,
        start=start,
        seed=int(meta.get("seed", 0)),
        effective_seed=int(meta.get("effective_seed", meta.get("seed", 0))),
        friction=float(meta.get("friction", params.friction)),
        params=params,
    )


def preset_params(name: str) -> WorldGenParams:
    try:
        return replace(WORLD_PRESETS[name])
    except KeyError:
        known = ", ".join(sorted(WORLD_PRESETS))
        raise KeyError(f"unknown world preset {name!r} (known: {known})") from None
