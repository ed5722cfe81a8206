"""Fixed-resolution 2D grid with named per-cell layers and unknown-cell tracking.

Conventions: rows map to the y axis and columns to the x axis. The grid
origin is the world coordinate of cell (0, 0)'s lower corner, so cell
(r, c) covers the half-open square
``[origin + (c, r) * res, origin + (c + 1, r + 1) * res)`` and its center
sits at ``origin + (c + 0.5, r + 0.5) * res``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path as FilePath
from typing import Iterator, NamedTuple

import numpy as np

from .errors import NoSuchLayerError, OutOfBoundsError

# Layer names used throughout the pipeline.
LAYER_ELEVATION = "elevation"
LAYER_H_MIN = "h_min"
LAYER_H_MAX = "h_max"
LAYER_VARIANCE = "variance"
LAYER_SMOOTHED = "smoothed"
LAYER_SLOPE = "slope"
LAYER_ROUGHNESS = "roughness"
LAYER_TRAVERSABILITY = "traversability"
LAYER_COLLISION = "collision_cost"
LAYER_NORMAL = "normal"

UNKNOWN_TOKEN = "?"


class CellIndex(NamedTuple):
    row: int
    col: int


@dataclass
class Pose:
    """Planar robot pose: 3D position in meters plus heading in radians.

    The heading is normalized into [-pi, pi] on construction.
    """

    position: np.ndarray
    heading: float = 0.0

    def __post_init__(self) -> None:
        self.position = np.asarray(self.position, dtype=float)
        if self.position.shape != (3,):
            raise ValueError("position must be a 3-vector")
        if not np.all(np.isfinite(self.position)):
            raise ValueError("position must be finite")
        self.heading = wrap_angle(float(self.heading))

    @property
    def xy(self) -> np.ndarray:
        return self.position[:2]


@dataclass
class Path:
    """Ordered waypoint sequence; N segments need N + 1 waypoints."""

    waypoints: list[Pose] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.waypoints) < 1:
            raise ValueError("a path needs at least one waypoint")

    def __len__(self) -> int:
        return len(self.waypoints)

    def __iter__(self) -> Iterator[Pose]:
        return iter(self.waypoints)

    def segments(self) -> Iterator[tuple[Pose, Pose]]:
        return zip(self.waypoints[:-1], self.waypoints[1:])

    def reversed(self) -> "Path":
        return Path(list(reversed(self.waypoints)))


def wrap_angle(angle: float) -> float:
    """Wrap an angle to [-pi, pi]."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    # math.remainder returns values in [-pi, pi]; pin the open edge.
    if wrapped == -math.pi:
        wrapped = math.pi
    return wrapped


class MultiLayerGridMap:
    """2D grid of cells carrying elevation estimates and derived layers.

    Scalar layers are float arrays of shape (rows, cols); cells whose value
    is undefined hold NaN. ``known_mask`` tracks which cells have received
    at least one elevation observation; derived-layer computations skip
    unknown cells. Maps are single-writer: concurrent readers are fine,
    callers serialize mutation.
    """

    def __init__(
        self,
        rows: int,
        cols: int,
        resolution: float,
        origin: tuple[float, float] = (0.0, 0.0),
    ) -> None:
        if rows < 1 or cols < 1:
            raise ValueError("grid must have at least one cell")
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.rows = int(rows)
        self.cols = int(cols)
        self.resolution = float(resolution)
        self.origin = np.asarray(origin, dtype=float)
        self.known_mask = np.zeros((rows, cols), dtype=bool)
        self.layers: dict[str, np.ndarray] = {}
        for name in (LAYER_ELEVATION, LAYER_H_MIN, LAYER_H_MAX, LAYER_VARIANCE):
            self.layers[name] = np.full((rows, cols), np.nan)

    # ------------------------------------------------------------------
    # Coordinate transforms

    def world_to_cell(self, point) -> CellIndex:
        """Return the cell whose area contains `point` (x, y in meters).

        The fractional index is always rounded toward the lower index
        (floor), so cells are half-open along each axis.
        """
        p = np.asarray(point, dtype=float)
        col = math.floor((p[0] - self.origin[0]) / self.resolution)
        row = math.floor((p[1] - self.origin[1]) / self.resolution)
        if not self.in_bounds(row, col):
            raise OutOfBoundsError(f"point {tuple(p[:2])} outside grid extent")
        return CellIndex(row, col)

    def cell_center(self, index: CellIndex) -> np.ndarray:
        """World (x, y) of the cell center."""
        row, col = index
        return self.origin + (np.array([col, row], dtype=float) + 0.5) * self.resolution

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.rows and 0 <= col < self.cols

    # ------------------------------------------------------------------
    # Layer access

    def add_layer(self, name: str, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        expected = (self.rows, self.cols)
        if values.shape != expected and values.shape != (*expected, 3):
            raise ValueError(f"layer {name!r} shape {values.shape} != {expected}")
        self.layers[name] = values

    def layer(self, name: str) -> np.ndarray:
        try:
            return self.layers[name]
        except KeyError:
            raise NoSuchLayerError(f"no layer named {name!r}") from None

    def get_layer_value(self, name: str, index: CellIndex) -> float | None:
        """Stored value at `index`, or None when the cell is unknown.

        Cells with False ``known_mask`` and cells whose layer value is NaN
        (e.g. slope with no known axis neighbor) both report unknown.
        """
        values = self.layer(name)
        row, col = index
        if not self.in_bounds(row, col):
            raise OutOfBoundsError(f"cell {index} outside grid")
        if not self.known_mask[row, col]:
            return None
        value = float(values[row, col])
        return None if math.isnan(value) else value

    def neighborhood(self, index: CellIndex, radius: float) -> list[CellIndex]:
        """In-bounds cells whose centers lie within `radius` meters of the
        query cell center, including the query cell itself."""
        if radius < 0:
            raise ValueError("radius must be >= 0")
        row, col = index
        reach = int(math.floor(radius / self.resolution + 1e-12))
        limit = (radius / self.resolution) ** 2 + 1e-12
        cells = []
        for dr in range(-reach, reach + 1):
            for dc in range(-reach, reach + 1):
                if dr * dr + dc * dc > limit:
                    continue
                r, c = row + dr, col + dc
                if self.in_bounds(r, c):
                    cells.append(CellIndex(r, c))
        return cells

    # ------------------------------------------------------------------
    # Bulk elevation helpers

    def set_known_elevation(self, heights: np.ndarray, variance: float = 1e-6) -> None:
        """Mark every cell known with the given truth heights (no fusion)."""
        heights = np.asarray(heights, dtype=float)
        if heights.shape != (self.rows, self.cols):
            raise ValueError("heights shape mismatch")
        self.layers[LAYER_ELEVATION] = heights.copy()
        self.layers[LAYER_H_MIN] = heights.copy()
        self.layers[LAYER_H_MAX] = heights.copy()
        self.layers[LAYER_VARIANCE] = np.full_like(heights, variance)
        self.known_mask[:] = True

    def copy_empty(self) -> "MultiLayerGridMap":
        """A fresh all-unknown map with identical geometry."""
        return MultiLayerGridMap(
            self.rows, self.cols, self.resolution, tuple(self.origin)
        )


# ----------------------------------------------------------------------
# Text map format
#
# Header lines `key value`, then one line per grid row (row 0 first) of
# comma-separated elevation values; `?` marks unknown cells:
#
#     resolution 0.5
#     origin_x 0.0
#     origin_y 0.0
#     rows 2
#     cols 3
#     0.0,0.25,?
#     1.0,?,2.0


def save_map(grid: MultiLayerGridMap, path: str | FilePath) -> None:
    """Write elevation and unknown-cell markers in the text map format."""
    elevation = grid.layer(LAYER_ELEVATION)
    lines = [
        f"resolution {grid.resolution!r}",
        f"origin_x {float(grid.origin[0])!r}",
        f"origin_y {float(grid.origin[1])!r}",
        f"rows {grid.rows}",
        f"cols {grid.cols}",
    ]
    for r in range(grid.rows):
        tokens = []
        for c in range(grid.cols):
            if grid.known_mask[r, c]:
                tokens.append(repr(float(elevation[r, c])))
            else:
                tokens.append(UNKNOWN_TOKEN)
        lines.append(",".join(tokens))
    FilePath(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_map(path: str | FilePath) -> MultiLayerGridMap:
    """Read a text map file written by :func:`save_map`."""
    lines = FilePath(path).read_text(encoding="utf-8").splitlines()
    header: dict[str, str] = {}
    for line in lines[:5]:
        key, _, value = line.partition(" ")
        header[key.strip()] = value.strip()
    try:
        resolution = float(header["resolution"])
        origin = (float(header["origin_x"]), float(header["origin_y"]))
        rows = int(header["rows"])
        cols = int(header["cols"])
    except KeyError as missing:
        raise ValueError(f"map file missing header field {missing}") from None
    grid = MultiLayerGridMap(rows, cols, resolution, origin)
    data = lines[5 : 5 + rows]
    if len(data) != rows:
        raise ValueError(f"expected {rows} data rows, found {len(data)}")
    elevation = grid.layer(LAYER_ELEVATION)
    for r, line in enumerate(data):
        tokens = line.split(",")
        if len(tokens) != cols:
            raise ValueError(f"row {r}: expected {cols} values, found {len(tokens)}")
        for c, token in enumerate(tokens):
            token = token.strip()
            if token == UNKNOWN_TOKEN:
                continue
            elevation[r, c] = float(token)
            grid.known_mask[r, c] = True
    known = grid.known_mask
    grid.layers[LAYER_H_MIN][known] = elevation[known]
    grid.layers[LAYER_H_MAX][known] = elevation[known]
    grid.layers[LAYER_VARIANCE][known] = 1e-6
    return grid
