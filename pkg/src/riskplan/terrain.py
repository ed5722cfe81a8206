"""Derived terrain layers: fused elevation, smoothing, roughness, normals,
slope, and binary traversability.

All layer computations are pure functions of the elevation layer and the
known mask; unknown cells stay unknown (NaN) in every derived layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid_map import (
    LAYER_ELEVATION,
    LAYER_H_MAX,
    LAYER_H_MIN,
    LAYER_NORMAL,
    LAYER_ROUGHNESS,
    LAYER_SLOPE,
    LAYER_SMOOTHED,
    LAYER_TRAVERSABILITY,
    LAYER_VARIANCE,
    CellIndex,
    MultiLayerGridMap,
)
from .robot import RobotModel

ROUGHNESS_CAP = 0.1


@dataclass
class ElevationObservation:
    """One height measurement of a single cell."""

    cell: CellIndex
    height: float
    variance: float

    def __post_init__(self) -> None:
        if self.variance <= 0:
            raise ValueError("observation variance must be > 0")


@dataclass
class TerrainParams:
    """Knobs for the derived-layer pipeline.

    smoothing_radius: meters; must be at least the map resolution.
    roughness_cap: upper bound applied to roughness values.
    confidence_k: half-width multiplier for the h_min/h_max bounds.
    roughness_limit: cells at or above this roughness are untraversable.
    """

    smoothing_radius: float = 1.5
    roughness_cap: float = ROUGHNESS_CAP
    confidence_k: float = 2.0
    roughness_limit: float = 0.09

    def __post_init__(self) -> None:
        if self.roughness_cap <= 0:
            raise ValueError("roughness_cap must be > 0")
        if self.smoothing_radius <= 0:
            raise ValueError("smoothing_radius must be > 0")


def fuse_elevation(
    grid: MultiLayerGridMap,
    obs: ElevationObservation,
    confidence_k: float = 2.0,
) -> None:
    """Fuse one observation into the cell's height estimate.

    First observation is adopted as-is; later ones combine by inverse
    variance: the fused height is the variance-weighted mean and the fused
    variance the harmonic combination, so variance never increases.
    Confidence bounds are symmetric: h +/- k * sigma.
    """
    row, col = obs.cell
    elev = grid.layers[LAYER_ELEVATION]
    var = grid.layers[LAYER_VARIANCE]
    if grid.known_mask[row, col]:
        inv = 1.0 / var[row, col] + 1.0 / obs.variance
        fused = (elev[row, col] / var[row, col] + obs.height / obs.variance) / inv
        elev[row, col] = fused
        var[row, col] = 1.0 / inv
    else:
        elev[row, col] = obs.height
        var[row, col] = obs.variance
        grid.known_mask[row, col] = True
    half_width = confidence_k * math.sqrt(var[row, col])
    grid.layers[LAYER_H_MIN][row, col] = elev[row, col] - half_width
    grid.layers[LAYER_H_MAX][row, col] = elev[row, col] + half_width


def fuse_elevation_batch(
    grid: MultiLayerGridMap,
    rows: np.ndarray,
    cols: np.ndarray,
    heights: np.ndarray,
    variance: float,
    confidence_k: float = 2.0,
) -> None:
    """Vectorized fusion of one observation per listed cell."""
    elev = grid.layers[LAYER_ELEVATION]
    var = grid.layers[LAYER_VARIANCE]
    known = grid.known_mask[rows, cols]

    old_h = elev[rows, cols]
    old_v = var[rows, cols]
    inv = np.where(known, 1.0 / old_v + 1.0 / variance, 1.0 / variance)
    fused_h = np.where(
        known,
        (old_h / old_v + heights / variance) / inv,
        heights,
    )
    fused_v = 1.0 / inv
    elev[rows, cols] = fused_h
    var[rows, cols] = fused_v
    half = confidence_k * np.sqrt(fused_v)
    grid.layers[LAYER_H_MIN][rows, cols] = fused_h - half
    grid.layers[LAYER_H_MAX][rows, cols] = fused_h + half
    grid.known_mask[rows, cols] = True


def _disk_kernel(radius_m: float, resolution: float) -> np.ndarray:
    """Boolean kernel of cell offsets within `radius_m` of the center cell."""
    reach = int(math.floor(radius_m / resolution + 1e-12))
    limit = (radius_m / resolution) ** 2 + 1e-12
    offsets = np.arange(-reach, reach + 1)
    dr2 = offsets[:, None] ** 2 + offsets[None, :] ** 2
    return dr2 <= limit


def smooth_elevation(grid: MultiLayerGridMap, params: TerrainParams) -> np.ndarray:
    """Mean of known elevations within the smoothing radius of each cell.

    Unknown cells stay NaN. The neighborhood always contains the cell
    itself, so every known cell gets a value.
    """
    kernel = _disk_kernel(params.smoothing_radius, grid.resolution).astype(float)
    known = grid.known_mask.astype(float)
    elev = np.where(grid.known_mask, grid.layers[LAYER_ELEVATION], 0.0)
    total = ndimage.correlate(elev, kernel, mode="constant", cval=0.0)
    count = ndimage.correlate(known, kernel, mode="constant", cval=0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        smoothed = np.where(grid.known_mask & (count > 0), total / count, np.nan)
    grid.add_layer(LAYER_SMOOTHED, smoothed)
    return smoothed


def compute_roughness(grid: MultiLayerGridMap, params: TerrainParams) -> np.ndarray:
    """Roughness = |elevation - smoothed| capped at the roughness cap."""
    smoothed = grid.layer(LAYER_SMOOTHED)
    diff = np.abs(grid.layers[LAYER_ELEVATION] - smoothed)
    roughness = np.where(grid.known_mask, np.minimum(diff, params.roughness_cap), np.nan)
    grid.add_layer(LAYER_ROUGHNESS, roughness)
    return roughness


def _axis_gradient(elev: np.ndarray, axis: int, resolution: float) -> np.ndarray:
    """Per-cell elevation gradient along one axis.

    Central differences where both neighbors are known, one-sided where a
    single neighbor is known, NaN where neither is (elevation NaN marks
    unknown cells).
    """
    minus = np.full_like(elev, np.nan)
    plus = np.full_like(elev, np.nan)
    if axis == 0:
        minus[1:, :] = elev[:-1, :]
        plus[:-1, :] = elev[1:, :]
    else:
        minus[:, 1:] = elev[:, :-1]
        plus[:, :-1] = elev[:, 1:]
    has_minus = np.isfinite(minus)
    has_plus = np.isfinite(plus)
    grad = np.full_like(elev, np.nan)
    central = has_minus & has_plus
    grad[central] = (plus[central] - minus[central]) / (2.0 * resolution)
    fwd = has_plus & ~has_minus
    grad[fwd] = (plus[fwd] - elev[fwd]) / resolution
    bwd = has_minus & ~has_plus
    grad[bwd] = (elev[bwd] - minus[bwd]) / resolution
    grad[~np.isfinite(elev)] = np.nan
    return grad


def compute_normals_and_slope(
    grid: MultiLayerGridMap,
) -> tuple[np.ndarray, np.ndarray]:
    """Surface normals and slope from finite differences of elevation.

    The local plane normal is ``normalize((-dh/dx, -dh/dy, 1))`` and the
    slope is ``arccos(n_z)``, which is exact on sampled planes. Cells with
    no known neighbor along either axis get NaN slope.
    """
    elev = np.where(grid.known_mask, grid.layers[LAYER_ELEVATION], np.nan)
    gx = _axis_gradient(elev, axis=1, resolution=grid.resolution)
    gy = _axis_gradient(elev, axis=0, resolution=grid.resolution)
    valid = np.isfinite(gx) & np.isfinite(gy)

    norm = np.sqrt(gx**2 + gy**2 + 1.0)
    normal = np.full((grid.rows, grid.cols, 3), np.nan)
    with np.errstate(invalid="ignore"):
        normal[..., 0] = np.where(valid, -gx / norm, np.nan)
        normal[..., 1] = np.where(valid, -gy / norm, np.nan)
        normal[..., 2] = np.where(valid, 1.0 / norm, np.nan)
        slope = np.where(valid, np.arccos(np.clip(1.0 / norm, -1.0, 1.0)), np.nan)
    grid.add_layer(LAYER_NORMAL, normal)
    grid.add_layer(LAYER_SLOPE, slope)
    return normal, slope


def classify_traversability(
    grid: MultiLayerGridMap,
    robot: RobotModel,
    params: TerrainParams,
) -> np.ndarray:
    """Binary traversability layer.

    A cell is traversable (1) only when it is known and its slope and
    roughness are both defined and below the robot's limits. Unknown
    cells are untraversable (0) for planning purposes.
    """
    slope = grid.layer(LAYER_SLOPE)
    roughness = grid.layer(LAYER_ROUGHNESS)
    with np.errstate(invalid="ignore"):
        ok = (
            grid.known_mask
            & np.isfinite(slope)
            & np.isfinite(roughness)
            & (slope <= robot.max_slope)
            & (roughness < params.roughness_limit)
        )
    trav = ok.astype(float)
    grid.add_layer(LAYER_TRAVERSABILITY, trav)
    return trav


def compute_derived_layers(
    grid: MultiLayerGridMap,
    robot: RobotModel,
    params: TerrainParams,
) -> None:
    """Run the full derived-layer pipeline (smoothed through traversability)."""
    smooth_elevation(grid, params)
    compute_roughness(grid, params)
    compute_normals_and_slope(grid)
    classify_traversability(grid, robot, params)
