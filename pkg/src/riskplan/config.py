"""Flat key=value configuration files.

One key per line, ``key = value``, ``#`` starts a comment. Robot, terrain
and mission keys are bare; world-generator keys carry a ``world_`` prefix
(see KEY_REFERENCE). CLI flags override file values. The robot's maximum
slope is configured in degrees (``max_slope_deg``) for readability.
"""

from __future__ import annotations

import math
from dataclasses import fields, replace
from pathlib import Path as FilePath

from .robot import RobotModel
from .sim import SimConfig
from .terrain import TerrainParams
from .worldgen import WorldGenParams

ROBOT_KEYS = {
    "mass": float,
    "wheel_thickness": float,
    "wheel_contact_length": float,
    "wheel_count": int,
    "max_slope_deg": float,
    "max_speed": float,
    "footprint_dim": float,
    "friction": float,
    "gravity": float,
}

TERRAIN_KEYS = {
    "smoothing_radius": float,
    "roughness_cap": float,
    "confidence_k": float,
    "roughness_limit": float,
}

SIM_KEYS = {
    "sensor_range": float,
    "sensor_height": float,
    "planning_period": int,
    "max_candidates": int,
    "frontier_cluster_radius": float,
    "duration": int,
    "column_height": float,
    "battery_time_s": float,
    "d_max": float,
    "obs_variance": float,
    "majority_weight": float,
}

WORLD_KEYS = {
    f"world_{f.name}": (int if f.name in ("corridor_count", "max_reseeds") else float)
    for f in fields(WorldGenParams)
}

KEY_REFERENCE = {**ROBOT_KEYS, **TERRAIN_KEYS, **SIM_KEYS, **WORLD_KEYS}


def load_config(path: str | FilePath) -> dict[str, str]:
    """Raw key -> value strings from a config file; unknown keys rejected."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(
        FilePath(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key = key.strip()
        if key not in KEY_REFERENCE:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def _typed(values: dict[str, str], keys: dict[str, type]) -> dict:
    out = {}
    for key, caster in keys.items():
        if key in values:
            out[key] = caster(values[key])
    return out


def build_robot(values: dict[str, str]) -> RobotModel:
    kwargs = _typed(values, ROBOT_KEYS)
    if "max_slope_deg" in kwargs:
        kwargs["max_slope"] = math.radians(kwargs.pop("max_slope_deg"))
    return RobotModel(**kwargs)


def build_terrain(values: dict[str, str]) -> TerrainParams:
    return TerrainParams(**_typed(values, TERRAIN_KEYS))


def build_world_params(values: dict[str, str], base: WorldGenParams) -> WorldGenParams:
    kwargs = {
        key.removeprefix("world_"): value
        for key, value in _typed(values, WORLD_KEYS).items()
    }
    return replace(base, **kwargs) if kwargs else base


def build_sim_config(
    values: dict[str, str], world: WorldGenParams
) -> SimConfig:
    kwargs = _typed(values, SIM_KEYS)
    return SimConfig(
        terrain=build_terrain(values),
        world=build_world_params(values, world),
        **kwargs,
    )


def default_config_text() -> str:
    """A commented config file with every key at its default value."""
    robot = RobotModel()
    terrain = TerrainParams()
    sim = SimConfig()
    world = WorldGenParams()
    lines = ["# riskplan configuration (defaults)", "", "# robot"]
    for key in ROBOT_KEYS:
        if key == "max_slope_deg":
            lines.append(f"{key} = {math.degrees(robot.max_slope):g}")
        else:
            lines.append(f"{key} = {getattr(robot, key)}")
    lines.append("")
    lines.append("# terrain analysis")
    lines.extend(f"{key} = {getattr(terrain, key)}" for key in TERRAIN_KEYS)
    lines.append("")
    lines.append("# mission / sensor")
    lines.extend(f"{key} = {getattr(sim, key)}" for key in SIM_KEYS)
    lines.append("")
    lines.append("# world generator")
    lines.extend(
        f"{key} = {getattr(world, key.removeprefix('world_'))}" for key in WORLD_KEYS
    )
    return "\n".join(lines) + "\n"
