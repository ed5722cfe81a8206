"""Batch experiment runner: N seeded missions per (world, mode), mission
CSVs on disk, and an aggregate report with the coverage / perceived-risk /
overhead statistics.

Mission CSVs are bit-deterministic; wall-clock planning times live in
per-mission ``*_timing.csv`` sidecars. The aggregate report is a pure
function of the files on disk.
"""

from __future__ import annotations

import csv
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path as FilePath
from typing import Sequence

import numpy as np

from .errors import InvalidSpecError
from .robot import RobotModel
from .sim import (
    MODES,
    MissionLog,
    SimConfig,
    read_mission_csv,
    read_timing_csv,
    run_mission,
)
from .worldgen import TruthWorld, generate_world, load_world, preset_params

_MISSION_FILE_RE = re.compile(r"^(?P<world>.+)_seed(?P<seed>\d+)_(?P<mode>[a-z_]+)\.csv$")


@dataclass
class ExperimentSpec:
    """One batch experiment: every (seed, mode) pair is run once."""

    world: str
    seeds: tuple[int, ...]
    duration: int
    modes: tuple[str, ...]
    out_dir: FilePath
    robot: RobotModel = field(default_factory=RobotModel)
    sim: SimConfig = field(default_factory=SimConfig)
    workers: int = 1

    def __post_init__(self) -> None:
        self.out_dir = FilePath(self.out_dir)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.modes = tuple(self.modes)
        if not self.seeds:
            raise InvalidSpecError("at least one seed required")
        if self.duration <= 0:
            raise InvalidSpecError("duration must be positive")
        if not self.modes or any(m not in MODES for m in self.modes):
            raise InvalidSpecError(f"modes must be a nonempty subset of {MODES}")
        if self.workers < 1:
            raise InvalidSpecError("workers must be >= 1")


def world_label(world: str) -> str:
    """Filename-safe label for a preset name or world-file path."""
    return FilePath(world).stem.replace("_seed", "-seed")


def mission_filename(world: str, seed: int, mode: str) -> str:
    return f"{world_label(world)}_seed{seed:04d}_{mode}.csv"


def timing_filename(world: str, seed: int, mode: str) -> str:
    return f"{world_label(world)}_seed{seed:04d}_{mode}_timing.csv"


def _build_world(spec: ExperimentSpec, seed: int) -> TruthWorld:
    candidate = FilePath(spec.world)
    if candidate.suffix == ".map" or candidate.exists():
        return load_world(candidate, spec.robot, spec.sim.terrain)
    params = preset_params(spec.world)
    return generate_world(seed, params, spec.robot, spec.sim.terrain)


def _run_one(spec: ExperimentSpec, seed: int, mode: str) -> tuple[FilePath, FilePath]:
    """Run a single mission and write its CSV pair; returns the paths."""
    config = replace(spec.sim, duration=spec.duration)
    world = _build_world(spec, seed)
    log = run_mission(world, spec.robot, config, mode, seed=seed)
    mission_path = spec.out_dir / mission_filename(spec.world, seed, mode)
    timing_path = spec.out_dir / timing_filename(spec.world, seed, mode)
    log.write_csv(mission_path)
    log.write_timing_csv(timing_path)
    return mission_path, timing_path


def run_experiment(spec: ExperimentSpec) -> "AggregateReport":
    """Execute every (seed, mode) pair, write mission CSVs plus the report.

    Reruns into the same output directory overwrite deterministically.
    Worlds are generated once per seed semantics: both modes of a seed see
    the identical world because generation is a pure function of
    (seed, params).
    """
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(seed, mode) for seed in spec.seeds for mode in spec.modes]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [pool.submit(_run_one, spec, seed, mode) for seed, mode in jobs]
            mission_paths = [f.result()[0] for f in futures]
    else:
        mission_paths = [_run_one(spec, seed, mode)[0] for seed, mode in jobs]

    report = aggregate(mission_paths)
    write_report(report, spec.out_dir)
    return report


# ----------------------------------------------------------------------
# Aggregation


@dataclass
class ModeStats:
    mode: str
    runs: int
    mean_final_coverage: float
    variance_final_coverage: float
    single_run: bool
    mean_perceived_risk: float
    max_perceived_risk: float
    outlier_threshold: float
    outlier_count: int
    outliers: list[tuple[int, int, float]]  # (seed, t_s, risk_total)
    lethal_runs: int
    mean_plan_ms: float | None


@dataclass
class AggregateReport:
    """Per-mode statistics plus the risk-aware vs baseline coverage change."""

    stats: dict[str, ModeStats]
    percent_coverage_change: float | None


def _parse_mission_path(path: FilePath) -> tuple[str, int, str]:
    match = _MISSION_FILE_RE.match(path.name)
    if match is None or path.name.endswith("_timing.csv"):
        raise InvalidSpecError(f"not a mission CSV name: {path.name}")
    return match.group("world"), int(match.group("seed")), match.group("mode")


def discover_mission_logs(directory: str | FilePath) -> list[FilePath]:
    """Mission CSVs in a directory (timing sidecars and reports excluded)."""
    directory = FilePath(directory)
    found = []
    for path in sorted(directory.glob("*.csv")):
        if path.name.endswith("_timing.csv"):
            continue
        if _MISSION_FILE_RE.match(path.name):
            found.append(path)
    return found


def aggregate(mission_paths: Sequence[str | FilePath]) -> AggregateReport:
    """Statistics over mission logs, computed from the files alone."""
    if not mission_paths:
        raise InvalidSpecError("no mission logs to aggregate")
    by_mode: dict[str, list[tuple[int, MissionLog, list[tuple[int, float]]]]] = {}
    for raw_path in mission_paths:
        path = FilePath(raw_path)
        _, seed, mode = _parse_mission_path(path)
        log = read_mission_csv(path)
        timing_path = path.with_name(path.name[:-4] + "_timing.csv")
        timings = read_timing_csv(timing_path) if timing_path.exists() else []
        by_mode.setdefault(mode, []).append((seed, log, timings))

    stats: dict[str, ModeStats] = {}
    for mode, runs in sorted(by_mode.items()):
        finals = np.array([log.final_coverage for _, log, _ in runs])
        samples = np.concatenate([log.risk_samples() for _, log, _ in runs])
        q1, q3 = np.percentile(samples, [25.0, 75.0])
        threshold = q3 + 1.5 * (q3 - q1)
        outliers = [
            (seed, record.t_s, record.risk_total)
            for seed, log, _ in runs
            for record in log.records
            if record.risk_total > threshold
        ]
        plan_values = [ms for _, _, timings in runs for _, ms in timings]
        stats[mode] = ModeStats(
            mode=mode,
            runs=len(runs),
            mean_final_coverage=float(finals.mean()),
            variance_final_coverage=float(finals.var()),
            single_run=len(runs) == 1,
            mean_perceived_risk=float(samples.mean()),
            max_perceived_risk=float(samples.max()),
            outlier_threshold=float(threshold),
            outlier_count=len(outliers),
            outliers=outliers,
            lethal_runs=sum(1 for _, log, _ in runs if log.lethal),
            mean_plan_ms=float(np.mean(plan_values)) if plan_values else None,
        )

    percent = None
    if "risk_aware" in stats and "baseline" in stats:
        base = stats["baseline"].mean_final_coverage
        if base > 0:
            percent = 100.0 * (stats["risk_aware"].mean_final_coverage - base) / base
    return AggregateReport(stats=stats, percent_coverage_change=percent)


# ----------------------------------------------------------------------
# Report files


def write_report(report: AggregateReport, out_dir: str | FilePath) -> None:
    """report.csv + outliers.csv + report.txt in the output directory."""
    out_dir = FilePath(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with open(out_dir / "report.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["mode", "metric", "value"])
        for mode, s in sorted(report.stats.items()):
            writer.writerow([mode, "runs", s.runs])
            writer.writerow([mode, "mean_final_coverage_m3", f"{s.mean_final_coverage:.6f}"])
            writer.writerow(
                [mode, "variance_final_coverage", f"{s.variance_final_coverage:.6f}"]
            )
            writer.writerow([mode, "single_run_variance_flag", int(s.single_run)])
            writer.writerow([mode, "mean_perceived_risk", f"{s.mean_perceived_risk:.6f}"])
            writer.writerow([mode, "max_perceived_risk", f"{s.max_perceived_risk:.6f}"])
            writer.writerow([mode, "risk_outlier_threshold", f"{s.outlier_threshold:.6f}"])
            writer.writerow([mode, "risk_outlier_count", s.outlier_count])
            writer.writerow([mode, "lethal_runs", s.lethal_runs])
            if s.mean_plan_ms is not None:
                writer.writerow([mode, "mean_plan_ms", f"{s.mean_plan_ms:.3f}"])
        if report.percent_coverage_change is not None:
            writer.writerow(
                ["", "percent_coverage_change", f"{report.percent_coverage_change:.6f}"]
            )

    with open(out_dir / "outliers.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["mode", "seed", "t_s", "risk_total"])
        for mode, s in sorted(report.stats.items()):
            for seed, t_s, risk in s.outliers:
                writer.writerow([mode, seed, t_s, f"{risk:.6f}"])

    (out_dir / "report.txt").write_text(format_report(report), encoding="utf-8")


def format_report(report: AggregateReport) -> str:
    lines = ["Experiment report", "================="]
    for mode, s in sorted(report.stats.items()):
        lines.append("")
        lines.append(f"[{mode}] {s.runs} run(s)")
        variance_note = " (single run)" if s.single_run else ""
        lines.append(
            f"  final coverage: mean {s.mean_final_coverage:.1f} m^3, "
            f"variance {s.variance_final_coverage:.1f}{variance_note}"
        )
        lines.append(
            f"  perceived risk: mean {s.mean_perceived_risk:.4f}, "
            f"max {s.max_perceived_risk:.4f}, "
            f"{s.outlier_count} outlier(s) above {s.outlier_threshold:.4f}"
        )
        lines.append(f"  lethal actions: {s.lethal_runs} run(s)")
        if s.mean_plan_ms is not None:
            lines.append(f"  planning time: {s.mean_plan_ms:.2f} ms/iteration")
    if report.percent_coverage_change is not None:
        lines.append("")
        lines.append(
            "coverage change risk_aware vs baseline: "
            f"{report.percent_coverage_change:+.2f}%"
        )
    return "\n".join(lines) + "\n"
