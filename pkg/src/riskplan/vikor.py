"""Dynamic criterion weighting and VIKOR compromise ranking.

The decision matrix rows are candidate paths, the columns the four
cost-type criteria (risk, distance, time, energy) -- lower is always
better. Group utility S and individual regret R use min-max normalized
criterion terms; the compromise index Q blends the two, and the final
risk-reward selection trades Q against min-max normalized gain.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import NamedTuple, Sequence

import numpy as np

from .costs import PathCandidate
from .errors import EmptyCandidateSetError, EmptyMatrixError

CRITERIA = ("risk", "distance", "time", "energy")
SECONDS_PER_HOUR = 3600.0


@dataclass
class MissionState:
    """Mission progress snapshot driving the dynamic weights.

    ``t_battery`` is remaining battery life in seconds; the energy weight
    interprets it in hours so a battery with >= 1 h left maps into (0, 1].
    """

    t_elapsed: float
    t_mission: float
    d_traversed: float
    d_max: float
    t_battery: float

    def __post_init__(self) -> None:
        if self.t_elapsed < 0:
            raise ValueError("t_elapsed must be >= 0")
        if self.t_mission <= 0 or self.d_max <= 0 or self.t_battery <= 0:
            raise ValueError("t_mission, d_max and t_battery must be > 0")


class Weights(NamedTuple):
    risk: float
    distance: float
    time: float
    energy: float


def _clamp01(value: float) -> float:
    return min(1.0, max(0.0, value))


def dynamic_weights(state: MissionState) -> Weights:
    """Criterion weights as the mission progresses.

    Time and distance weights are the elapsed/traversed ratios, energy is
    the reciprocal of remaining battery hours, each clamped to [0, 1].
    Risk takes the remainder 1 - mean(other three), which keeps it
    dominant early and never negative.
    """
    w_time = _clamp01(state.t_elapsed / state.t_mission)
    w_distance = _clamp01(state.d_traversed / state.d_max)
    w_energy = _clamp01(SECONDS_PER_HOUR / state.t_battery)
    w_risk = 1.0 - (w_distance + w_time + w_energy) / 3.0
    return Weights(risk=w_risk, distance=w_distance, time=w_time, energy=w_energy)


@dataclass
class VikorResult:
    """Per-alternative S, R, Q plus the compromise pick (lowest Q)."""

    s: np.ndarray
    r: np.ndarray
    q: np.ndarray
    selected: int


def vikor_rank(
    matrix: np.ndarray,
    weights: Sequence[float],
    majority_weight: float = 0.5,
) -> VikorResult:
    """Rank alternatives on cost-type criteria with VIKOR.

    Criterion terms are ``w_j * (f*_j - f_ij) / (f*_j - f-_j)`` with
    ``f* = column min`` and ``f- = column max`` (all criteria minimized);
    S sums them, R takes the worst, and
    ``Q = v * (S - S*) / (S- - S*) + (1 - v) * (R - R*) / (R- - R*)``.
    Any degenerate denominator contributes 0: a criterion that cannot
    discriminate alternatives must not affect the ranking.
    """
    f = np.atleast_2d(np.asarray(matrix, dtype=float))
    if f.size == 0:
        raise EmptyMatrixError("decision matrix has no alternatives")
    if not 0.0 <= majority_weight <= 1.0:
        raise ValueError("majority weight must lie in [0, 1]")
    w = np.asarray(weights, dtype=float)
    if w.shape != (f.shape[1],):
        raise ValueError("one weight per criterion required")

    f_best = f.min(axis=0)
    f_worst = f.max(axis=0)
    denom = f_best - f_worst
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(denom != 0.0, w * (f_best - f) / denom, 0.0)
    s = terms.sum(axis=1)
    r = terms.max(axis=1)

    def _normalize(values: np.ndarray) -> np.ndarray:
        low, high = values.min(), values.max()
        if high == low:
            return np.zeros_like(values)
        return (values - low) / (high - low)

    q = majority_weight * _normalize(s) + (1.0 - majority_weight) * _normalize(r)
    return VikorResult(s=s, r=r, q=q, selected=int(np.argmin(q)))


def gain_scores(gains: Sequence[float]) -> np.ndarray:
    """Min-max normalized gains; all 1 when every gain is equal."""
    g = np.asarray(gains, dtype=float)
    g_min, g_max = g.min(), g.max()
    if g_max == g_min:
        return np.ones_like(g)
    return (g - g_min) / (g_max - g_min)


def select_path(
    candidates: Sequence[PathCandidate],
    weights: Weights,
    majority_weight: float = 0.5,
) -> int:
    """Risk-reward selection: maximize ``Q_gain * (1 - Q)``.

    Q comes from VIKOR over (risk, distance, time, energy); Q_gain is the
    normalized raw gain. Ties break on lowest Q, then lowest index.
    """
    if len(candidates) == 0:
        raise EmptyCandidateSetError("no candidates to select from")
    matrix = np.array(
        [
            [c.risk, c.costs.distance, c.costs.time, c.costs.energy]
            for c in candidates
        ]
    )
    result = vikor_rank(matrix, list(weights), majority_weight)
    q_gain = gain_scores([c.costs.gain for c in candidates])
    scores = q_gain * (1.0 - result.q)
    order = sorted(
        range(len(candidates)),
        key=lambda i: (-scores[i], result.q[i], i),
    )
    return order[0]


def baseline_select(candidates: Sequence[PathCandidate]) -> int:
    """Gain-greedy comparator: argmax raw gain, ties by shortest
    distance, then lowest index."""
    if len(candidates) == 0:
        raise EmptyCandidateSetError("no candidates to select from")
    order = sorted(
        range(len(candidates)),
        key=lambda i: (-candidates[i].costs.gain, candidates[i].costs.distance, i),
    )
    return order[0]


def save_criteria_csv(path: str | FilePath, matrix: np.ndarray) -> None:
    """Write a decision matrix with the criterion-name header row."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(CRITERIA)
        for row in matrix:
            writer.writerow([repr(float(v)) for v in row])


def load_criteria_csv(path: str | FilePath) -> np.ndarray:
    """Read a decision matrix written by :func:`save_criteria_csv`."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if tuple(h.strip() for h in header) != CRITERIA:
            raise ValueError(f"expected header {CRITERIA}, got {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise EmptyMatrixError("criteria CSV contains no alternatives")
    return np.asarray(rows, dtype=float)
