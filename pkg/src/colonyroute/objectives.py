"""Trajectory metrics, arrival-time simulation, window checks, scalarization.

Everything operates on immutable values and is safe to evaluate in parallel.
The geometric metrics accept either a :class:`Trajectory` or a bare ``(n, 2)``
array of ``(col, row)`` points, so leg aggregation can reuse them directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegeneratePath, Disconnected, NonPositiveNorm
from .world import Scenario

# Heading changes above this count as turns: below one 8-connected quantum
# (pi/4) so every real kink registers, large enough to absorb float noise.
DEFAULT_TURN_THRESHOLD = math.pi / 12.0

WAIT_ALLOW = "allow"
WAIT_FORBID = "forbid"

STATUS_MET = "met"
STATUS_MISSED = "missed"
STATUS_UNVISITED = "unvisited"


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Timestamped cell sequence; repeated consecutive points are waits."""

    points: np.ndarray  # (n, 2) int64, columns (col, row)
    arrival_times: np.ndarray  # (n,) float64, non-decreasing, starts at 0
    task_visits: tuple[tuple[int, int], ...] = ()  # (task_id, point index)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.int64).reshape(-1, 2))
        times = np.ascontiguousarray(np.asarray(self.arrival_times, dtype=np.float64).ravel())
        if len(pts) != len(times):
            raise ValueError("points and arrival_times must have equal length")
        pts.setflags(write=False)
        times.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "arrival_times", times)
        object.__setattr__(self, "task_visits", tuple(tuple(v) for v in self.task_visits))

    def __len__(self):
        return len(self.points)


def _points_of(t) -> np.ndarray:
    if isinstance(t, Trajectory):
        return t.points
    return np.asarray(t, dtype=np.int64).reshape(-1, 2)


def _distinct(points: np.ndarray) -> np.ndarray:
    """Drop waiting repeats so metrics see only actual motion."""
    if len(points) < 2:
        return points
    keep = np.ones(len(points), dtype=bool)
    keep[1:] = (np.diff(points, axis=0) != 0).any(axis=1)
    return points[keep]


# ---------------------------------------------------------------------------
# geometric metrics


def path_length(t, resolution: float) -> float:
    """Total Euclidean length in meters; waiting steps contribute zero."""
    d = np.diff(_points_of(t), axis=0)
    if len(d) == 0:
        return 0.0
    return float(resolution * np.hypot(d[:, 0], d[:, 1]).sum())


def heading_changes(t) -> np.ndarray:
    """Absolute turn angle in [0, pi] at each interior motion point.

    Waiting repeats are transparent: vectors are taken between successive
    distinct positions. Fewer than three distinct points yields an empty
    array.
    """
    p = _distinct(_points_of(t))
    if len(p) < 3:
        return np.zeros(0, dtype=np.float64)
    v = np.diff(p, axis=0).astype(np.float64)
    dot = (v[:-1] * v[1:]).sum(axis=1)
    cross = v[:-1, 0] * v[1:, 1] - v[:-1, 1] * v[1:, 0]
    return np.abs(np.arctan2(cross, dot))


def turning_count(t, threshold: float = DEFAULT_TURN_THRESHOLD) -> int:
    """Number of heading changes strictly exceeding ``threshold`` radians."""
    return int((heading_changes(t) > threshold).sum())


def smoothness(t) -> float:
    """Sum of absolute differences of consecutive heading changes (radians)."""
    theta = heading_changes(t)
    if theta.size < 2:
        return 0.0
    return float(np.abs(np.diff(theta)).sum())


def curvature_std(t, resolution: float) -> float:
    """Population standard deviation of discrete path curvature (1/m).

    Curvature at an interior point is its turn angle divided by the mean of
    the two adjacent segment lengths.
    """
    p = _distinct(_points_of(t))
    if len(p) < 3:
        raise DegeneratePath("curvature needs at least 3 distinct points")
    v = np.diff(p, axis=0).astype(np.float64)
    seg = resolution * np.hypot(v[:, 0], v[:, 1])
    theta = heading_changes(p)
    curvature = theta / (0.5 * (seg[:-1] + seg[1:]))
    return float(curvature.std())


# ---------------------------------------------------------------------------
# objective vector and scalarization


@dataclass(frozen=True)
class ObjectiveVector:
    """The four tour objectives plus the curvature-deviation report metric."""

    f1_length: float
    f2_makespan: float
    f3_turns: int
    f4_smoothness: float
    curvature_std: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.f1_length, self.f2_makespan, self.f3_turns, self.f4_smoothness],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class Weights:
    """Convex weights over the four objectives; must sum to 1 within 1e-9."""

    w1: float
    w2: float
    w3: float
    w4: float

    def __post_init__(self):
        vals = (self.w1, self.w2, self.w3, self.w4)
        if any(not 0.0 <= w <= 1.0 for w in vals):
            raise ValueError(f"weights must lie in [0, 1]: {vals}")
        if abs(sum(vals) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1: {vals}")

    @classmethod
    def default(cls) -> "Weights":
        return cls(0.4, 0.3, 0.2, 0.1)

    @classmethod
    def from_sequence(cls, seq: Sequence[float]) -> "Weights":
        return cls(*(float(x) for x in seq))

    def as_array(self) -> np.ndarray:
        return np.array([self.w1, self.w2, self.w3, self.w4], dtype=np.float64)


@dataclass(frozen=True)
class Norms:
    """Per-objective normalization constants bringing f1..f4 to O(1) scale."""

    n1: float
    n2: float
    n3: float
    n4: float

    @classmethod
    def from_sequence(cls, seq: Sequence[float]) -> "Norms":
        return cls(*(float(x) for x in seq))

    def as_array(self) -> np.ndarray:
        return np.array([self.n1, self.n2, self.n3, self.n4], dtype=np.float64)


def default_norms(scenario: Scenario) -> Norms:
    """Scenario-derived defaults: map diagonal (m), diagonal over speed (s),
    a 20-turn baseline, and pi radians."""
    diag = scenario.map.diagonal_m
    return Norms(diag, diag / scenario.speed, 20.0, math.pi)


def scalar_objective(v: ObjectiveVector, w: Weights, norms: Norms) -> float:
    """Weighted sum of normalized objectives: F = sum_k w_k * f_k / norm_k."""
    n = norms.as_array()
    if not np.all(n > 0.0):
        raise NonPositiveNorm(f"norms must be positive: {tuple(n)}")
    return float((w.as_array() * (v.as_array() / n)).sum())


# ---------------------------------------------------------------------------
# timing and feasibility


class TaskOutcome(NamedTuple):
    task_id: int
    arrival: float | None
    status: str  # met | missed | unvisited


@dataclass(frozen=True)
class FeasibilityReport:
    """Per-task visit outcomes and the fraction of tasks met in-window."""

    outcomes: tuple[TaskOutcome, ...]
    completion_fraction: float

    def outcome_for(self, task_id: int) -> TaskOutcome:
        for outcome in self.outcomes:
            if outcome.task_id == task_id:
                return outcome
        raise KeyError(task_id)


def simulate_times(points, scenario: Scenario, wait_policy: str = WAIT_ALLOW) -> Trajectory:
    """Timestamp a cell route through ``scenario`` at its robot speed.

    The route must start at the scenario start and be grid-connected
    (consecutive cells identical or adjacent under the motion rules, all
    free). Under ``wait_policy="allow"``, reaching a task cell before its
    window opens inserts an in-place waiting step until window_start; the
    recorded visit then happens at window_start. ``task_visits`` records the
    first arrival at each task cell along the route.
    """
    if wait_policy not in (WAIT_ALLOW, WAIT_FORBID):
        raise ValueError(f"unknown wait policy {wait_policy!r}")
    grid = scenario.map
    pts = np.asarray(points, dtype=np.int64).reshape(-1, 2)
    if len(pts) == 0:
        raise Disconnected("empty point sequence")
    if (pts[0, 0], pts[0, 1]) != tuple(scenario.start):
        raise Disconnected(
            f"route starts at {tuple(pts[0])}, scenario start is {tuple(scenario.start)}"
        )
    cols, rows = pts[:, 0], pts[:, 1]
    if (
        (cols < 0).any()
        or (cols >= grid.width_cells).any()
        or (rows < 0).any()
        or (rows >= grid.height_cells).any()
    ):
        raise Disconnected("route leaves the map")
    occ = grid.occupancy
    if occ[rows, cols].any():
        raise Disconnected("route enters a blocked cell")
    d = np.diff(pts, axis=0)
    if len(d) and (np.abs(d) > 1).any():
        raise Disconnected("consecutive points are not grid-adjacent")
    diag = (d[:, 0] != 0) & (d[:, 1] != 0)
    if diag.any():
        src = pts[:-1][diag]
        dd = d[diag]
        if (
            occ[src[:, 1], src[:, 0] + dd[:, 0]].any()
            or occ[src[:, 1] + dd[:, 1], src[:, 0]].any()
        ):
            raise Disconnected("diagonal step cuts a blocked corner")

    seg_m = grid.resolution * np.hypot(d[:, 0], d[:, 1]) if len(d) else np.zeros(0)
    base = np.concatenate([[0.0], np.cumsum(seg_m / scenario.speed)])

    # first arrival per task cell, processed in route order
    events = []
    for task in scenario.tasks:
        hits = np.flatnonzero((cols == task.cell.col) & (rows == task.cell.row))
        if hits.size:
            events.append((int(hits[0]), task))
    events.sort(key=lambda e: e[0])

    waits: list[tuple[int, float]] = []
    visits: list[tuple[int, int, bool]] = []
    delay = 0.0
    for idx, task in events:
        arrival = base[idx] + delay
        if wait_policy == WAIT_ALLOW and arrival < task.window_start:
            waits.append((idx, task.window_start - arrival))
            delay += task.window_start - arrival
            visits.append((task.id, idx, True))
        else:
            visits.append((task.id, idx, False))

    if not waits:
        return Trajectory(pts, base, tuple((tid, idx) for tid, idx, _ in visits))

    shift = np.zeros(len(pts))
    for idx, w in waits:
        shift[idx + 1:] += w
    times_main = base + shift
    ins_idx = np.array([i for i, _ in waits], dtype=np.int64)
    ins_t = np.array([base[i] + shift[i] + w for i, w in waits])
    final_pts = np.insert(pts, ins_idx + 1, pts[ins_idx], axis=0)
    final_t = np.insert(times_main, ins_idx + 1, ins_t)
    task_visits = []
    for tid, idx, waited in visits:
        offset = int(np.searchsorted(ins_idx, idx))  # insertions strictly before idx
        task_visits.append((tid, idx + offset + (1 if waited else 0)))
    return Trajectory(final_pts, final_t, tuple(task_visits))


def check_windows(t: Trajectory, tasks) -> FeasibilityReport:
    """Classify every task as met, missed, or unvisited against its window."""
    first_arrival: dict[int, float] = {}
    for tid, idx in t.task_visits:
        if tid not in first_arrival:
            first_arrival[tid] = float(t.arrival_times[idx])
    outcomes = []
    met = 0
    for task in tasks:
        if task.id in first_arrival:
            arrival = first_arrival[task.id]
            ok = task.window_start <= arrival <= task.window_end
            met += ok
            outcomes.append(TaskOutcome(task.id, arrival, STATUS_MET if ok else STATUS_MISSED))
        else:
            outcomes.append(TaskOutcome(task.id, None, STATUS_UNVISITED))
    total = len(outcomes)
    fraction = met / total if total else 1.0
    return FeasibilityReport(tuple(outcomes), fraction)


def evaluate_trajectory(
    t: Trajectory, resolution: float, turn_threshold: float = DEFAULT_TURN_THRESHOLD
) -> ObjectiveVector:
    """All objective metrics of one trajectory.

    Makespan is the latest recorded task visit time; a trajectory visiting no
    task falls back to its final arrival time. Curvature deviation is 0 for
    degenerate (sub-3-point) motion.
    """
    f1 = path_length(t, resolution)
    if t.task_visits:
        f2 = max(float(t.arrival_times[idx]) for _, idx in t.task_visits)
    else:
        f2 = float(t.arrival_times[-1])
    f3 = turning_count(t, turn_threshold)
    f4 = smoothness(t)
    try:
        cstd = curvature_std(t, resolution)
    except DegeneratePath:
        cstd = 0.0
    return ObjectiveVector(f1, f2, f3, f4, cstd)
