"""Occupancy-grid world model: maps, tasks, scenarios, and seeded generators.

Coordinates are ``(col, row)`` with row 0 the top line of the map text; the
occupancy array is indexed ``[row, col]``. Motion is 8-connected with no
corner cutting. All types are immutable once constructed and every operation
here is a pure function, so values can be shared freely across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import (
    BlockedCell,
    DimensionMismatch,
    DuplicateId,
    InsufficientFreeCells,
    InvalidWindow,
    MalformedHeader,
    MalformedScenario,
    Unreachable,
    UnknownCell,
)

SQRT2 = math.sqrt(2.0)

# 8-connected move set, orthogonals first. Order is part of the planner
# tie-breaking contract; do not reorder.
MOVES: tuple[tuple[int, int], ...] = (
    (1, 0), (-1, 0), (0, 1), (0, -1),
    (1, 1), (1, -1), (-1, 1), (-1, -1),
)
MOVE_LENGTHS: tuple[float, ...] = tuple(math.hypot(dc, dr) for dc, dr in MOVES)

FREE_CHAR = "."
BLOCKED_CHAR = "#"


class Cell(NamedTuple):
    """Grid coordinate, column first."""

    col: int
    row: int


@dataclass(frozen=True)
class Task:
    """A service point that must be reached within [window_start, window_end]."""

    id: int
    cell: Cell
    window_start: float
    window_end: float

    def __post_init__(self):
        if not isinstance(self.cell, Cell):
            object.__setattr__(self, "cell", Cell(*self.cell))
        if self.window_start < 0.0 or not self.window_start < self.window_end:
            raise InvalidWindow(
                f"task {self.id}: window [{self.window_start}, {self.window_end}] "
                "must satisfy 0 <= start < end"
            )


@dataclass(frozen=True, eq=False)
class GridMap:
    """Dense occupancy grid with a physical resolution in meters per cell."""

    width_cells: int
    height_cells: int
    resolution: float
    occupancy: np.ndarray  # bool, shape (height, width), True = blocked

    def __post_init__(self):
        if self.width_cells < 1 or self.height_cells < 1:
            raise ValueError("map dimensions must be positive")
        if not (self.resolution > 0.0 and math.isfinite(self.resolution)):
            raise ValueError("resolution must be a positive finite number")
        occ = np.ascontiguousarray(np.asarray(self.occupancy, dtype=bool))
        if occ.shape != (self.height_cells, self.width_cells):
            raise ValueError(
                f"occupancy shape {occ.shape} does not match "
                f"{self.height_cells}x{self.width_cells}"
            )
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)

    def __eq__(self, other):
        if not isinstance(other, GridMap):
            return NotImplemented
        return (
            self.width_cells == other.width_cells
            and self.height_cells == other.height_cells
            and self.resolution == other.resolution
            and np.array_equal(self.occupancy, other.occupancy)
        )

    def in_bounds(self, cell) -> bool:
        col, row = cell
        return 0 <= col < self.width_cells and 0 <= row < self.height_cells

    def is_free(self, cell) -> bool:
        col, row = cell
        return self.in_bounds(cell) and not self.occupancy[row, col]

    @property
    def diagonal_m(self) -> float:
        return self.resolution * math.hypot(self.width_cells, self.height_cells)

    def free_cell_count(self) -> int:
        return int((~self.occupancy).sum())


@dataclass(frozen=True, eq=False)
class Scenario:
    """One planning problem: a map, a start cell, a speed, and timed tasks."""

    map: GridMap
    start: Cell
    speed: float
    tasks: tuple[Task, ...]

    def __post_init__(self):
        if not isinstance(self.start, Cell):
            object.__setattr__(self, "start", Cell(*self.start))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not (self.speed > 0.0 and math.isfinite(self.speed)):
            raise ValueError("speed must be a positive finite number")

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.map == other.map
            and self.start == other.start
            and self.speed == other.speed
            and self.tasks == other.tasks
        )

    def task_by_id(self, task_id: int) -> Task:
        for task in self.tasks:
            if task.id == task_id:
                return task
        raise KeyError(task_id)


# ---------------------------------------------------------------------------
# map text format


def load_map(text: str) -> GridMap:
    """Parse the ASCII map format.

    First line is ``map <width> <height> <resolution>``, followed by exactly
    ``height`` lines of ``width`` characters each, ``#`` blocked and ``.``
    free; row 0 is the top row.
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()  # tolerate one trailing newline
    if not lines:
        raise MalformedHeader("empty map text")
    parts = lines[0].split(" ")
    if len(parts) != 4 or parts[0] != "map":
        raise MalformedHeader(f"bad header line: {lines[0]!r}")
    try:
        width, height = int(parts[1]), int(parts[2])
        resolution = float(parts[3])
    except ValueError as exc:
        raise MalformedHeader(f"bad header line: {lines[0]!r}") from exc
    if width < 1 or height < 1 or not (resolution > 0.0 and math.isfinite(resolution)):
        raise MalformedHeader(f"bad header values: {lines[0]!r}")

    rows = lines[1:]
    if len(rows) != height:
        raise DimensionMismatch(f"expected {height} rows, got {len(rows)}")
    occupancy = np.zeros((height, width), dtype=bool)
    for r, line in enumerate(rows):
        if len(line) != width:
            raise DimensionMismatch(f"row {r} has length {len(line)}, expected {width}")
        bad = set(line) - {FREE_CHAR, BLOCKED_CHAR}
        if bad:
            raise UnknownCell(f"row {r} contains unknown characters {sorted(bad)!r}")
        occupancy[r] = np.frombuffer(line.encode("ascii"), dtype=np.uint8) == ord(BLOCKED_CHAR)
    return GridMap(width, height, resolution, occupancy)


def save_map(grid: GridMap) -> str:
    """Render a map to its canonical text; ``load_map`` inverts this exactly."""
    header = f"map {grid.width_cells} {grid.height_cells} {grid.resolution!r}"
    glyphs = np.where(grid.occupancy, BLOCKED_CHAR, FREE_CHAR)
    body = "\n".join("".join(row) for row in glyphs)
    return header + "\n" + body + "\n"


# ---------------------------------------------------------------------------
# connectivity


def _shifted(mask: np.ndarray, dc: int, dr: int) -> np.ndarray:
    """mask value at (col+dc, row+dr), False outside the grid."""
    h, w = mask.shape
    out = np.zeros_like(mask)
    src_r = slice(max(dr, 0), h + min(dr, 0))
    src_c = slice(max(dc, 0), w + min(dc, 0))
    dst_r = slice(max(-dr, 0), h + min(-dr, 0))
    dst_c = slice(max(-dc, 0), w + min(-dc, 0))
    out[dst_r, dst_c] = mask[src_r, src_c]
    return out


def _move_masks(grid: GridMap) -> list[np.ndarray]:
    """Per move direction: True where leaving that cell via the move is legal."""
    free = ~grid.occupancy
    masks = []
    for dc, dr in MOVES:
        ok = free & _shifted(free, dc, dr)
        if dc != 0 and dr != 0:  # no corner cutting
            ok &= _shifted(free, dc, 0) & _shifted(free, 0, dr)
        masks.append(ok)
    return masks


def neighbors(grid: GridMap, cell) -> list[tuple[Cell, float]]:
    """8-connected free neighbors of ``cell`` with physical step lengths.

    Diagonal moves are forbidden whenever either orthogonally adjacent cell
    of the diagonal is blocked. A blocked or out-of-bounds input yields [].
    """
    if not grid.is_free(cell):
        return []
    col, row = cell
    out = []
    for (dc, dr), unit in zip(MOVES, MOVE_LENGTHS):
        nxt = Cell(col + dc, row + dr)
        if not grid.is_free(nxt):
            continue
        if dc != 0 and dr != 0:
            if not (grid.is_free(Cell(col + dc, row)) and grid.is_free(Cell(col, row + dr))):
                continue
        out.append((nxt, unit * grid.resolution))
    return out


def reachable_mask(grid: GridMap, start) -> np.ndarray:
    """Boolean grid of cells reachable from ``start`` under the motion rules."""
    if not grid.is_free(start):
        return np.zeros_like(grid.occupancy)
    masks = _move_masks(grid)
    reach = np.zeros_like(grid.occupancy)
    reach[start[1], start[0]] = True
    frontier = reach.copy()
    while frontier.any():
        grown = np.zeros_like(reach)
        for (dc, dr), ok in zip(MOVES, masks):
            grown |= _shifted(frontier & ok, -dc, -dr)
        frontier = grown & ~reach
        reach |= frontier
    return reach


def _largest_component(grid: GridMap) -> np.ndarray:
    """Mask of the largest mutually reachable free region (first wins ties)."""
    remaining = ~grid.occupancy.copy()
    best = np.zeros_like(remaining)
    best_size = 0
    while remaining.any():
        r, c = np.argwhere(remaining)[0]
        comp = reachable_mask(grid, Cell(int(c), int(r)))
        size = int(comp.sum())
        if size > best_size:
            best, best_size = comp, size
        remaining &= ~comp
    return best


# ---------------------------------------------------------------------------
# scenario JSON format


def validate_scenario(scenario: Scenario) -> None:
    """Check every scenario invariant, including flood-fill reachability."""
    grid = scenario.map
    if len(scenario.tasks) < 1:
        raise MalformedScenario("scenario must contain at least one task")
    if not grid.in_bounds(scenario.start):
        raise BlockedCell(f"start {tuple(scenario.start)} out of bounds")
    if not grid.is_free(scenario.start):
        raise BlockedCell(f"start {tuple(scenario.start)} lies on an obstacle")
    ids = [t.id for t in scenario.tasks]
    if len(set(ids)) != len(ids):
        raise DuplicateId(f"task ids are not distinct: {ids}")
    cells = [scenario.start] + [t.cell for t in scenario.tasks]
    if len(set(cells)) != len(cells):
        raise DuplicateId("start and task cells must be pairwise distinct")
    for task in scenario.tasks:
        if not grid.in_bounds(task.cell):
            raise BlockedCell(f"task {task.id} cell {tuple(task.cell)} out of bounds")
        if not grid.is_free(task.cell):
            raise BlockedCell(f"task {task.id} cell {tuple(task.cell)} lies on an obstacle")
    reach = reachable_mask(grid, scenario.start)
    for task in scenario.tasks:
        if not reach[task.cell.row, task.cell.col]:
            raise Unreachable(task.id)


def load_scenario(text: str, *, map_base: Path | str | None = None) -> Scenario:
    """Parse and fully validate a scenario JSON document.

    The ``map`` field holds either inline map text (recognized by its
    ``map `` header) or a file path, resolved against ``map_base`` when given.
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedScenario(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedScenario("scenario document must be a JSON object")
    try:
        map_field = obj["map"]
        start_field = obj["start"]
        speed = float(obj["speed_mps"])
        task_fields = obj["tasks"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedScenario(f"missing or malformed scenario key: {exc}") from exc

    if not isinstance(map_field, str):
        raise MalformedScenario("map field must be inline map text or a file path")
    if map_field.startswith("map "):
        map_text = map_field
    else:
        path = Path(map_field)
        if map_base is not None and not path.is_absolute():
            path = Path(map_base) / path
        map_text = path.read_text()
    grid = load_map(map_text)

    try:
        start = Cell(int(start_field[0]), int(start_field[1]))
        tasks = tuple(
            Task(
                id=int(t["id"]),
                cell=Cell(int(t["cell"][0]), int(t["cell"][1])),
                window_start=float(t["window"][0]),
                window_end=float(t["window"][1]),
            )
            for t in task_fields
        )
    except InvalidWindow:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise MalformedScenario(f"malformed start/tasks: {exc}") from exc

    scenario = Scenario(grid, start, speed, tasks)
    validate_scenario(scenario)
    return scenario


def save_scenario(scenario: Scenario) -> str:
    """Render a scenario to canonical JSON with the map inlined."""
    obj = {
        "map": save_map(scenario.map),
        "start": [scenario.start.col, scenario.start.row],
        "speed_mps": scenario.speed,
        "tasks": [
            {
                "id": t.id,
                "cell": [t.cell.col, t.cell.row],
                "window": [t.window_start, t.window_end],
            }
            for t in scenario.tasks
        ],
    }
    return json.dumps(obj, indent=2) + "\n"


# ---------------------------------------------------------------------------
# seeded generators


def generate_map(
    seed: int,
    width: int = 200,
    height: int = 200,
    resolution: float = 0.1,
    density: float = 0.15,
    min_side: int = 2,
    max_side: int = 10,
) -> GridMap:
    """Seeded warehouse-style map: random rectangular shelf obstacles.

    Rectangles of ``min_side``..``max_side`` cells per side are stamped until
    the blocked fraction reaches ``density``. Deterministic per seed.
    """
    if not 0.0 <= density < 1.0:
        raise ValueError("density must lie in [0, 1)")
    rng = np.random.Generator(np.random.PCG64(seed))
    occ = np.zeros((height, width), dtype=bool)
    target = int(round(density * width * height))
    attempts = 0
    max_attempts = 200 * max(target, 1)
    while int(occ.sum()) < target and attempts < max_attempts:
        attempts += 1
        w = int(rng.integers(min_side, max_side + 1))
        h = int(rng.integers(min_side, max_side + 1))
        if w > width or h > height:
            continue
        c0 = int(rng.integers(0, width - w + 1))
        r0 = int(rng.integers(0, height - h + 1))
        occ[r0:r0 + h, c0:c0 + w] = True
    return GridMap(width, height, resolution, occ)


def generate_scenario(
    seed: int,
    grid: GridMap,
    n_tasks: int,
    window_lo: float = 5.0,
    window_hi: float = 30.0,
    speed: float = 1.0,
) -> Scenario:
    """Seeded scenario on ``grid``: start plus ``n_tasks`` timed task points.

    Cells are drawn without replacement from the largest mutually reachable
    free region. Each window is drawn as t_start uniform in
    [window_lo, window_hi - 1] and t_end uniform in (t_start, window_hi].
    Bit-identical for a given argument tuple.
    """
    if n_tasks < 1:
        raise ValueError("n_tasks must be at least 1")
    if window_lo < 0.0 or window_hi < window_lo + 1.0:
        raise InvalidWindow(f"window bounds [{window_lo}, {window_hi}] need hi >= lo + 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    component = _largest_component(grid)
    flat = np.flatnonzero(component.ravel())
    if flat.size < n_tasks + 1:
        raise InsufficientFreeCells(
            f"need {n_tasks + 1} mutually reachable free cells, largest region has {flat.size}"
        )
    picks = flat[rng.choice(flat.size, size=n_tasks + 1, replace=False)]
    cells = [Cell(int(i % grid.width_cells), int(i // grid.width_cells)) for i in picks]
    start, task_cells = cells[0], cells[1:]
    tasks = []
    for k, cell in enumerate(task_cells, start=1):
        t_start = float(rng.uniform(window_lo, window_hi - 1.0))
        t_end = float(rng.uniform(t_start, window_hi))
        while not t_end > t_start:  # uniform() may return its lower bound
            t_end = float(rng.uniform(t_start, window_hi))
        tasks.append(Task(k, cell, t_start, t_end))
    return Scenario(grid, start, speed, tuple(tasks))
