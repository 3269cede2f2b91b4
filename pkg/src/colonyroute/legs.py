"""Collision-free point-to-point grid legs and the task-graph leg matrix.

Tour planners never touch the grid directly: geometry between the start and
every task pair is precomputed here once, and tours are built by
concatenating legs. Two engines produce identical-cost legs: a pure A*
reference (``astar``) with documented tie-breaking, and a vectorized
Dijkstra over a heading-expanded lattice (scipy) that builds the whole
matrix at benchmark scale.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from heapq import heappop, heappush
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _sparse_dijkstra

from .errors import NoPath
from .objectives import DEFAULT_TURN_THRESHOLD, path_length, smoothness, turning_count
from .world import MOVES, MOVE_LENGTHS, Cell, GridMap, Scenario, _move_masks, save_scenario

# Per-turn leg cost is this fraction of one cell: enough to break staircase
# ties toward straight runs, small enough to keep legs near length-optimal.
DEFAULT_TURN_WEIGHT_FACTOR = 0.3

_NO_PRED = -9999  # scipy predecessor sentinel


def default_turn_weight(grid: GridMap) -> float:
    return DEFAULT_TURN_WEIGHT_FACTOR * grid.resolution


def _turn_cost_table(turn_weight: float, threshold: float) -> np.ndarray:
    """8x8 cost of switching from incoming move i to outgoing move j."""
    table = np.zeros((len(MOVES), len(MOVES)))
    for i, (ac, ar) in enumerate(MOVES):
        for j, (bc, br) in enumerate(MOVES):
            angle = abs(math.atan2(ac * br - ar * bc, ac * bc + ar * br))
            if angle > threshold:
                table[i, j] = turn_weight
    return table


# ---------------------------------------------------------------------------
# reference A*


def astar(
    grid: GridMap,
    start,
    goal,
    turn_weight: float = 0.0,
    *,
    turn_threshold: float = DEFAULT_TURN_THRESHOLD,
) -> list[Cell]:
    """Minimal-cost grid path from ``start`` to ``goal``.

    Cost is the sum of Euclidean step lengths plus ``turn_weight`` per
    heading change above ``turn_threshold``. With ``turn_weight == 0`` the
    result is length-optimal. The Euclidean heuristic ignores turn costs and
    stays admissible. Ties break on lower f, then lower h, then smaller
    (col, row), then move index, which makes results reproducible.

    Args:
        grid: occupancy map.
        start, goal: free cells.
        turn_weight: cost in meters added per counted heading change.
        turn_threshold: radians above which a heading change counts.

    Returns:
        The cell path including both endpoints (a single cell if equal).

    Raises:
        NoPath: endpoints blocked or mutually unreachable.
    """
    start, goal = Cell(*start), Cell(*goal)
    if not (grid.is_free(start) and grid.is_free(goal)):
        raise NoPath(f"endpoint blocked or out of bounds: {tuple(start)} -> {tuple(goal)}")
    if start == goal:
        return [start]

    res = grid.resolution
    occ = grid.occupancy
    width, height = grid.width_cells, grid.height_cells
    heading_aware = turn_weight > 0.0
    turn_cost = _turn_cost_table(turn_weight, turn_threshold) if heading_aware else None

    def remaining(col: int, row: int) -> float:
        return res * math.hypot(col - goal.col, row - goal.row)

    start_state = (start.col, start.row, -1)
    g = {start_state: 0.0}
    parent: dict[tuple[int, int, int], tuple[int, int, int]] = {}
    h0 = remaining(start.col, start.row)
    heap = [(h0, h0, start.col, start.row, -1)]
    closed: set[tuple[int, int, int]] = set()

    while heap:
        _, _, col, row, hidx = heappop(heap)
        state = (col, row, hidx)
        if state in closed:
            continue
        closed.add(state)
        if col == goal.col and row == goal.row:
            cells = [Cell(col, row)]
            while state in parent:
                state = parent[state]
                cells.append(Cell(state[0], state[1]))
            cells.reverse()
            return cells
        g_here = g[state]
        for midx, (dc, dr) in enumerate(MOVES):
            ncol, nrow = col + dc, row + dr
            if not (0 <= ncol < width and 0 <= nrow < height) or occ[nrow, ncol]:
                continue
            if dc != 0 and dr != 0 and (occ[row, col + dc] or occ[row + dr, col]):
                continue
            step = res * MOVE_LENGTHS[midx]
            if heading_aware and hidx >= 0:
                step += turn_cost[hidx, midx]
            nstate = (ncol, nrow, midx if heading_aware else -1)
            ng = g_here + step
            if ng < g.get(nstate, math.inf):
                g[nstate] = ng
                parent[nstate] = state
                nh = remaining(ncol, nrow)
                heappush(heap, (ng + nh, nh, ncol, nrow, nstate[2]))
    raise NoPath(f"no route from {tuple(start)} to {tuple(goal)}")


# ---------------------------------------------------------------------------
# vectorized Dijkstra engine


class _LatticeGraph:
    """CSR graph over the grid, heading-expanded when turns are priced."""

    def __init__(self, grid: GridMap, turn_weight: float, turn_threshold: float):
        self.grid = grid
        self.turn_weight = turn_weight
        self.heading_aware = turn_weight > 0.0
        width, height = grid.width_cells, grid.height_cells
        n_cells = width * height
        flat = np.arange(n_cells, dtype=np.int64).reshape(height, width)
        masks = _move_masks(grid)
        srcs, dsts, costs = [], [], []
        turn_cost = _turn_cost_table(turn_weight, turn_threshold)
        for midx, (dc, dr) in enumerate(MOVES):
            cells = flat[masks[midx]]
            if cells.size == 0:
                continue
            step = grid.resolution * MOVE_LENGTHS[midx]
            targets = cells + dr * width + dc
            if not self.heading_aware:
                srcs.append(cells)
                dsts.append(targets)
                costs.append(np.full(cells.size, step))
            else:
                for hidx in range(len(MOVES)):
                    srcs.append(cells * 8 + hidx)
                    dsts.append(targets * 8 + midx)
                    costs.append(np.full(cells.size, step + turn_cost[hidx, midx]))
        n_nodes = n_cells * (8 if self.heading_aware else 1)
        if srcs:
            src = np.concatenate(srcs)
            dst = np.concatenate(dsts)
            w = np.concatenate(costs)
        else:
            src = dst = np.zeros(0, dtype=np.int64)
            w = np.zeros(0)
        self.matrix = csr_matrix((w, (src, dst)), shape=(n_nodes, n_nodes))
        self._width = width

    def _cell_flat(self, cell: Cell) -> int:
        return cell.row * self._width + cell.col

    def shortest_paths(self, source: Cell, targets: list[Cell]) -> list[list[Cell]]:
        """One Dijkstra sweep from ``source``; decoded paths to each target."""
        if self.heading_aware:
            # all 8 headings seeded at zero cost: the first move pays no turn
            indices = np.array([self._cell_flat(source) * 8 + h for h in range(8)])
        else:
            indices = np.array([self._cell_flat(source)])
        dist, pred, _ = _sparse_dijkstra(
            self.matrix,
            directed=True,
            indices=indices,
            min_only=True,
            return_predecessors=True,
        )
        out = []
        for target in targets:
            base = self._cell_flat(target)
            if self.heading_aware:
                nodes = np.arange(base * 8, base * 8 + 8)
                best = int(nodes[np.argmin(dist[nodes])])
            else:
                best = base
            if not np.isfinite(dist[best]):
                raise NoPath(f"no route from {tuple(source)} to {tuple(target)}")
            chain = [best]
            while pred[chain[-1]] != _NO_PRED:
                chain.append(int(pred[chain[-1]]))
            chain.reverse()
            cells = []
            for node in chain:
                cflat = node // 8 if self.heading_aware else node
                cells.append(Cell(int(cflat % self._width), int(cflat // self._width)))
            out.append(cells)
        return out


# ---------------------------------------------------------------------------
# leg matrix


@dataclass(frozen=True, eq=False)
class Leg:
    """One precomputed collision-free path between two task-graph nodes."""

    from_node: int
    to_node: int
    cells: np.ndarray  # (k, 2) int64
    length: float  # meters
    turns: int  # heading changes above the threshold
    smooth: float  # radians

    def __post_init__(self):
        cells = np.ascontiguousarray(np.asarray(self.cells, dtype=np.int64).reshape(-1, 2))
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)


@dataclass(frozen=True, eq=False)
class LegMatrix:
    """Dense all-pairs leg table over nodes 0 (start) and 1..n (tasks)."""

    n_nodes: int
    node_cells: tuple[Cell, ...]
    task_ids: tuple[int, ...]
    legs: tuple[tuple[Leg | None, ...], ...]
    length: np.ndarray  # (n_nodes, n_nodes) meters, zero diagonal
    turns: np.ndarray  # (n_nodes, n_nodes) int64
    smooth: np.ndarray  # (n_nodes, n_nodes) radians
    turn_weight: float
    turn_threshold: float

    def leg(self, i: int, j: int) -> Leg:
        entry = self.legs[i][j]
        if entry is None:
            raise KeyError(f"no leg on the diagonal: ({i}, {j})")
        return entry

    def node_of_task(self, task_id: int) -> int:
        return self.task_ids.index(task_id) + 1


def _make_leg(
    i: int, j: int, cells: list[Cell], resolution: float, turn_threshold: float
) -> Leg:
    arr = np.array(cells, dtype=np.int64).reshape(-1, 2)
    return Leg(
        from_node=i,
        to_node=j,
        cells=arr,
        length=path_length(arr, resolution),
        turns=turning_count(arr, turn_threshold),
        smooth=smoothness(arr),
    )


def scenario_content_hash(
    scenario: Scenario, turn_weight: float, turn_threshold: float
) -> str:
    payload = save_scenario(scenario) + repr((turn_weight, turn_threshold))
    return hashlib.sha256(payload.encode()).hexdigest()


def build_leg_matrix(
    scenario: Scenario,
    turn_weight: float | None = None,
    *,
    turn_threshold: float = DEFAULT_TURN_THRESHOLD,
    engine: str = "dijkstra",
    cache_path: str | Path | None = None,
) -> LegMatrix:
    """Compute (or load from cache) every start/task point-to-point leg.

    Both engines minimize the same cost (step lengths plus ``turn_weight``
    per counted turn); "dijkstra" runs one vectorized sweep per node,
    "astar" runs the reference search per pair. Each leg's aggregates are
    recomputed with the trajectory metrics, and every leg is checked
    collision-free. A cache file, when given, must match the scenario
    content hash or it is ignored and rewritten.
    """
    if turn_weight is None:
        turn_weight = default_turn_weight(scenario.map)
    if engine not in ("dijkstra", "astar"):
        raise ValueError(f"unknown engine {engine!r}")
    key = scenario_content_hash(scenario, turn_weight, turn_threshold)
    if cache_path is not None:
        cached = _load_cache(Path(cache_path), key, scenario, turn_weight, turn_threshold)
        if cached is not None:
            return cached

    grid = scenario.map
    node_cells = [scenario.start] + [t.cell for t in scenario.tasks]
    n = len(node_cells)
    table: list[list[Leg | None]] = [[None] * n for _ in range(n)]

    if engine == "astar":
        for i, src in enumerate(node_cells):
            for j, dst in enumerate(node_cells):
                if i == j:
                    continue
                cells = astar(grid, src, dst, turn_weight, turn_threshold=turn_threshold)
                table[i][j] = _make_leg(i, j, cells, grid.resolution, turn_threshold)
    else:
        graph = _LatticeGraph(grid, turn_weight, turn_threshold)
        for i, src in enumerate(node_cells):
            targets = [c for j, c in enumerate(node_cells) if j != i]
            paths = graph.shortest_paths(src, targets)
            k = 0
            for j in range(n):
                if j == i:
                    continue
                table[i][j] = _make_leg(i, j, paths[k], grid.resolution, turn_threshold)
                k += 1

    occ = grid.occupancy
    for row in table:
        for leg in row:
            if leg is None:
                continue
            if occ[leg.cells[:, 1], leg.cells[:, 0]].any():
                raise NoPath(f"internal error: leg {leg.from_node}->{leg.to_node} hits an obstacle")

    length = np.zeros((n, n))
    turns = np.zeros((n, n), dtype=np.int64)
    smooth = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                length[i, j] = table[i][j].length
                turns[i, j] = table[i][j].turns
                smooth[i, j] = table[i][j].smooth
    matrix = LegMatrix(
        n_nodes=n,
        node_cells=tuple(node_cells),
        task_ids=tuple(t.id for t in scenario.tasks),
        legs=tuple(tuple(row) for row in table),
        length=length,
        turns=turns,
        smooth=smooth,
        turn_weight=turn_weight,
        turn_threshold=turn_threshold,
    )
    if cache_path is not None:
        _save_cache(Path(cache_path), key, matrix)
    return matrix


def _save_cache(path: Path, key: str, matrix: LegMatrix) -> None:
    obj = {
        "format": 1,
        "key": key,
        "turn_weight": matrix.turn_weight,
        "turn_threshold": matrix.turn_threshold,
        "task_ids": list(matrix.task_ids),
        "node_cells": [[c.col, c.row] for c in matrix.node_cells],
        "paths": {
            f"{i},{j}": matrix.legs[i][j].cells.tolist()
            for i in range(matrix.n_nodes)
            for j in range(matrix.n_nodes)
            if i != j
        },
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj) + "\n")


def _load_cache(
    path: Path, key: str, scenario: Scenario, turn_weight: float, turn_threshold: float
) -> LegMatrix | None:
    if not path.exists():
        return None
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError:
        return None
    if obj.get("format") != 1 or obj.get("key") != key:
        return None
    node_cells = [Cell(int(c), int(r)) for c, r in obj["node_cells"]]
    n = len(node_cells)
    res = scenario.map.resolution
    table: list[list[Leg | None]] = [[None] * n for _ in range(n)]
    for spec, cells in obj["paths"].items():
        i, j = (int(x) for x in spec.split(","))
        table[i][j] = _make_leg(i, j, [Cell(int(c), int(r)) for c, r in cells], res, turn_threshold)
    length = np.zeros((n, n))
    turns = np.zeros((n, n), dtype=np.int64)
    smooth = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                length[i, j] = table[i][j].length
                turns[i, j] = table[i][j].turns
                smooth[i, j] = table[i][j].smooth
    return LegMatrix(
        n_nodes=n,
        node_cells=tuple(node_cells),
        task_ids=tuple(int(t) for t in obj["task_ids"]),
        legs=tuple(tuple(row) for row in table),
        length=length,
        turns=turns,
        smooth=smooth,
        turn_weight=float(obj["turn_weight"]),
        turn_threshold=float(obj["turn_threshold"]),
    )
