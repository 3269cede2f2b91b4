"""Ant colony tour planner over the task graph with time-window filtering.

Ants sequence task nodes (node 0 is the start, node k >= 1 the k-th task);
grid geometry comes from the precomputed leg matrix and the final trajectory
is leg concatenation timed through the simulator. Candidate tasks whose
window would already be closed on arrival are filtered out of the choice set
at every step. Exponent naming follows the transition rule used here:
``beta`` weights pheromone and ``gamma`` weights the heuristic.

Edge desirability combines leg length and turn count:

    eta_ij = (1 / d_ij) * 1 / (1 + alpha * turns_ij)

and selection probabilities are proportional to ``tau^beta * eta^gamma``
over the allowed set. After each generation every ant deposits pheromone on
its tour edges, the iteration best deposits once more (elitist), and the
matrix is clamped to [tau_min, tau_max] after evaporation by (1 - rho).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import EmptyAllowedSet
from .legs import LegMatrix, build_leg_matrix
from .objectives import (
    WAIT_ALLOW,
    WAIT_FORBID,
    FeasibilityReport,
    Norms,
    ObjectiveVector,
    Trajectory,
    Weights,
    check_windows,
    default_norms,
    evaluate_trajectory,
    scalar_objective,
    simulate_times,
)
from .world import Scenario

# Deposits stay positive and finite even for empty or zero-cost tours.
_COMPLETION_FLOOR = 0.05
_F_FLOOR = 1e-12


@dataclass(frozen=True)
class AcoParams:
    """All colony knobs. Defaults are artifact choices, not published values.

    ``tau_min``/``tau_max`` default to 0.01x and 100x ``tau0``; the clamp
    prevents premature lock-in on small task graphs.
    """

    n_ants: int = 30
    n_iterations: int = 1000
    tau0: float = 1.0
    rho: float = 0.1
    alpha: float = 0.5  # turn-penalty weight inside eta
    beta: float = 1.0  # pheromone exponent
    gamma: float = 2.0  # heuristic exponent
    q_deposit: float = 1.0
    weights: Weights = field(default_factory=Weights.default)
    seed: int = 0
    tau_min: float | None = None
    tau_max: float | None = None
    elitist: bool = True
    wait_policy: str = WAIT_ALLOW

    def __post_init__(self):
        if self.n_ants < 1 or self.n_iterations < 1:
            raise ValueError("n_ants and n_iterations must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if self.tau0 <= 0.0 or self.q_deposit <= 0.0:
            raise ValueError("tau0 and q_deposit must be positive")
        if self.alpha < 0.0 or self.beta < 0.0 or self.gamma < 0.0:
            raise ValueError("alpha, beta, gamma must be non-negative")
        if self.wait_policy not in (WAIT_ALLOW, WAIT_FORBID):
            raise ValueError(f"unknown wait policy {self.wait_policy!r}")
        if self.tau_min is None:
            object.__setattr__(self, "tau_min", 0.01 * self.tau0)
        if self.tau_max is None:
            object.__setattr__(self, "tau_max", 100.0 * self.tau0)
        if not 0.0 < self.tau_min <= self.tau0 <= self.tau_max:
            raise ValueError("need 0 < tau_min <= tau0 <= tau_max")

    @classmethod
    def from_dict(cls, obj: dict) -> "AcoParams":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown AcoParams keys: {sorted(unknown)}")
        kwargs = dict(obj)
        if "weights" in kwargs and not isinstance(kwargs["weights"], Weights):
            kwargs["weights"] = Weights.from_sequence(kwargs["weights"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "n_ants": self.n_ants,
            "n_iterations": self.n_iterations,
            "tau0": self.tau0,
            "rho": self.rho,
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "q_deposit": self.q_deposit,
            "weights": [self.weights.w1, self.weights.w2, self.weights.w3, self.weights.w4],
            "seed": self.seed,
            "tau_min": self.tau_min,
            "tau_max": self.tau_max,
            "elitist": self.elitist,
            "wait_policy": self.wait_policy,
        }


class TourState(NamedTuple):
    """Where an ant stands: current node, clock time, visited task nodes."""

    node: int
    time: float
    visited: frozenset[int]


@dataclass(frozen=True, eq=False)
class AntSolution:
    """One constructed tour and everything needed to rank it."""

    visit_order: tuple[int, ...]  # task ids in visit order
    trajectory: Trajectory
    objectives: ObjectiveVector
    F: float
    feasibility: FeasibilityReport
    complete: bool


class TraceRow(NamedTuple):
    iteration: int
    best_F: float
    best_length_m: float
    best_completion: float


ConvergenceTrace = list[TraceRow]


def init_pheromone(n_nodes: int, params: AcoParams) -> np.ndarray:
    return np.full((n_nodes, n_nodes), params.tau0, dtype=np.float64)


def heuristic(legs: LegMatrix, i: int, j: int, alpha: float) -> float:
    """Edge desirability from leg length and turn count."""
    if i == j:
        raise ValueError("heuristic is undefined on the diagonal")
    return (1.0 / legs.length[i, j]) * (1.0 / (1.0 + alpha * legs.turns[i, j]))


def heuristic_matrix(legs: LegMatrix, alpha: float) -> np.ndarray:
    """Dense eta table; the unused diagonal is zero."""
    n = legs.n_nodes
    eta = np.zeros((n, n))
    off = ~np.eye(n, dtype=bool)
    eta[off] = (1.0 / legs.length[off]) * (1.0 / (1.0 + alpha * legs.turns[off]))
    return eta


def allowed_set(
    state: TourState,
    scenario: Scenario,
    legs: LegMatrix,
    wait_policy: str = WAIT_ALLOW,
) -> frozenset[int]:
    """Unvisited task nodes still reachable inside their windows.

    A candidate survives when driving the leg from the current node arrives
    no later than its window end. Under ``wait_policy="allow"`` an early
    arrival is admissible (the robot waits); under ``"forbid"`` early
    arrivals are excluded too, since they can never produce an in-window
    visit.
    """
    out = set()
    for node in range(1, legs.n_nodes):
        if node in state.visited:
            continue
        task = scenario.tasks[node - 1]
        arrival = state.time + legs.length[state.node, node] / scenario.speed
        if arrival > task.window_end:
            continue
        if wait_policy == WAIT_FORBID and arrival < task.window_start:
            continue
        out.add(node)
    return frozenset(out)


def transition_probabilities(
    tau_values, eta_values, beta: float, gamma: float
) -> np.ndarray:
    """Selection distribution proportional to tau^beta * eta^gamma.

    Values are max-rescaled before exponentiation so extreme magnitudes
    neither overflow nor underflow; the result is therefore invariant under
    uniform scaling of the pheromone values.
    """
    tau = np.asarray(tau_values, dtype=np.float64)
    eta = np.asarray(eta_values, dtype=np.float64)
    if tau.size == 0:
        raise EmptyAllowedSet("no candidate nodes to choose from")
    if tau.shape != eta.shape:
        raise ValueError("tau and eta value arrays must align")
    if not (np.all(tau > 0.0) and np.all(eta > 0.0)):
        raise ValueError("tau and eta values must be positive")
    w = (tau / tau.max()) ** beta * (eta / eta.max()) ** gamma
    return w / w.sum()


def _pick_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(idx, len(probs) - 1)


def _sample_order(
    scenario: Scenario,
    legs: LegMatrix,
    tau: np.ndarray,
    eta: np.ndarray,
    params: AcoParams,
    rng: np.random.Generator,
) -> tuple[int, ...]:
    """Walk one ant through the task graph; returns visited node indices."""
    n_tasks = legs.n_nodes - 1
    window_start = np.array([t.window_start for t in scenario.tasks])
    window_end = np.array([t.window_end for t in scenario.tasks])
    speed = scenario.speed
    allow = params.wait_policy == WAIT_ALLOW
    unvisited = np.ones(n_tasks, dtype=bool)
    node = 0
    now = 0.0
    order: list[int] = []
    for _ in range(n_tasks):
        arrival = now + legs.length[node, 1:] / speed
        feasible = unvisited & (arrival <= window_end)
        if not allow:
            feasible &= arrival >= window_start
        candidates = np.flatnonzero(feasible)
        if candidates.size == 0:
            break
        nodes = candidates + 1
        probs = transition_probabilities(
            tau[node, nodes], eta[node, nodes], params.beta, params.gamma
        )
        nxt = int(nodes[_pick_index(probs, rng)])
        t_arr = arrival[nxt - 1]
        now = max(t_arr, window_start[nxt - 1]) if allow else t_arr
        unvisited[nxt - 1] = False
        node = nxt
        order.append(nxt)
    return tuple(order)


def concatenate_legs(legs: LegMatrix, node_order: Sequence[int]) -> np.ndarray:
    """Cell route along node 0 -> node_order, junction points deduplicated."""
    start = legs.node_cells[0]
    parts = [np.array([[start.col, start.row]], dtype=np.int64)]
    node = 0
    for nxt in node_order:
        parts.append(legs.leg(node, nxt).cells[1:])
        node = nxt
    return np.concatenate(parts, axis=0)


class TourEvaluator:
    """Shared decode pipeline: node order -> legs -> timing -> objectives.

    All planners (colony, greedy, GA, exhaustive) rank tours through this one
    object, so comparisons are never distorted by planner-specific geometry.
    Evaluation is pure, and summary statistics are memoized per order.
    """

    def __init__(
        self,
        scenario: Scenario,
        legs: LegMatrix,
        weights: Weights,
        norms: Norms | None = None,
        wait_policy: str = WAIT_ALLOW,
    ):
        self.scenario = scenario
        self.legs = legs
        self.weights = weights
        self.norms = norms if norms is not None else default_norms(scenario)
        self.wait_policy = wait_policy
        self._stats: dict[tuple[int, ...], tuple[float, float, float]] = {}

    def solution(self, node_order: Sequence[int]) -> AntSolution:
        """Full decode of one tour, including its trajectory."""
        node_order = tuple(node_order)
        points = concatenate_legs(self.legs, node_order)
        trajectory = simulate_times(points, self.scenario, self.wait_policy)
        vector = evaluate_trajectory(
            trajectory, self.scenario.map.resolution, self.legs.turn_threshold
        )
        report = check_windows(trajectory, self.scenario.tasks)
        f_value = scalar_objective(vector, self.weights, self.norms)
        visit_ids = tuple(self.legs.task_ids[node - 1] for node in node_order)
        return AntSolution(
            visit_order=visit_ids,
            trajectory=trajectory,
            objectives=vector,
            F=f_value,
            feasibility=report,
            complete=report.completion_fraction == 1.0,
        )

    def stats(self, node_order: Sequence[int]) -> tuple[float, float, float]:
        """(completion_fraction, F, length_m) of a tour, memoized."""
        key = tuple(node_order)
        got = self._stats.get(key)
        if got is None:
            sol = self.solution(key)
            got = (sol.feasibility.completion_fraction, sol.F, sol.objectives.f1_length)
            self._stats[key] = got
        return got


def rank_key(completion: float, f_value: float) -> tuple[float, float]:
    """Lexicographic solution ranking: completion first, then scalar F."""
    return (-completion, f_value)


def evaluate_order(
    scenario: Scenario,
    legs: LegMatrix,
    order: Sequence[int],
    weights: Weights,
    norms: Norms | None = None,
    wait_policy: str = WAIT_ALLOW,
) -> AntSolution:
    """Decode a tour given as task ids through the shared pipeline."""
    nodes = [legs.node_of_task(tid) for tid in order]
    return TourEvaluator(scenario, legs, weights, norms, wait_policy).solution(nodes)


def construct_solution(
    scenario: Scenario,
    legs: LegMatrix,
    tau: np.ndarray,
    params: AcoParams,
    rng: np.random.Generator,
    *,
    norms: Norms | None = None,
) -> AntSolution:
    """Build one ant's tour and fully decode it.

    The ant starts at node 0 at time 0 and repeatedly samples the next node
    from the transition distribution over the allowed set until the set is
    empty or every task is visited. Incomplete tours are valid solutions.
    Deterministic given the generator's stream.
    """
    eta = heuristic_matrix(legs, params.alpha)
    node_order = _sample_order(scenario, legs, tau, eta, params, rng)
    evaluator = TourEvaluator(scenario, legs, params.weights, norms, params.wait_policy)
    return evaluator.solution(node_order)


def deposit_amount(solution: AntSolution, params: AcoParams) -> float:
    """Pheromone increment for one solution.

    Higher quality deposits more: the amount scales with completion and
    inversely with the blended objective F. The completion floor keeps
    infeasible early tours from zeroing out exploration.
    """
    return _deposit(solution.feasibility.completion_fraction, solution.F, params)


def _deposit(completion: float, f_value: float, params: AcoParams) -> float:
    frac = max(completion, _COMPLETION_FLOOR)
    return params.q_deposit * frac / max(f_value, _F_FLOOR)


def _edges_of(node_order: Iterable[int]) -> list[tuple[int, int]]:
    edges = []
    node = 0
    for nxt in node_order:
        edges.append((node, nxt))
        node = nxt
    return edges


def _apply_update(
    tau: np.ndarray,
    entries: Sequence[tuple[Sequence[int], float, float]],
    params: AcoParams,
) -> np.ndarray:
    """Evaporate, deposit per entry (node_order, completion, F), clamp."""
    out = tau * (1.0 - params.rho)
    if entries:
        best = min(entries, key=lambda e: rank_key(e[1], e[2]))
        deposits = list(entries) + ([best] if params.elitist else [])
        for node_order, completion, f_value in deposits:
            amount = _deposit(completion, f_value, params)
            for i, j in _edges_of(node_order):
                out[i, j] += amount
    np.clip(out, params.tau_min, params.tau_max, out=out)
    return out


def update_pheromone(
    tau: np.ndarray,
    solutions: Sequence[AntSolution],
    params: AcoParams,
    task_ids: Sequence[int] | None = None,
) -> np.ndarray:
    """One generation's pheromone update; returns the new matrix.

    Every entry is evaporated by (1 - rho); each solution then deposits on
    the directed edges along its visit order, the iteration best deposits
    once more when ``params.elitist`` is set, and all entries are clamped to
    [tau_min, tau_max]. ``task_ids`` maps visit-order ids to node indices
    and defaults to ids 1..n in node order.
    """
    if task_ids is None:
        node_of = {i: i for i in range(1, tau.shape[0])}
    else:
        node_of = {tid: k + 1 for k, tid in enumerate(task_ids)}
    entries = [
        (
            [node_of[tid] for tid in sol.visit_order],
            sol.feasibility.completion_fraction,
            sol.F,
        )
        for sol in solutions
    ]
    return _apply_update(tau, entries, params)


def _substream(seed: int, iteration: int, ant: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(iteration, ant))
    return np.random.Generator(np.random.PCG64(ss))


def plan(
    scenario: Scenario,
    params: AcoParams,
    *,
    legs: LegMatrix | None = None,
    norms: Norms | None = None,
    turn_weight: float | None = None,
) -> tuple[AntSolution, ConvergenceTrace]:
    """Run the full colony loop and return (global best, convergence trace).

    The loop is init, construction, pheromone update, repeat until the
    iteration budget is exhausted. The global best is ranked lexicographically
    by (completion desc, F asc); on ties the earlier iteration wins. The
    trace records, per iteration, the running minimum F and length and the
    running maximum completion over each iteration's ranked-best solution,
    so ``best_F`` is non-increasing and ``best_completion`` non-decreasing.

    Two runs with identical (scenario, params) are bit-identical: each ant's
    randomness comes from a substream derived from (seed, iteration, ant),
    never from execution order.
    """
    if legs is None:
        legs = build_leg_matrix(scenario, turn_weight)
    evaluator = TourEvaluator(scenario, legs, params.weights, norms, params.wait_policy)
    n_nodes = legs.n_nodes
    tau = init_pheromone(n_nodes, params)
    eta = heuristic_matrix(legs, params.alpha)

    best_key: tuple[float, float] | None = None
    best_order: tuple[int, ...] = ()
    run_best_f = math.inf
    run_best_len = math.inf
    run_best_completion = 0.0
    trace: ConvergenceTrace = []

    for iteration in range(1, params.n_iterations + 1):
        entries: list[tuple[tuple[int, ...], float, float]] = []
        iter_best: tuple[tuple[float, float], tuple[int, ...], float, float, float] | None = None
        for ant in range(params.n_ants):
            rng = _substream(params.seed, iteration, ant)
            order = _sample_order(scenario, legs, tau, eta, params, rng)
            completion, f_value, length = evaluator.stats(order)
            entries.append((order, completion, f_value))
            key = rank_key(completion, f_value)
            if iter_best is None or key < iter_best[0]:
                iter_best = (key, order, completion, f_value, length)
            if best_key is None or key < best_key:
                best_key = key
                best_order = order
        _, _, it_completion, it_f, it_len = iter_best
        run_best_f = min(run_best_f, it_f)
        run_best_len = min(run_best_len, it_len)
        run_best_completion = max(run_best_completion, it_completion)
        trace.append(TraceRow(iteration, run_best_f, run_best_len, run_best_completion))
        tau = _apply_update(tau, entries, params)

    return evaluator.solution(best_order), trace


def trace_csv(trace: ConvergenceTrace) -> str:
    """Render a convergence trace as CSV with one row per iteration."""
    lines = ["iteration,best_F,best_length_m,best_completion"]
    for row in trace:
        lines.append(f"{row.iteration},{row.best_F!r},{row.best_length_m!r},{row.best_completion!r}")
    return "\n".join(lines) + "\n"
