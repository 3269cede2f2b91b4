"""Comparison planners sharing the colony's leg matrix and evaluation pipeline.

``astar_greedy_plan`` stitches legs by nearest feasible neighbor, ``ga_plan``
evolves task permutations, and ``exhaustive_plan`` is the ground-truth oracle
for small instances. None of them owns any geometry of its own.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, fields

import numpy as np

from .errors import TooManyTasks
from .aco import (
    AntSolution,
    ConvergenceTrace,
    TourEvaluator,
    TourState,
    TraceRow,
    allowed_set,
    rank_key,
)
from .legs import LegMatrix
from .objectives import WAIT_ALLOW, Norms, Weights
from .world import Scenario

EXHAUSTIVE_MAX_TASKS = 8


@dataclass(frozen=True)
class GaParams:
    """Permutation-GA knobs; conventional defaults, nothing published."""

    population: int = 100
    generations: int = 300
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    tournament_size: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be at least 2")
        if self.population < self.tournament_size:
            raise ValueError("population must be at least tournament_size")
        if self.generations < 1:
            raise ValueError("generations must be positive")
        for rate in (self.crossover_rate, self.mutation_rate):
            if not 0.0 <= rate <= 1.0:
                raise ValueError("rates must lie in [0, 1]")

    @classmethod
    def from_dict(cls, obj: dict) -> "GaParams":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown GaParams keys: {sorted(unknown)}")
        return cls(**obj)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def astar_greedy_plan(
    scenario: Scenario,
    legs: LegMatrix,
    weights: Weights | None = None,
    norms: Norms | None = None,
    wait_policy: str = WAIT_ALLOW,
) -> AntSolution:
    """Nearest-feasible-neighbor stitching over precomputed legs.

    Repeatedly drives to the closest unvisited task whose window end is still
    reachable; ties break on earlier window end, then smaller task id.
    Deterministic.
    """
    weights = weights or Weights.default()
    node = 0
    now = 0.0
    visited: set[int] = set()
    order: list[int] = []
    allow = wait_policy == WAIT_ALLOW
    while True:
        state = TourState(node, now, frozenset(visited))
        candidates = allowed_set(state, scenario, legs, wait_policy)
        if not candidates:
            break
        nxt = min(
            candidates,
            key=lambda j: (
                legs.length[node, j],
                scenario.tasks[j - 1].window_end,
                scenario.tasks[j - 1].id,
            ),
        )
        arrival = now + legs.length[node, nxt] / scenario.speed
        window_start = scenario.tasks[nxt - 1].window_start
        now = max(arrival, window_start) if allow else arrival
        visited.add(nxt)
        order.append(nxt)
        node = nxt
    evaluator = TourEvaluator(scenario, legs, weights, norms, wait_policy)
    return evaluator.solution(order)


def _order_crossover(p1: tuple[int, ...], p2: tuple[int, ...], rng: np.random.Generator):
    """OX1: keep a slice of p1, fill the rest in p2's cyclic order."""
    n = len(p1)
    if n < 2:
        return p1
    i, j = sorted(int(x) for x in rng.integers(0, n, size=2))
    child: list[int | None] = [None] * n
    child[i:j + 1] = p1[i:j + 1]
    held = set(p1[i:j + 1])
    fill = [g for g in (p2[(j + 1 + k) % n] for k in range(n)) if g not in held]
    pos = (j + 1) % n
    for gene in fill:
        child[pos] = gene
        pos = (pos + 1) % n
    return tuple(child)


def _swap_mutation(perm: tuple[int, ...], rng: np.random.Generator):
    n = len(perm)
    if n < 2:
        return perm
    i = int(rng.integers(0, n))
    j = int(rng.integers(0, n))
    out = list(perm)
    out[i], out[j] = out[j], out[i]
    return tuple(out)


def ga_plan(
    scenario: Scenario,
    legs: LegMatrix,
    ga: GaParams,
    weights: Weights | None = None,
    norms: Norms | None = None,
    wait_policy: str = WAIT_ALLOW,
) -> tuple[AntSolution, ConvergenceTrace]:
    """Permutation GA over task orders; returns (best solution, trace).

    Fitness is the same lexicographic (completion desc, F asc) ranking used
    by the colony; selection is tournament, crossover OX1, mutation a single
    swap, with elitism of one, so the best fitness never worsens across
    generations. Deterministic for a fixed seed.
    """
    weights = weights or Weights.default()
    evaluator = TourEvaluator(scenario, legs, weights, norms, wait_policy)
    rng = np.random.Generator(np.random.PCG64(ga.seed))
    n = len(scenario.tasks)
    population = [
        tuple(int(g) for g in rng.permutation(n) + 1) for _ in range(ga.population)
    ]

    def key_of(perm):
        completion, f_value, _ = evaluator.stats(perm)
        return rank_key(completion, f_value)

    def tournament():
        picks = rng.integers(0, ga.population, size=ga.tournament_size)
        best = None
        for p in picks:
            individual = population[int(p)]
            if best is None or key_of(individual) < key_of(best):
                best = individual
        return best

    run_best_f = np.inf
    run_best_len = np.inf
    run_best_completion = 0.0
    trace: ConvergenceTrace = []
    best_perm = min(population, key=key_of)
    for generation in range(1, ga.generations + 1):
        next_population = [best_perm]
        while len(next_population) < ga.population:
            p1 = tournament()
            p2 = tournament()
            child = _order_crossover(p1, p2, rng) if rng.random() < ga.crossover_rate else p1
            if rng.random() < ga.mutation_rate:
                child = _swap_mutation(child, rng)
            next_population.append(child)
        population = next_population
        gen_best = min(population, key=key_of)
        if key_of(gen_best) < key_of(best_perm):
            best_perm = gen_best
        completion, f_value, length = evaluator.stats(best_perm)
        run_best_f = min(run_best_f, f_value)
        run_best_len = min(run_best_len, length)
        run_best_completion = max(run_best_completion, completion)
        trace.append(TraceRow(generation, run_best_f, run_best_len, run_best_completion))
    return evaluator.solution(best_perm), trace


def exhaustive_plan(
    scenario: Scenario,
    legs: LegMatrix,
    weights: Weights | None = None,
    norms: Norms | None = None,
    wait_policy: str = WAIT_ALLOW,
) -> AntSolution:
    """Ground-truth oracle: evaluate every ordered subset of tasks.

    Ordered subsets (not only full permutations) are enumerated because with
    tight windows a shorter tour can dominate every full tour. The
    lexicographic optimum is returned; among ties the first in id-ordered
    enumeration wins, so symmetric instances resolve to id order.
    """
    n = len(scenario.tasks)
    if n > EXHAUSTIVE_MAX_TASKS:
        raise TooManyTasks(f"{n} tasks exceeds the exhaustive cap of {EXHAUSTIVE_MAX_TASKS}")
    evaluator = TourEvaluator(scenario, legs, weights or Weights.default(), norms, wait_policy)
    nodes_by_id = [legs.node_of_task(tid) for tid in sorted(legs.task_ids)]
    best_key = None
    best_order: tuple[int, ...] = ()
    for size in range(n + 1):
        for perm in itertools.permutations(nodes_by_id, size):
            completion, f_value, _ = evaluator.stats(perm)
            key = rank_key(completion, f_value)
            if best_key is None or key < best_key:
                best_key = key
                best_order = perm
    return evaluator.solution(best_order)
