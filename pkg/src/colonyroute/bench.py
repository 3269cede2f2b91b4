"""Benchmark harness: seeded trial grids, raw/aggregate CSVs, mean traces.

A suite runs every (scenario, algorithm, trial) cell with a trial-derived
seed, records geometry metrics plus wall-clock compute time, and writes
three artifacts to the output directory: ``raw_runs.csv`` (one row per run),
``aggregate.csv`` (per-method means and standard deviations, shaped like the
comparison tables), and ``convergence_<algo>.csv`` (mean best-so-far curves
for the iterative planners). Geometry columns are bit-reproducible across
re-runs and thread counts; only compute time varies.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .aco import AcoParams, AntSolution, ConvergenceTrace, plan
from .baselines import GaParams, astar_greedy_plan, ga_plan
from .errors import ColonyRouteError
from .legs import LegMatrix, build_leg_matrix
from .objectives import WAIT_ALLOW, Norms, Weights, default_norms
from .world import GridMap, Scenario, generate_map, generate_scenario, load_map

THREADS_ENV = "COLONYROUTE_THREADS"

ALGORITHMS = ("aco", "astar_greedy", "ga")

METRIC_COLUMNS = (
    "length_m",
    "travel_time_s",
    "compute_time_s",
    "turning_count",
    "smoothness_rad",
    "curvature_std",
    "completion_pct",
)


@dataclass(frozen=True)
class ScenarioSpec:
    """One benchmark scenario: a map reference plus generator arguments.

    ``map`` is either a map-file path or a dict of ``generate_map`` arguments
    (``seed``, ``width``, ``height``, ``resolution``, ``density``).
    """

    map: str | dict
    seed: int
    n_tasks: int
    window_lo: float = 5.0
    window_hi: float = 30.0
    speed: float = 1.0


@dataclass(frozen=True)
class BenchConfig:
    scenarios: tuple[ScenarioSpec, ...]
    algorithms: tuple[str, ...]
    trials_per_cell: int = 50
    seed: int = 0
    aco: AcoParams = field(default_factory=AcoParams)
    ga: GaParams = field(default_factory=GaParams)
    weights: Weights = field(default_factory=Weights.default)
    norms: Norms | None = None  # None derives per-scenario defaults
    out_dir: str = "bench_out"
    turn_weight: float | None = None
    wait_policy: str = WAIT_ALLOW

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.trials_per_cell < 1:
            raise ValueError("trials_per_cell must be at least 1")
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, obj: dict, *, base_dir: str | Path | None = None) -> "BenchConfig":
        scenarios = tuple(
            ScenarioSpec(
                map=s["map"],
                seed=int(s["seed"]),
                n_tasks=int(s["n_tasks"]),
                window_lo=float(s.get("window_lo", 5.0)),
                window_hi=float(s.get("window_hi", 30.0)),
                speed=float(s.get("speed", 1.0)),
            )
            for s in obj["scenarios"]
        )
        kwargs: dict = {
            "scenarios": scenarios,
            "algorithms": tuple(obj["algorithms"]),
            "trials_per_cell": int(obj.get("trials_per_cell", 50)),
            "seed": int(obj.get("seed", 0)),
            "out_dir": str(obj.get("out_dir", "bench_out")),
            "wait_policy": obj.get("wait_policy", WAIT_ALLOW),
        }
        if base_dir is not None:
            out = Path(kwargs["out_dir"])
            if not out.is_absolute():
                kwargs["out_dir"] = str(Path(base_dir) / out)
        if "aco" in obj:
            kwargs["aco"] = AcoParams.from_dict(obj["aco"])
        if "ga" in obj:
            kwargs["ga"] = GaParams.from_dict(obj["ga"])
        if "weights" in obj:
            kwargs["weights"] = Weights.from_sequence(obj["weights"])
        if obj.get("norms") is not None:
            kwargs["norms"] = Norms.from_sequence(obj["norms"])
        if obj.get("turn_weight") is not None:
            kwargs["turn_weight"] = float(obj["turn_weight"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str, *, base_dir: str | Path | None = None) -> "BenchConfig":
        return cls.from_dict(json.loads(text), base_dir=base_dir)


@dataclass(frozen=True)
class BenchRow:
    """Per-method aggregate: mean and population stddev of every metric."""

    method: str
    n_runs: int
    mean_length_m: float
    std_length_m: float
    mean_travel_time_s: float
    std_travel_time_s: float
    mean_compute_time_s: float
    std_compute_time_s: float
    mean_turning_count: float
    std_turning_count: float
    mean_smoothness_rad: float
    std_smoothness_rad: float
    mean_curvature_std: float
    std_curvature_std: float
    mean_completion_pct: float
    std_completion_pct: float


@dataclass(frozen=True)
class RunRecord:
    scenario_index: int
    algorithm: str
    trial: int
    seed: int
    status: str  # "ok" or "error: ..."
    metrics: dict | None
    trace: ConvergenceTrace | None


@dataclass(frozen=True)
class SuiteResult:
    rows: list[BenchRow]
    records: list[RunRecord]
    raw_path: Path
    aggregate_path: Path
    convergence_paths: dict[str, Path]


def derive_trial_seed(base_seed: int, scenario_index: int, algorithm: str, trial: int) -> int:
    """Stable per-run seed; adding an algorithm never perturbs the others."""
    text = f"{base_seed}|{scenario_index}|{algorithm}|{trial}"
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        value = int(raw)
        if value > 0:
            return value
    return os.cpu_count() or 1


def realize_scenario(spec: ScenarioSpec, *, base_dir: str | Path | None = None) -> Scenario:
    if isinstance(spec.map, dict):
        grid = generate_map(
            seed=int(spec.map.get("seed", spec.seed)),
            width=int(spec.map.get("width", 200)),
            height=int(spec.map.get("height", 200)),
            resolution=float(spec.map.get("resolution", 0.1)),
            density=float(spec.map.get("density", 0.15)),
        )
    else:
        path = Path(spec.map)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        grid = load_map(path.read_text())
    return generate_scenario(
        spec.seed, grid, spec.n_tasks, spec.window_lo, spec.window_hi, spec.speed
    )


def _solution_metrics(solution: AntSolution, compute_time: float) -> dict:
    return {
        "length_m": solution.objectives.f1_length,
        "travel_time_s": solution.objectives.f2_makespan,
        "compute_time_s": compute_time,
        "turning_count": solution.objectives.f3_turns,
        "smoothness_rad": solution.objectives.f4_smoothness,
        "curvature_std": solution.objectives.curvature_std,
        "completion_pct": 100.0 * solution.feasibility.completion_fraction,
        "F": solution.F,
    }


def run_single(
    scenario: Scenario,
    legs: LegMatrix,
    algorithm: str,
    seed: int,
    config: BenchConfig,
) -> tuple[AntSolution, ConvergenceTrace | None, float]:
    """Run one planner once; returns (solution, trace, compute_seconds)."""
    norms = config.norms
    started = time.perf_counter()
    if algorithm == "aco":
        params = replace(config.aco, seed=seed, wait_policy=config.wait_policy)
        solution, trace = plan(scenario, params, legs=legs, norms=norms)
    elif algorithm == "astar_greedy":
        solution = astar_greedy_plan(scenario, legs, config.weights, norms, config.wait_policy)
        trace = None
    elif algorithm == "ga":
        params = replace(config.ga, seed=seed)
        solution, trace = ga_plan(scenario, legs, params, config.weights, norms, config.wait_policy)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return solution, trace, time.perf_counter() - started


def run_suite(config: BenchConfig, *, base_dir: str | Path | None = None) -> SuiteResult:
    """Execute the whole trial grid and write the three CSV artifacts.

    Trials may run in parallel (capped by ``COLONYROUTE_THREADS``); rows are
    emitted in fixed (scenario, algorithm, trial) order regardless of
    completion order. Planner errors become failed rows and never abort the
    suite.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenarios = [realize_scenario(spec, base_dir=base_dir) for spec in config.scenarios]
    leg_matrices = [build_leg_matrix(s, config.turn_weight) for s in scenarios]

    jobs = [
        (si, algorithm, trial)
        for si in range(len(scenarios))
        for algorithm in config.algorithms
        for trial in range(config.trials_per_cell)
    ]

    def execute(job) -> RunRecord:
        si, algorithm, trial = job
        seed = derive_trial_seed(config.seed, si, algorithm, trial)
        try:
            solution, trace, elapsed = run_single(
                scenarios[si], leg_matrices[si], algorithm, seed, config
            )
            return RunRecord(
                si, algorithm, trial, seed, "ok", _solution_metrics(solution, elapsed), trace
            )
        except ColonyRouteError as exc:
            return RunRecord(si, algorithm, trial, seed, f"error: {exc}", None, None)

    workers = thread_count()
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(execute, jobs))
    else:
        records = [execute(job) for job in jobs]

    raw_path = out_dir / "raw_runs.csv"
    _write_raw_csv(raw_path, records)
    rows = aggregate_records(records, config.algorithms)
    aggregate_path = out_dir / "aggregate.csv"
    _write_aggregate_csv(aggregate_path, rows)
    convergence_paths: dict[str, Path] = {}
    for algorithm in config.algorithms:
        traces = [r.trace for r in records if r.algorithm == algorithm and r.trace]
        if not traces:
            continue
        path = out_dir / f"convergence_{algorithm}.csv"
        _write_mean_trace_csv(path, traces)
        convergence_paths[algorithm] = path
    return SuiteResult(rows, records, raw_path, aggregate_path, convergence_paths)


def aggregate_records(records: list[RunRecord], algorithms) -> list[BenchRow]:
    """Per-method means/stddevs over successful runs, in config order."""
    rows = []
    for algorithm in algorithms:
        ok = [r for r in records if r.algorithm == algorithm and r.status == "ok"]
        if not ok:
            continue
        stats: dict[str, float] = {}
        for column in METRIC_COLUMNS:
            values = np.array([r.metrics[column] for r in ok], dtype=np.float64)
            stats[f"mean_{column}"] = float(values.mean())
            stats[f"std_{column}"] = float(values.std())
        rows.append(BenchRow(method=algorithm, n_runs=len(ok), **stats))
    return rows


def _write_raw_csv(path: Path, records: list[RunRecord]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["scenario", "algorithm", "trial", "seed", "status", *METRIC_COLUMNS, "F"]
        )
        for r in records:
            if r.metrics is None:
                writer.writerow(
                    [r.scenario_index, r.algorithm, r.trial, r.seed, r.status]
                    + [""] * (len(METRIC_COLUMNS) + 1)
                )
            else:
                writer.writerow(
                    [r.scenario_index, r.algorithm, r.trial, r.seed, r.status]
                    + [repr(float(r.metrics[c])) for c in METRIC_COLUMNS]
                    + [repr(float(r.metrics["F"]))]
                )


def _write_aggregate_csv(path: Path, rows: list[BenchRow]) -> None:
    header = ["method", "n_runs"]
    for column in METRIC_COLUMNS:
        header += [f"mean_{column}", f"std_{column}"]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            out = [row.method, row.n_runs]
            for column in METRIC_COLUMNS:
                out += [
                    repr(getattr(row, f"mean_{column}")),
                    repr(getattr(row, f"std_{column}")),
                ]
            writer.writerow(out)


def _write_mean_trace_csv(path: Path, traces: list[ConvergenceTrace]) -> None:
    length = min(len(t) for t in traces)
    best_f = np.array([[row.best_F for row in t[:length]] for t in traces])
    best_len = np.array([[row.best_length_m for row in t[:length]] for t in traces])
    best_completion = np.array([[row.best_completion for row in t[:length]] for t in traces])
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "mean_best_F", "mean_best_length_m", "mean_best_completion"])
        for i in range(length):
            writer.writerow(
                [
                    i + 1,
                    repr(float(best_f[:, i].mean())),
                    repr(float(best_len[:, i].mean())),
                    repr(float(best_completion[:, i].mean())),
                ]
            )


def read_csv_rows(path: str | Path) -> list[dict]:
    """Load a harness CSV back into dicts (strings preserved)."""
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
