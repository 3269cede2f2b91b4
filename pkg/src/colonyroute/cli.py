"""Command-line entry point: ``plan``, ``gen-map``, ``gen-scenario``, ``bench``.

Exit codes: 0 success, 2 input error, 3 internal error. Result and trace
files are byte-identical across re-runs with the same seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .aco import AcoParams, plan, trace_csv
from .baselines import GaParams, astar_greedy_plan, ga_plan
from .bench import ALGORITHMS, BenchConfig, run_suite
from .errors import ColonyRouteError
from .legs import build_leg_matrix
from .world import generate_map, generate_scenario, load_map, load_scenario, save_map, save_scenario


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="colonyroute",
        description="Multi-constraint tour planning for logistics robots on occupancy grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan one scenario with one algorithm")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--algo", required=True, choices=ALGORITHMS)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--params", help="JSON file of AcoParams/GaParams fields")
    p.add_argument("--out", help="result JSON path")
    p.add_argument("--trace", help="convergence CSV path (aco/ga)")

    g = sub.add_parser("gen-map", help="generate a seeded shelf-obstacle map")
    g.add_argument("--seed", required=True, type=int)
    g.add_argument("--width", type=int, default=200)
    g.add_argument("--height", type=int, default=200)
    g.add_argument("--resolution", type=float, default=0.1)
    g.add_argument("--density", type=float, default=0.15)
    g.add_argument("--out", required=True)

    s = sub.add_parser("gen-scenario", help="generate a seeded scenario on a map")
    s.add_argument("--seed", required=True, type=int)
    s.add_argument("--map", required=True, help="map text file")
    s.add_argument("--tasks", type=int, default=8)
    s.add_argument("--window-lo", type=float, default=5.0)
    s.add_argument("--window-hi", type=float, default=30.0)
    s.add_argument("--speed", type=float, default=1.0)
    s.add_argument("--out", required=True)

    b = sub.add_parser("bench", help="run a benchmark suite from a config file")
    b.add_argument("--config", required=True, help="BenchConfig JSON file")
    return parser


def _load_params(path: str | None) -> dict:
    if path is None:
        return {}
    obj = json.loads(Path(path).read_text())
    if not isinstance(obj, dict):
        raise ValueError("params file must hold a JSON object")
    return obj


def _result_document(algorithm: str, seed: int, solution) -> dict:
    return {
        "algorithm": algorithm,
        "seed": seed,
        "visit_order": list(solution.visit_order),
        "complete": solution.complete,
        "F": solution.F,
        "objectives": {
            "f1_length_m": solution.objectives.f1_length,
            "f2_makespan_s": solution.objectives.f2_makespan,
            "f3_turns": solution.objectives.f3_turns,
            "f4_smoothness_rad": solution.objectives.f4_smoothness,
            "curvature_std": solution.objectives.curvature_std,
        },
        "feasibility": {
            "completion_fraction": solution.feasibility.completion_fraction,
            "tasks": [
                {"id": o.task_id, "arrival_s": o.arrival, "status": o.status}
                for o in solution.feasibility.outcomes
            ],
        },
        "trajectory": {
            "points": solution.trajectory.points.tolist(),
            "arrival_times_s": solution.trajectory.arrival_times.tolist(),
        },
    }


def _cmd_plan(args) -> int:
    scenario_path = Path(args.scenario)
    scenario = load_scenario(scenario_path.read_text(), map_base=scenario_path.parent)
    params_obj = _load_params(args.params)
    legs = build_leg_matrix(scenario)
    trace = None
    if args.algo == "aco":
        params = replace(AcoParams.from_dict(params_obj), seed=args.seed)
        solution, trace = plan(scenario, params, legs=legs)
    elif args.algo == "ga":
        params = replace(GaParams.from_dict(params_obj), seed=args.seed)
        solution, trace = ga_plan(scenario, legs, params)
    else:
        solution = astar_greedy_plan(scenario, legs)

    if args.out:
        doc = _result_document(args.algo, args.seed, solution)
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
    if args.trace:
        Path(args.trace).write_text(trace_csv(trace or []))
    print(
        f"{args.algo}: completion={100.0 * solution.feasibility.completion_fraction:.1f}% "
        f"F={solution.F:.6f} length={solution.objectives.f1_length:.3f}m "
        f"makespan={solution.objectives.f2_makespan:.3f}s "
        f"turns={solution.objectives.f3_turns} tasks={len(solution.visit_order)}"
    )
    return 0


def _cmd_gen_map(args) -> int:
    grid = generate_map(
        seed=args.seed,
        width=args.width,
        height=args.height,
        resolution=args.resolution,
        density=args.density,
    )
    Path(args.out).write_text(save_map(grid))
    print(
        f"map {args.width}x{args.height} @ {args.resolution} m "
        f"({grid.width_cells * grid.resolution:g} m x {grid.height_cells * grid.resolution:g} m) "
        f"-> {args.out}"
    )
    return 0


def _cmd_gen_scenario(args) -> int:
    if not 5 <= args.tasks <= 20:
        raise ValueError(f"--tasks must lie in [5, 20], got {args.tasks}")
    grid = load_map(Path(args.map).read_text())
    scenario = generate_scenario(
        args.seed, grid, args.tasks, args.window_lo, args.window_hi, args.speed
    )
    Path(args.out).write_text(save_scenario(scenario))
    print(f"scenario: {args.tasks} tasks, windows [{args.window_lo}, {args.window_hi}] s -> {args.out}")
    return 0


def _cmd_bench(args) -> int:
    config_path = Path(args.config)
    config = BenchConfig.from_json(config_path.read_text(), base_dir=config_path.parent)
    result = run_suite(config, base_dir=config_path.parent)
    for row in result.rows:
        print(
            f"{row.method}: n={row.n_runs} length={row.mean_length_m:.3f}m "
            f"turns={row.mean_turning_count:.3f} completion={row.mean_completion_pct:.1f}%"
        )
    print(f"wrote {result.raw_path} and {result.aggregate_path}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed a one-line diagnostic
        return 2 if exc.code not in (0, None) else 0
    try:
        if args.command == "plan":
            return _cmd_plan(args)
        if args.command == "gen-map":
            return _cmd_gen_map(args)
        if args.command == "gen-scenario":
            return _cmd_gen_scenario(args)
        return _cmd_bench(args)
    except (ColonyRouteError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
