"""Multi-constraint ant colony tour planning on occupancy grids.

The package splits into a world model (maps, scenarios), trajectory
objectives, a precomputed leg library, the colony planner, baseline
planners sharing the same evaluation pipeline, and a benchmark harness.
"""

from .errors import (
    BlockedCell,
    ColonyRouteError,
    DegeneratePath,
    DimensionMismatch,
    Disconnected,
    DuplicateId,
    EmptyAllowedSet,
    InsufficientFreeCells,
    InvalidWindow,
    MalformedHeader,
    MalformedScenario,
    NoPath,
    NonPositiveNorm,
    TooManyTasks,
    UnknownCell,
    Unreachable,
)
from .world import (
    MOVES,
    Cell,
    GridMap,
    Scenario,
    Task,
    generate_map,
    generate_scenario,
    load_map,
    load_scenario,
    neighbors,
    reachable_mask,
    save_map,
    save_scenario,
    validate_scenario,
)
from .objectives import (
    DEFAULT_TURN_THRESHOLD,
    WAIT_ALLOW,
    WAIT_FORBID,
    FeasibilityReport,
    Norms,
    ObjectiveVector,
    TaskOutcome,
    Trajectory,
    Weights,
    check_windows,
    curvature_std,
    default_norms,
    evaluate_trajectory,
    heading_changes,
    path_length,
    scalar_objective,
    simulate_times,
    smoothness,
    turning_count,
)
from .legs import (
    DEFAULT_TURN_WEIGHT_FACTOR,
    Leg,
    LegMatrix,
    astar,
    build_leg_matrix,
    default_turn_weight,
)
from .aco import (
    AcoParams,
    AntSolution,
    ConvergenceTrace,
    TourEvaluator,
    TourState,
    TraceRow,
    allowed_set,
    concatenate_legs,
    construct_solution,
    deposit_amount,
    evaluate_order,
    heuristic,
    heuristic_matrix,
    init_pheromone,
    plan,
    rank_key,
    trace_csv,
    transition_probabilities,
    update_pheromone,
)
from .baselines import (
    EXHAUSTIVE_MAX_TASKS,
    GaParams,
    astar_greedy_plan,
    exhaustive_plan,
    ga_plan,
)
from .bench import (
    ALGORITHMS,
    BenchConfig,
    BenchRow,
    RunRecord,
    ScenarioSpec,
    SuiteResult,
    derive_trial_seed,
    read_csv_rows,
    run_suite,
)

__version__ = "0.1.0"
