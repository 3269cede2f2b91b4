"""Exception types raised across the package."""


class ColonyRouteError(Exception):
    """Base class for all library errors."""


class MalformedHeader(ColonyRouteError):
    """Map text does not begin with a valid ``map <w> <h> <res>`` line."""


class DimensionMismatch(ColonyRouteError):
    """Map body has the wrong number of rows or a row of the wrong length."""


class UnknownCell(ColonyRouteError):
    """Map body contains a character other than ``#`` or ``.``."""


class MalformedScenario(ColonyRouteError):
    """Scenario JSON is structurally invalid."""


class InvalidWindow(ColonyRouteError):
    """A time window does not satisfy 0 <= start < end."""


class BlockedCell(ColonyRouteError):
    """Start or task cell lies on an obstacle."""


class DuplicateId(ColonyRouteError):
    """Task ids or task cells are not distinct within a scenario."""


class Unreachable(ColonyRouteError):
    """A task cell cannot be reached from the scenario start."""

    def __init__(self, task_id, message=None):
        self.task_id = task_id
        super().__init__(message or f"task {task_id} is unreachable from start")


class InsufficientFreeCells(ColonyRouteError):
    """The map has too few mutually reachable free cells for the request."""


class NoPath(ColonyRouteError):
    """No collision-free path exists between two cells."""


class DegeneratePath(ColonyRouteError):
    """Metric undefined: fewer than three distinct path points."""


class Disconnected(ColonyRouteError):
    """Trajectory points are not grid-connected (or enter blocked cells)."""


class NonPositiveNorm(ColonyRouteError):
    """Objective normalization constants must all be positive."""


class EmptyAllowedSet(ColonyRouteError):
    """Transition probabilities requested over an empty candidate set."""


class TooManyTasks(ColonyRouteError):
    """Exhaustive search is capped at 8 tasks."""
