"""Bi-objective (makespan, total energy) optimisation for the blocking hybrid flow shop."""

from .core import (
    Instance,
    InconsistentScheduleError,
    InvalidInputError,
    ObjectiveReport,
    ObjectiveVector,
    Schedule,
    decode,
    evaluate,
    evaluate_perm,
    lower_bounds,
    read_instance,
    validate_schedule,
    write_instance,
)
from .pareto import ParetoArchive, generational_distance, hypervolume
from .ripg import RipgConfig, run

__all__ = [
    "Instance",
    "InconsistentScheduleError",
    "InvalidInputError",
    "ObjectiveReport",
    "ObjectiveVector",
    "ParetoArchive",
    "RipgConfig",
    "Schedule",
    "decode",
    "evaluate",
    "evaluate_perm",
    "generational_distance",
    "hypervolume",
    "lower_bounds",
    "read_instance",
    "run",
    "validate_schedule",
    "write_instance",
]

__version__ = "0.1.0"
