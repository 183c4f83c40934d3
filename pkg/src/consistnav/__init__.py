"""ConsistNav: a semantic executive for object-goal navigation, with a
deterministic gridworld simulator and evaluation harness."""

from .config import RunConfig
from .control import GuardConfig, GuardState, StallVerdict
from .evaluation import EpisodeRecord, Outcome, compute_metrics
from .executive import (ExecutiveContext, ExecutiveState, FseConfig, Intent,
                        IntentKind, StepSignals)
from .geometry import Action, CellState, OccupancyGrid, Pose, SemanticObservation
from .memory import Candidate, CandidateMemory, MemoryConfig
from .scenario import Scenario, load_scenario, save_scenario
from .sim import DetectorConfig, EpisodeConfig, Variant, run_episode

__version__ = "0.1.0"

__all__ = [
    "Action", "Candidate", "CandidateMemory", "CellState", "DetectorConfig",
    "EpisodeConfig", "EpisodeRecord", "ExecutiveContext", "ExecutiveState",
    "FseConfig", "GuardConfig", "GuardState", "Intent", "IntentKind",
    "MemoryConfig", "OccupancyGrid", "Outcome", "Pose", "RunConfig",
    "Scenario", "SemanticObservation", "StallVerdict", "StepSignals",
    "Variant", "compute_metrics", "load_scenario", "run_episode",
    "save_scenario",
]
