"""Metrics, the independent shortest-path oracle, and the six-way outcome
classifier, plus per-variant aggregation."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .geometry import CellState, ObjectInstance, OccupancyGrid, Pose
from .scenario import Scenario
from .sim.sensing import DetectorConfig, visible_objects

SQRT2 = math.sqrt(2.0)

VARIANT_ORDER = ["Baseline", "PCM", "PCM_FSEC", "Full"]

# executive states that count as commitment when a log carries states
COMMIT_STATES = {"Suspect", "Approach", "Verify", "FinalApproach"}

# how close a pursued point must sit to a true target to count as
# commitment to it for failure attribution
TRUTH_RADIUS = 0.75


class Outcome(Enum):
    SUCCESS = "Success"
    INFEASIBLE = "Infeasible"
    UNSTABLE_COMMITMENT = "UnstableCommitment"
    FRONTIER_EXHAUSTION = "FrontierExhaustion"
    TIMEOUT = "Timeout"
    MISSING_TARGET = "MissingTarget"


OUTCOME_ORDER = [o.value for o in (
    Outcome.SUCCESS, Outcome.INFEASIBLE, Outcome.UNSTABLE_COMMITMENT,
    Outcome.FRONTIER_EXHAUSTION, Outcome.TIMEOUT, Outcome.MISSING_TARGET)]


@dataclass
class EpisodeRecord:
    episode_id: str
    scenario_id: str
    variant: str
    seed: int
    outcome: str
    steps: int
    path_length: float
    shortest_path: Optional[float]
    spl_term: float
    stop_step: Optional[int]
    final_state: Optional[str]
    trajectory_path: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "scenario_id": self.scenario_id,
            "variant": self.variant,
            "seed": self.seed,
            "outcome": self.outcome,
            "steps": self.steps,
            "path_length": round(self.path_length, 6),
            "shortest_path": (None if self.shortest_path is None
                              else round(self.shortest_path, 6)),
            "spl_term": round(self.spl_term, 6),
            "stop_step": self.stop_step,
            "final_state": self.final_state,
            "trajectory_path": self.trajectory_path,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EpisodeRecord":
        return cls(**data)


# ---------------------------------------------------------------------------
# shortest-path oracle (independent of sim.planner by construction: a plain
# hand-rolled heap Dijkstra over an explicit neighbor table)
# ---------------------------------------------------------------------------

_NEIGHBORS = (
    (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
    (1, 1, SQRT2), (-1, 1, SQRT2), (1, -1, SQRT2), (-1, -1, SQRT2),
)


def oracle_cost_cells(grid: OccupancyGrid, start: tuple[int, int],
                      goals: set[tuple[int, int]]) -> Optional[float]:
    """Dijkstra flood over Free cells (diagonals sqrt(2), no corner cutting)
    from start to the nearest goal cell; cost in cell units, None if
    unreachable."""
    cells = grid.cells
    free_val = int(CellState.FREE)
    w, h = grid.width, grid.height
    sx, sy = start
    if cells[sy, sx] != free_val:
        raise ValueError(f"oracle start {start} is not Free")
    if start in goals:
        return 0.0
    dist = {start: 0.0}
    heap = [(0.0, start)]
    while heap:
        d, (x, y) = heapq.heappop(heap)
        if d > dist.get((x, y), math.inf):
            continue
        if (x, y) in goals:
            return d
        for dx, dy, cost in _NEIGHBORS:
            nx, ny = x + dx, y + dy
            if not (0 <= nx < w and 0 <= ny < h):
                continue
            if cells[ny, nx] != free_val:
                continue
            if dx != 0 and dy != 0:
                # both orthogonal cells must be free to cut across
                if cells[y, nx] != free_val or cells[ny, x] != free_val:
                    continue
            nd = d + cost
            if nd < dist.get((nx, ny), math.inf):
                dist[(nx, ny)] = nd
                heapq.heappush(heap, (nd, (nx, ny)))
    return None


def goal_cells_near(grid: OccupancyGrid, targets: list[ObjectInstance],
                    radius: float) -> set[tuple[int, int]]:
    """Free cells whose center lies within the radius of any target."""
    out = set()
    r_cells = int(math.ceil(radius / grid.cell_size)) + 1
    for obj in targets:
        tx, ty = grid.world_to_cell(obj.position)
        for dy in range(-r_cells, r_cells + 1):
            for dx in range(-r_cells, r_cells + 1):
                x, y = tx + dx, ty + dy
                if not grid.in_bounds(x, y):
                    continue
                if grid.cells[y, x] != int(CellState.FREE):
                    continue
                cx, cy = grid.cell_center((x, y))
                if math.hypot(cx - obj.position[0], cy - obj.position[1]) <= radius:
                    out.add((x, y))
    return out


def shortest_path_oracle(grid: OccupancyGrid, start_cell: tuple[int, int],
                         targets: list[ObjectInstance],
                         success_radius: float) -> Optional[float]:
    """Shortest feasible path length in meters from the start cell to any
    cell within the success radius of a target; None when unreachable.
    Floored at one cell length to avoid degenerate SPL division."""
    goals = goal_cells_near(grid, targets, success_radius)
    if not goals:
        return None
    cost = oracle_cost_cells(grid, start_cell, goals)
    if cost is None:
        return None
    return max(cost, 1.0) * grid.cell_size


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def spl_term(success: bool, path_length: float,
             shortest_path: Optional[float]) -> float:
    if not success or shortest_path is None or shortest_path <= 0:
        return 0.0
    return shortest_path / max(path_length, shortest_path)


def compute_metrics(records: list[EpisodeRecord]) -> dict:
    """Success rate and success-weighted path length over a record set."""
    if not records:
        raise ValueError("compute_metrics requires at least one record")
    n = len(records)
    sr = sum(1 for r in records if r.outcome == Outcome.SUCCESS.value) / n
    spl = sum(r.spl_term for r in records) / n
    return {"sr": sr, "spl": spl}


# ---------------------------------------------------------------------------
# outcome classification
# ---------------------------------------------------------------------------

def _pursuit_near_truth(entry: dict, targets: list[ObjectInstance]) -> bool:
    pursuit = entry.get("pursuit")
    if pursuit is None:
        return False
    return any(math.hypot(pursuit[0] - t.position[0], pursuit[1] - t.position[1])
               <= TRUTH_RADIUS for t in targets)


def _is_committed(entry: dict, has_states: bool,
                  targets: list[ObjectInstance]) -> bool:
    if has_states:
        if entry.get("state") not in COMMIT_STATES:
            return False
    return _pursuit_near_truth(entry, targets)


def target_ever_visible(scenario: Scenario, trajectory: list[dict],
                        detector: DetectorConfig) -> bool:
    targets = scenario.targets()
    for entry in trajectory:
        pose = Pose(entry["pose"]["x"], entry["pose"]["y"], entry["pose"]["theta"])
        if visible_objects(scenario.grid, targets, pose,
                           detector.sensing_range, detector.fov):
            return True
    return False


def classify_outcome(scenario: Scenario, trajectory: list[dict],
                     detector: DetectorConfig, *, feasible: bool,
                     stop_pose: Optional[Pose], stop_step: Optional[int],
                     success_radius: float, end_reason: str) -> Outcome:
    """Assign exactly one outcome by fixed precedence: infeasibility, then
    verified success, then unstable commitment, missed target, frontier
    exhaustion, and finally timeout."""
    if not feasible:
        return Outcome.INFEASIBLE

    targets = scenario.targets()
    if stop_pose is not None and any(
            math.hypot(stop_pose.x - t.position[0], stop_pose.y - t.position[1])
            <= success_radius for t in targets):
        return Outcome.SUCCESS

    has_states = any(e.get("state") is not None for e in trajectory)
    commit_flags = [_is_committed(e, has_states, targets) for e in trajectory]
    if any(commit_flags):
        last_commit = max(i for i, c in enumerate(commit_flags) if c)
        exited = last_commit < len(trajectory) - 1
        stopped_badly = stop_step is not None
        if exited or stopped_badly:
            return Outcome.UNSTABLE_COMMITMENT
        return Outcome.TIMEOUT

    if target_ever_visible(scenario, trajectory, detector):
        return Outcome.MISSING_TARGET

    if end_reason == "frontier_exhaustion":
        return Outcome.FRONTIER_EXHAUSTION

    return Outcome.TIMEOUT


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

def aggregate_report(records: list[EpisodeRecord]) -> dict:
    """Per-variant SR/SPL plus the six-category outcome breakdown, in the
    canonical variant order."""
    by_variant: dict[str, list[EpisodeRecord]] = {}
    for r in records:
        by_variant.setdefault(r.variant, []).append(r)

    ordered = [v for v in VARIANT_ORDER if v in by_variant]
    ordered += sorted(v for v in by_variant if v not in VARIANT_ORDER)

    out = {}
    for variant in ordered:
        rows = by_variant[variant]
        metrics = compute_metrics(rows)
        counts = {name: 0 for name in OUTCOME_ORDER}
        for r in rows:
            counts[r.outcome] = counts.get(r.outcome, 0) + 1
        n = len(rows)
        out[variant] = {
            "episodes": n,
            "sr": round(metrics["sr"], 6),
            "spl": round(metrics["spl"], 6),
            "outcome_counts": counts,
            "outcome_pct": {k: round(100.0 * v / n, 4) for k, v in counts.items()},
        }
    return out
