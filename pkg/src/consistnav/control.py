"""Stability-aware action control: subgoal selection with visited/failed
penalties, anti-spin filtering, stall detection, bounded recovery motion,
and the stop interception that makes the verified gate the sole authority
over Stop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .executive import (ExecutiveContext, ExecutiveState, FseConfig, Q_COMMIT,
                        check_verified_gate)
from .geometry import Action, CellState, OccupancyGrid, Pose, angle_diff, bearing_to
from .memory import Candidate


class NoSubgoalError(Exception):
    """No goals available; signals frontier exhaustion upstream."""


@dataclass
class GuardConfig:
    delta_move: float = 0.05        # m, minimum translation that counts as progress
    spin_cap: int = 6               # pure turns tolerated before suppression
    progress_margin: float = 0.1    # m, required d_best improvement (epsilon_d)
    stall_steps: int = 12           # steps of no progress before intervention (K_s)
    recovery_budget: int = 20       # escape steps per Failover entry (B_r)
    lambda_visited: float = 1.0     # m-equivalent subgoal penalty
    lambda_failed: float = 2.0      # m-equivalent subgoal penalty
    heading_align: float = math.radians(15.0)  # steer threshold
    failed_region_radius: float = 0.5   # m, neighborhood marked failed
    failed_region_expiry: int = 200     # steps before failed cells are retried

    def __post_init__(self) -> None:
        for name in ("delta_move", "progress_margin", "lambda_visited", "lambda_failed"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class StallVerdict(Enum):
    NONE = "none"
    TRIGGER_VERIFY = "verify"
    TRIGGER_RECOVERY = "recovery"
    TRIGGER_FAILOVER = "failover"


@dataclass
class SubgoalSet:
    """Candidate subgoals plus the visited/failed cell sets they are scored
    against. ``goal_cells`` is parallel to ``goals``."""

    goals: list
    goal_cells: list
    visited_regions: frozenset
    failed_regions: frozenset


@dataclass
class GuardState:
    spin_budget: int = 0
    stall_counter: int = 0
    last_pose: Optional[Pose] = None
    delta_p: float = 0.0
    delta_theta: float = 0.0
    resample_requested: bool = False
    # semantic-pursuit progress tracking
    reference_best: float = math.inf
    semantic_counter: int = 0

    def note_motion(self, new_pose: Pose, cfg: GuardConfig) -> None:
        """Fold the most recent pose transition into the spin/stall counters."""
        if self.last_pose is not None:
            self.delta_p = math.hypot(new_pose.x - self.last_pose.x,
                                      new_pose.y - self.last_pose.y)
            self.delta_theta = abs(angle_diff(new_pose.theta, self.last_pose.theta))
            if self.delta_p >= cfg.delta_move:
                self.spin_budget = 0
                self.stall_counter = 0
            else:
                self.stall_counter += 1
                if self.delta_theta > 1e-9:
                    self.spin_budget += 1
        self.last_pose = new_pose

    def note_best_distance(self, d_best: float, cfg: GuardConfig) -> None:
        """Track whether candidate pursuit is still improving d_best."""
        if d_best <= self.reference_best - cfg.progress_margin:
            self.reference_best = d_best
            self.semantic_counter = 0
        else:
            self.semantic_counter += 1

    def reset_semantic(self) -> None:
        self.reference_best = math.inf
        self.semantic_counter = 0

    def reset_stall(self) -> None:
        self.stall_counter = 0
        self.semantic_counter = 0
        self.reference_best = math.inf


class RegionTracker:
    """Visited cells plus failed regions with step-based expiry."""

    def __init__(self, cfg: GuardConfig) -> None:
        self.cfg = cfg
        self.visited: set = set()
        self._failed: dict = {}  # cell -> step added

    def mark_visited(self, cell: tuple[int, int]) -> None:
        self.visited.add(cell)

    def mark_failed_region(self, grid: OccupancyGrid, center: tuple[float, float],
                           t: int) -> None:
        """Mark all cells within the failed-region radius of a world point."""
        radius_cells = max(1, int(round(self.cfg.failed_region_radius / grid.cell_size)))
        try:
            cx, cy = grid.world_to_cell(center)
        except IndexError:
            return
        for dy in range(-radius_cells, radius_cells + 1):
            for dx in range(-radius_cells, radius_cells + 1):
                if dx * dx + dy * dy > radius_cells * radius_cells:
                    continue
                cell = (cx + dx, cy + dy)
                if grid.in_bounds(*cell):
                    self._failed[cell] = t

    def failed_regions(self, t: int) -> frozenset:
        expiry = self.cfg.failed_region_expiry
        live = {cell for cell, added in self._failed.items() if t - added <= expiry}
        return frozenset(live)


def select_subgoal(goals: SubgoalSet, active_mu: tuple[float, float],
                   planner_distance: Callable[[tuple[float, float]], float],
                   cfg: GuardConfig) -> tuple[float, float]:
    """Pick the goal minimizing planner distance to the reference point plus
    visited/failed penalties. ``planner_distance`` maps a goal point to the
    discovered-map path length (with its own Euclidean fallback). Ties break
    toward the lowest goal index."""
    if not goals.goals:
        raise NoSubgoalError("no subgoals available")
    best_idx, best_cost = 0, math.inf
    for idx, (goal, cell) in enumerate(zip(goals.goals, goals.goal_cells)):
        cost = planner_distance(goal)
        if cell in goals.visited_regions:
            cost += cfg.lambda_visited
        if cell in goals.failed_regions:
            cost += cfg.lambda_failed
        if cost < best_cost:
            best_idx, best_cost = idx, cost
    return goals.goals[best_idx]


def anti_spin_filter(proposed: Action, guard: GuardState, cfg: GuardConfig,
                     forward_viable: bool = True) -> Action:
    """Suppress pure turns once the spin budget is exhausted, substituting a
    translation toward a resampled subgoal. The resample request is surfaced
    through ``guard.resample_requested``.

    When forward motion is blocked on the known map the turn itself is the
    only way to satisfy the translation margin, so it passes through but
    still carries the resample request."""
    if proposed in (Action.LEFT, Action.RIGHT) and guard.spin_budget >= cfg.spin_cap:
        guard.resample_requested = True
        if forward_viable:
            return Action.FORWARD
    return proposed


# occluded pursuit gets a longer leash: d_best legitimately plateaus while
# the planner detours around known walls
_OCCLUDED_STALL_FACTOR = 3


def update_stall(guard: GuardState, ctx: ExecutiveContext, cfg: GuardConfig, *,
                 distance_to_active: Optional[float] = None,
                 has_alternative: bool = False,
                 verify_radius: float = 0.8,
                 candidate_visible: bool = False) -> StallVerdict:
    """Evaluate the physical and semantic stall conditions and pick the
    intervention by candidate proximity, visibility, and strength. Counters
    reset when a verdict fires so interventions do not retrigger every step.

    Close-range verification is scanning by design: while the active
    candidate is still producing hits in Verify/FinalApproach, low
    translation is progress, not a stall, so no verdict fires there.
    Saturated approach progress escalates to verification only when the
    candidate is in view or already within the verify radius; an occluded
    plateau is usually a detour, so it only fails over on the longer fuse."""
    verifying = ctx.state in (ExecutiveState.VERIFY, ExecutiveState.FINAL_APPROACH)
    if verifying and ctx.target_hits >= 1:
        guard.reset_stall()
        return StallVerdict.NONE

    committed = ctx.state in Q_COMMIT
    physical = guard.stall_counter >= cfg.stall_steps
    near = distance_to_active is not None and distance_to_active <= verify_radius
    semantic_fuse = cfg.stall_steps
    if committed and not (candidate_visible or near):
        semantic_fuse = _OCCLUDED_STALL_FACTOR * cfg.stall_steps
    semantic = committed and guard.semantic_counter >= semantic_fuse
    if not (physical or semantic):
        return StallVerdict.NONE

    guard.reset_stall()
    if (ctx.state is ExecutiveState.APPROACH and (candidate_visible or near)):
        return StallVerdict.TRIGGER_VERIFY
    if committed and has_alternative:
        return StallVerdict.TRIGGER_FAILOVER
    return StallVerdict.TRIGGER_RECOVERY


def verified_stop(c: Candidate, ctx: ExecutiveContext, cfg: FseConfig) -> bool:
    """Sole authority for emitting Stop; delegates to the verified gate."""
    return check_verified_gate(c, ctx, cfg)


def intercept_stop(proposed: Action, state: Optional[ExecutiveState],
                   gate_ok: bool) -> Action:
    """Let Stop through only from Success with the gate satisfied; any other
    Stop becomes a heading reset (single left turn)."""
    if proposed is not Action.STOP:
        return proposed
    if state is ExecutiveState.SUCCESS and gate_ok:
        return Action.STOP
    return Action.LEFT


def steer_to_waypoint(pose: Pose, waypoint: tuple[float, float],
                      cfg: GuardConfig) -> Action:
    """Turn toward the waypoint when the heading error exceeds the alignment
    threshold, otherwise drive forward."""
    err = angle_diff(bearing_to(pose, waypoint), pose.theta)
    if abs(err) > cfg.heading_align:
        return Action.LEFT if err > 0 else Action.RIGHT
    return Action.FORWARD


def dock_action(pose: Pose, target: tuple[float, float], forward_step: float,
                cfg: GuardConfig) -> Action:
    """Close-range approach: align, then step forward only while it strictly
    reduces distance; otherwise hold position with a scanning turn."""
    d = math.hypot(target[0] - pose.x, target[1] - pose.y)
    err = angle_diff(bearing_to(pose, target), pose.theta)
    if abs(err) > cfg.heading_align:
        return Action.LEFT if err > 0 else Action.RIGHT
    d_after = math.sqrt(max(0.0, d * d + forward_step * forward_step
                            - 2.0 * d * forward_step * math.cos(err)))
    if d_after < d - 1e-9:
        return Action.FORWARD
    return Action.LEFT  # scan in place; evidence keeps accumulating


def pick_escape_heading(grid: OccupancyGrid, pose: Pose, n_rays: int = 12,
                        max_range: float = 3.0) -> float:
    """Heading of the longest free arc on the discovered map. Unknown cells
    terminate a ray (conservative escape). Ties prefer the smallest turn."""
    step = grid.cell_size * 0.5
    n_steps = max(1, int(max_range / step))
    offsets = sorted((k * 2.0 * math.pi / n_rays for k in range(n_rays)),
                     key=lambda off: (abs(angle_diff(pose.theta + off, pose.theta)), off))
    best_heading, best_clear = pose.theta, -1.0
    for off in offsets:
        heading = pose.theta + off
        cos_h, sin_h = math.cos(heading), math.sin(heading)
        clear = 0.0
        for k in range(1, n_steps + 1):
            px, py = pose.x + cos_h * k * step, pose.y + sin_h * k * step
            try:
                ix, iy = grid.world_to_cell((px, py))
            except IndexError:
                break
            if grid.cells[iy, ix] != int(CellState.FREE):
                break
            clear = k * step
        if clear > best_clear + 1e-9:
            best_heading, best_clear = heading, clear
    return best_heading


def recovery_action(pose: Pose, discovered: OccupancyGrid, cfg: GuardConfig) -> Action:
    """Escape motion: rotate toward the largest free arc, then push forward."""
    desired = pick_escape_heading(discovered, pose)
    err = angle_diff(desired, pose.theta)
    if abs(err) > cfg.heading_align:
        return Action.LEFT if err > 0 else Action.RIGHT
    return Action.FORWARD
