import math

import numpy as np
import pytest

from consistnav.control import (GuardConfig, GuardState, NoSubgoalError,
                                RegionTracker, StallVerdict, SubgoalSet,
                                anti_spin_filter, dock_action, intercept_stop,
                                pick_escape_heading, recovery_action,
                                select_subgoal, steer_to_waypoint, update_stall,
                                verified_stop)
from consistnav.executive import ExecutiveContext, ExecutiveState, FseConfig
from consistnav.geometry import Action, CellState, OccupancyGrid, Pose
from consistnav.memory import Candidate

S = ExecutiveState


# -- subgoal selection ---------------------------------------------------------

def _subgoals(goals, visited=(), failed=()):
    cells = [(int(g[0] * 10), int(g[1] * 10)) for g in goals]
    return SubgoalSet(goals=list(goals), goal_cells=cells,
                      visited_regions=frozenset(visited),
                      failed_regions=frozenset(failed))


def test_select_subgoal_singleton():
    goals = _subgoals([(1.0, 1.0)])
    chosen = select_subgoal(goals, (0, 0), lambda g: 1.0, GuardConfig())
    assert chosen == (1.0, 1.0)


def test_select_subgoal_penalizes_failed_region():
    # two equidistant goals; the one in a failed region loses
    goals = _subgoals([(1.0, 0.0), (0.0, 1.0)], failed={(10, 0)})
    chosen = select_subgoal(goals, (0, 0), lambda g: 2.0, GuardConfig())
    assert chosen == (0.0, 1.0)


def test_select_subgoal_visited_penalty_hand_case():
    # distances 2.0 and 2.5; nearer goal visited with lambda_v = 1.0
    dists = {(1.0, 0.0): 2.0, (0.0, 1.0): 2.5}
    goals = _subgoals([(1.0, 0.0), (0.0, 1.0)], visited={(10, 0)})
    chosen = select_subgoal(goals, (0, 0), lambda g: dists[g],
                            GuardConfig(lambda_visited=1.0))
    assert chosen == (0.0, 1.0)  # 2.5 < 2.0 + 1.0


def test_select_subgoal_tie_breaks_by_index():
    goals = _subgoals([(1.0, 0.0), (0.0, 1.0)])
    chosen = select_subgoal(goals, (0, 0), lambda g: 3.0, GuardConfig())
    assert chosen == (1.0, 0.0)


def test_select_subgoal_empty_raises():
    with pytest.raises(NoSubgoalError):
        select_subgoal(_subgoals([]), (0, 0), lambda g: 0.0, GuardConfig())


def test_select_subgoal_never_picks_failed_among_equals():
    cfg = GuardConfig()
    goals = _subgoals([(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)],
                      failed={(10, 0), (30, 0)})
    chosen = select_subgoal(goals, (0, 0), lambda g: 5.0, cfg)
    assert chosen == (2.0, 0.0)


# -- anti-spin -------------------------------------------------------------------

def test_anti_spin_passes_under_budget():
    guard = GuardState(spin_budget=0)
    assert anti_spin_filter(Action.LEFT, guard, GuardConfig()) is Action.LEFT
    assert not guard.resample_requested


def test_anti_spin_substitutes_over_budget():
    cfg = GuardConfig()
    guard = GuardState(spin_budget=cfg.spin_cap + 1)
    out = anti_spin_filter(Action.RIGHT, guard, cfg)
    assert out is Action.FORWARD
    assert guard.resample_requested


def test_anti_spin_lets_turn_through_when_forward_blocked():
    cfg = GuardConfig()
    guard = GuardState(spin_budget=cfg.spin_cap + 1)
    out = anti_spin_filter(Action.RIGHT, guard, cfg, forward_viable=False)
    assert out is Action.RIGHT
    assert guard.resample_requested  # still asks for a new subgoal


def test_spin_budget_resets_after_translation():
    cfg = GuardConfig()
    guard = GuardState(last_pose=Pose(0, 0, 0), spin_budget=cfg.spin_cap + 2)
    guard.note_motion(Pose(0.25, 0, 0), cfg)
    assert guard.spin_budget == 0


def test_spin_budget_counts_pure_turns():
    cfg = GuardConfig()
    guard = GuardState(last_pose=Pose(0, 0, 0))
    pose = Pose(0, 0, 0)
    for _ in range(4):
        pose = pose.rotated(math.radians(30))
        guard.note_motion(pose, cfg)
    assert guard.spin_budget == 4
    assert guard.stall_counter == 4


# -- stall detection ----------------------------------------------------------------

def test_stall_below_threshold_is_none():
    cfg = GuardConfig()
    guard = GuardState(stall_counter=cfg.stall_steps - 1)
    ctx = ExecutiveContext(state=S.APPROACH, active_candidate=0)
    assert update_stall(guard, ctx, cfg) is StallVerdict.NONE


def test_stall_near_candidate_triggers_verify():
    cfg = GuardConfig()
    guard = GuardState(stall_counter=cfg.stall_steps)
    ctx = ExecutiveContext(state=S.APPROACH, active_candidate=0)
    verdict = update_stall(guard, ctx, cfg, distance_to_active=0.6,
                           has_alternative=True, verify_radius=0.8)
    assert verdict is StallVerdict.TRIGGER_VERIFY
    assert guard.stall_counter == 0  # counters reset when a verdict fires


def test_stall_with_alternative_triggers_failover():
    cfg = GuardConfig()
    guard = GuardState(stall_counter=cfg.stall_steps)
    ctx = ExecutiveContext(state=S.APPROACH, active_candidate=0)
    verdict = update_stall(guard, ctx, cfg, distance_to_active=3.0,
                           has_alternative=True, verify_radius=0.8)
    assert verdict is StallVerdict.TRIGGER_FAILOVER


def test_stall_without_alternative_triggers_recovery():
    cfg = GuardConfig()
    guard = GuardState(stall_counter=cfg.stall_steps)
    ctx = ExecutiveContext(state=S.SEARCH)
    assert update_stall(guard, ctx, cfg) is StallVerdict.TRIGGER_RECOVERY


def test_semantic_stall_fires_while_circling():
    # agent keeps translating but d_best never improves: the semantic
    # counter must fire even though the physical counter stays at zero
    cfg = GuardConfig()
    guard = GuardState(last_pose=Pose(0, 0, 0))
    ctx = ExecutiveContext(state=S.APPROACH, active_candidate=0)
    pose = Pose(0, 0, 0)
    verdicts = []
    for k in range(cfg.stall_steps + 1):
        pose = pose.moved(0.25, 0.0)
        guard.note_motion(pose, cfg)
        guard.note_best_distance(2.0, cfg)  # flat
        verdicts.append(update_stall(guard, ctx, cfg, distance_to_active=2.0,
                                     has_alternative=False,
                                     candidate_visible=True))
    assert guard.stall_counter == 0
    assert any(v is not StallVerdict.NONE for v in verdicts)


def test_occluded_semantic_stall_uses_longer_fuse():
    cfg = GuardConfig()
    guard = GuardState()
    ctx = ExecutiveContext(state=S.APPROACH, active_candidate=0)
    guard.semantic_counter = cfg.stall_steps  # would fire if visible
    verdict = update_stall(guard, ctx, cfg, distance_to_active=3.0,
                           candidate_visible=False)
    assert verdict is StallVerdict.NONE
    guard.semantic_counter = 3 * cfg.stall_steps
    verdict = update_stall(guard, ctx, cfg, distance_to_active=3.0,
                           candidate_visible=False)
    assert verdict is not StallVerdict.NONE


def test_verification_scanning_suppresses_stall_while_hits_accrue():
    cfg = GuardConfig()
    guard = GuardState(stall_counter=cfg.stall_steps + 5)
    ctx = ExecutiveContext(state=S.VERIFY, active_candidate=0)
    ctx.target_hits = 2
    assert update_stall(guard, ctx, cfg, distance_to_active=0.3) is StallVerdict.NONE
    ctx.target_hits = 0
    guard.stall_counter = cfg.stall_steps + 5
    assert update_stall(guard, ctx, cfg, distance_to_active=0.3) is not StallVerdict.NONE


# -- stop interception -----------------------------------------------------------------

def test_intercept_stop_table():
    assert intercept_stop(Action.STOP, S.SEARCH, False) is Action.LEFT
    assert intercept_stop(Action.STOP, S.SUCCESS, True) is Action.STOP
    assert intercept_stop(Action.STOP, S.SUCCESS, False) is Action.LEFT
    assert intercept_stop(Action.STOP, None, True) is Action.LEFT
    assert intercept_stop(Action.FORWARD, S.SEARCH, False) is Action.FORWARD
    assert intercept_stop(Action.LEFT, S.SUCCESS, True) is Action.LEFT


def test_verified_stop_delegates_to_gate():
    cfg = FseConfig()
    c = Candidate(candidate_id=0, mu=(0, 0), confidence=0.5, target_obs=3,
                  nontarget_obs=0, itm_history=[0.2])
    ctx = ExecutiveContext(state=S.SUCCESS, active_candidate=0)
    ctx.target_hits = 2
    ctx.kappa = 0.4
    ctx.best_distance = 0.2
    assert verified_stop(c, ctx, cfg)
    ctx.best_distance = 0.5
    assert not verified_stop(c, ctx, cfg)


# -- steering -------------------------------------------------------------------------

def test_steer_forward_when_aligned():
    cfg = GuardConfig()
    assert steer_to_waypoint(Pose(0, 0, 0), (2.0, 0.1), cfg) is Action.FORWARD


def test_steer_turns_left_for_positive_bearing():
    cfg = GuardConfig()
    assert steer_to_waypoint(Pose(0, 0, 0), (0.0, 2.0), cfg) is Action.LEFT


def test_steer_turns_right_for_negative_bearing():
    cfg = GuardConfig()
    assert steer_to_waypoint(Pose(0, 0, 0), (0.0, -2.0), cfg) is Action.RIGHT


def test_dock_advances_only_while_improving():
    cfg = GuardConfig()
    # far and aligned: forward improves
    assert dock_action(Pose(0, 0, 0), (1.0, 0.0), 0.25, cfg) is Action.FORWARD
    # closer than half a step: forward overshoots, so scan instead
    assert dock_action(Pose(0, 0, 0), (0.1, 0.0), 0.25, cfg) is Action.LEFT
    # misaligned: turn first
    assert dock_action(Pose(0, 0, 0), (0.0, 1.0), 0.25, cfg) is Action.LEFT


# -- regions and recovery ------------------------------------------------------------

def test_region_tracker_expiry():
    cfg = GuardConfig(failed_region_expiry=100)
    tracker = RegionTracker(cfg)
    grid = OccupancyGrid(20, 20, 0.1)
    tracker.mark_failed_region(grid, (1.0, 1.0), t=0)
    assert (10, 10) in tracker.failed_regions(50)
    assert (10, 10) not in tracker.failed_regions(101)


def test_region_tracker_radius():
    cfg = GuardConfig(failed_region_radius=0.5)
    tracker = RegionTracker(cfg)
    grid = OccupancyGrid(40, 40, 0.1)
    tracker.mark_failed_region(grid, (2.0, 2.0), t=0)
    failed = tracker.failed_regions(0)
    assert (20, 20) in failed
    assert (25, 20) in failed       # 0.5 m away
    assert (27, 20) not in failed   # 0.7 m away


def test_escape_heading_prefers_open_space():
    grid = OccupancyGrid(20, 20, 0.1)
    grid.cells[:, 12:] = int(CellState.OCCUPIED)  # east half walled
    pose = Pose(1.0, 1.0, 0.0)  # facing the wall
    heading = pick_escape_heading(grid, pose)
    # escaping must not keep pointing east into the wall
    assert abs(math.cos(heading)) < 0.99 or math.cos(heading) < 0


def test_recovery_action_turns_then_drives():
    grid = OccupancyGrid(20, 20, 0.1)
    grid.cells[:, 12:] = int(CellState.OCCUPIED)
    pose = Pose(1.0, 1.0, 0.0)
    first = recovery_action(pose, grid, GuardConfig())
    assert first in (Action.LEFT, Action.RIGHT)
    # open space: every ray caps at max range, ties keep the current heading
    open_grid = OccupancyGrid(70, 70, 0.1)
    pose_open = Pose(3.5, 3.5, 1.0)
    assert recovery_action(pose_open, open_grid, GuardConfig()) is Action.FORWARD
