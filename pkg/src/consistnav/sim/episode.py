"""Per-episode agent loop for every ablation variant.

All variants share the mapper, detector, frontier finder, planner, and
waypoint follower; variants differ only in which executive pieces run:

* Baseline: chase the latest confident detection, stop on arrival.
* PCM: candidate memory replaces raw detections as the pursuit target.
* PCM_FSEC: the state machine and verified-stop gate, no action guards.
* Full: everything, including anti-spin, stall detection, and recovery.
"""

from __future__ import annotations

import json
import math
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Optional

import numpy as np

from ..control import (GuardState, RegionTracker, StallVerdict, SubgoalSet,
                       anti_spin_filter, dock_action, intercept_stop,
                       recovery_action, select_subgoal, steer_to_waypoint,
                       update_stall, verified_stop)
from ..evaluation import (EpisodeRecord, Outcome, classify_outcome,
                          shortest_path_oracle, spl_term)
from ..executive import (ActiveObservation, ExecutiveContext, ExecutiveState,
                         FseConfig, Intent, IntentKind, Q_COMMIT, StepSignals,
                         step_state)
from ..geometry import (Action, CellState, OccupancyGrid, Pose, angle_diff,
                        bearing_to, euclidean_distance)
from ..memory import CandidateMemory, consistency_score, update_belief
from ..scenario import Scenario
from .dynamics import step_dynamics
from .frontiers import detect_frontiers, frontier_mask
from .planner import distance_field, nearest_free_cell, plan_path, ray_clear_strict
from .sensing import (DetectorConfig, grid_ray_clear, synth_detect,
                      update_discovered_map, visible_objects)

if TYPE_CHECKING:  # avoids a config <-> sim import cycle
    from ..config import RunConfig


class Variant(Enum):
    BASELINE = "Baseline"
    PCM = "PCM"
    PCM_FSEC = "PCM_FSEC"
    FULL = "Full"


# non-executive stop rule: halt on arrival near the pursued point
ARRIVAL_RADIUS = 0.3
# non-executive pursuit gate: chase detections at least this confident
BASELINE_CONF_MIN = 0.5
# memory-only pursuit gate: a hypothesis must be confirmed across frames
# before it is worth driving to (single-frame candidates are transients)
PCM_MIN_SUPPORT = 2

_WAYPOINT_LOOKAHEAD = 4     # path cells ahead to steer at
_REPLAN_EVERY = 20          # steps between forced replans
_RESELECT_EVERY = 25        # steps between forced subgoal reselections
_OFF_PATH_DIST = 0.45       # m from the path before replanning
_DOCK_RANGE = 0.5           # m, switch from path following to direct docking


class _Navigator:
    """Waypoint following over the discovered map, shared by all variants."""

    def __init__(self, discovered: OccupancyGrid, cfg: RunConfig) -> None:
        self.discovered = discovered
        self.cfg = cfg
        self.path: Optional[list[tuple[int, int]]] = None
        self.path_i = 0
        self.goal_cell: Optional[tuple[int, int]] = None
        self.steps_since_plan = 0
        self.failed = False   # planner failure on the most recent drive call
        self.collided = False  # the last executed motion hit a wall

    def invalidate(self) -> None:
        self.path = None
        self.path_i = 0
        self.goal_cell = None

    def note_collision(self) -> None:
        self.invalidate()
        self.collided = True

    def drive_to(self, pose: Pose, point: tuple[float, float]) -> Optional[Action]:
        """Steer along a planned path toward a world point; None when no
        route exists on the discovered map."""
        self.failed = False
        grid = self.discovered
        agent_cell = grid.world_to_cell(pose.position)
        goal_cell = nearest_free_cell(grid, point)
        if goal_cell is None:
            self.failed = True
            return None

        self.steps_since_plan += 1
        if (self.path is None or goal_cell != self.goal_cell
                or self.steps_since_plan >= _REPLAN_EVERY
                or self._off_path(pose)
                or self._path_blocked()):
            path = plan_path(grid, agent_cell, goal_cell)
            if path is None:
                self.invalidate()
                self.failed = True
                return None
            self.path = path
            self.path_i = 0
            self.goal_cell = goal_cell
            self.steps_since_plan = 0

        self._advance(pose)
        last = len(self.path) - 1
        if self.path_i >= last:
            waypoint = point
        else:
            # farthest lookahead cell reachable by a corner-respecting ray,
            # so steering never aims across a known wall corner; after a
            # collision fall back to the adjacent path cell to force a turn
            lookahead = 1 if self.collided else _WAYPOINT_LOOKAHEAD
            waypoint = None
            for k in range(min(self.path_i + lookahead, last), self.path_i, -1):
                if ray_clear_strict(grid, agent_cell, self.path[k]):
                    waypoint = self.discovered.cell_center(self.path[k])
                    break
            if waypoint is None:
                waypoint = self.discovered.cell_center(self.path[self.path_i + 1])
        self.collided = False
        return steer_to_waypoint(pose, waypoint, self.cfg.guard)

    def _advance(self, pose: Pose) -> None:
        best_i, best_d = self.path_i, math.inf
        end = min(self.path_i + 8, len(self.path) - 1)
        for i in range(self.path_i, end + 1):
            d = euclidean_distance(pose.position, self.discovered.cell_center(self.path[i]))
            if d < best_d:
                best_i, best_d = i, d
        self.path_i = best_i

    def _off_path(self, pose: Pose) -> bool:
        if self.path is None:
            return True
        near = self.discovered.cell_center(self.path[self.path_i])
        return euclidean_distance(pose.position, near) > _OFF_PATH_DIST

    def _path_blocked(self) -> bool:
        if self.path is None:
            return True
        cells = self.discovered.cells
        end = min(self.path_i + _WAYPOINT_LOOKAHEAD, len(self.path) - 1)
        return any(cells[iy, ix] != int(CellState.FREE)
                   for ix, iy in self.path[self.path_i:end + 1])


class _SubgoalPicker:
    """Caches frontier subgoal selection between re-selection events."""

    def __init__(self, discovered: OccupancyGrid, regions: RegionTracker,
                 cfg: RunConfig) -> None:
        self.discovered = discovered
        self.regions = regions
        self.cfg = cfg
        self.goal: Optional[tuple[float, float]] = None
        self.steps_since_select = 0
        self.context_key: Optional[tuple] = None

    def pick(self, pose: Pose, frontiers: list[tuple[float, float]],
             reference: tuple[float, float], t: int,
             extra_goals: Optional[list[tuple[float, float]]] = None,
             context_key: tuple = ()) -> Optional[tuple[float, float]]:
        """Current subgoal, re-selected when stale, reached, invalidated, or
        when the pursuit context changed."""
        self.steps_since_select += 1
        if (self.goal is None or context_key != self.context_key
                or self.steps_since_select >= _RESELECT_EVERY
                or euclidean_distance(pose.position, self.goal) < ARRIVAL_RADIUS
                or not self._still_valid()):
            self.goal = self._select(frontiers, reference, t, extra_goals or [])
            self.steps_since_select = 0
            self.context_key = context_key
        return self.goal

    def _still_valid(self) -> bool:
        if self.goal is None:
            return False
        mask = frontier_mask(self.discovered)
        try:
            ix, iy = self.discovered.world_to_cell(self.goal)
        except IndexError:
            return False
        # goals adjacent to the candidate are not frontier cells; keep them
        return bool(mask[iy, ix]) or self.context_key != ("search",)

    def _select(self, frontiers: list[tuple[float, float]],
                reference: tuple[float, float], t: int,
                extra_goals: list[tuple[float, float]]) -> Optional[tuple[float, float]]:
        goals = list(extra_goals) + list(frontiers)
        if not goals:
            return None
        grid = self.discovered
        cells = []
        for g in goals:
            try:
                cells.append(grid.world_to_cell(g))
            except IndexError:
                cells.append((-1, -1))
        ref_cell = nearest_free_cell(grid, reference)
        field = distance_field(grid, ref_cell) if ref_cell is not None else None

        def planner_distance(goal: tuple[float, float]) -> float:
            if field is not None:
                try:
                    ix, iy = grid.world_to_cell(goal)
                except IndexError:
                    return euclidean_distance(goal, reference)
                d = field[iy, ix]
                if math.isfinite(d):
                    return float(d) * grid.cell_size
            return euclidean_distance(goal, reference)

        subgoals = SubgoalSet(goals=goals, goal_cells=cells,
                              visited_regions=frozenset(self.regions.visited),
                              failed_regions=self.regions.failed_regions(t))
        return select_subgoal(subgoals, reference, planner_distance, self.cfg.guard)


def _round6(x: Optional[float]) -> Optional[float]:
    return None if x is None else round(float(x), 6)


def run_episode(scenario: Scenario, variant: Variant, cfg: RunConfig, seed: int,
                episode_id: Optional[str] = None,
                traj_path: Optional[str | Path] = None) -> EpisodeRecord:
    """Run one episode to Stop, frontier exhaustion, or the step budget, and
    classify the outcome. Deterministic in (scenario, variant, cfg, seed)."""
    if episode_id is None:
        episode_id = f"{scenario.scenario_id}:{variant.value}:{seed}"

    world = scenario.grid
    ep_cfg = cfg.episode
    det_cfg = cfg.detector
    fse_cfg = cfg.fse
    guard_cfg = cfg.guard

    start_cell = world.world_to_cell(scenario.start.position)
    l_star = shortest_path_oracle(world, start_cell, scenario.targets(),
                                  ep_cfg.success_radius)
    if l_star is None:
        record = EpisodeRecord(
            episode_id=episode_id, scenario_id=scenario.scenario_id,
            variant=variant.value, seed=seed, outcome=Outcome.INFEASIBLE.value,
            steps=0, path_length=0.0, shortest_path=None, spl_term=0.0,
            stop_step=None, final_state=None)
        if traj_path is not None:
            Path(traj_path).write_text("", encoding="utf-8")
            record.trajectory_path = str(traj_path)
        return record

    rng = np.random.default_rng(seed)
    pose = scenario.start
    discovered = OccupancyGrid(world.width, world.height, world.cell_size,
                               fill=CellState.UNKNOWN)

    use_memory = variant is not Variant.BASELINE
    use_fse = variant in (Variant.PCM_FSEC, Variant.FULL)
    use_guards = variant is Variant.FULL

    memory = CandidateMemory(cfg.memory) if use_memory else None
    ctx = ExecutiveContext() if use_fse else None
    guard = GuardState(last_pose=pose) if use_guards else None
    regions = RegionTracker(guard_cfg)
    nav = _Navigator(discovered, cfg)
    picker = _SubgoalPicker(discovered, regions, cfg)

    trajectory: list[dict] = []
    path_length = 0.0
    stop_step: Optional[int] = None
    end_reason = "timeout"
    baseline_target = None          # latest qualifying detection (Baseline)
    pending_saturated = False
    pending_failover = False
    progress_flag = True
    search_recovery = 0             # remaining Search-state escape steps
    exhausted_scans = 0
    pcm_close_steps = 0             # steps spent inside the arrival radius

    for t in range(ep_cfg.max_steps):
        mask = update_discovered_map(discovered, world, pose,
                                     det_cfg.sensing_range, det_cfg.fov)
        regions.mark_visited(world.world_to_cell(pose.position))
        vis_objs = visible_objects(world, scenario.objects, pose,
                                   det_cfg.sensing_range, det_cfg.fov)
        observations = synth_detect(vis_objs, mask, pose, world, det_cfg, rng, t)

        active_obs: Optional[ActiveObservation] = None
        if memory is not None:
            assoc = [(obs, memory.integrate(obs)) for obs in observations]
            if ctx is not None and ctx.active_candidate is not None:
                hits = [o for o, cid in assoc if cid == ctx.active_candidate]
                if hits:
                    best = max(hits, key=lambda o: (o.is_target, o.confidence))
                    active_obs = ActiveObservation(
                        y=1 if best.is_target else 0,
                        confidence=best.confidence, itm=best.itm_score)
                    if best.is_target:
                        ctx.record_hit(t, best.confidence)
        if ctx is not None:
            ctx.refresh_hit_window(t, fse_cfg)
            if ctx.active_candidate is not None:
                mu = memory.get(ctx.active_candidate).mu
                ctx.note_distance(euclidean_distance(pose.position, mu))
            # verify-stage failure: the hypothesis point is in clear view on
            # the agent's own map yet produced no matching detection
            if (ctx.state in (ExecutiveState.VERIFY, ExecutiveState.FINAL_APPROACH)
                    and ctx.active_candidate is not None and active_obs is None):
                cand = memory.get(ctx.active_candidate)
                if _expected_visible(discovered, pose, cand.mu, det_cfg):
                    update_belief(cand, 0, 1, cfg.memory)
                    cand.consistency = consistency_score(cand, cfg.memory)

        ranked = memory.ranked_viable(t) if memory is not None else []
        has_frontiers = bool(frontier_mask(discovered).any())

        action: Optional[Action] = None
        filtered_from: Optional[str] = None
        resample = False
        recovery_active = False
        pursuit: Optional[tuple[float, float]] = None
        intent: Optional[Intent] = None

        if variant is Variant.BASELINE:
            fresh = [o for o in observations
                     if o.is_target and o.confidence >= BASELINE_CONF_MIN]
            if fresh:
                baseline_target = max(fresh, key=lambda o: o.confidence)
            if baseline_target is not None:
                pursuit = baseline_target.world_pos
                if euclidean_distance(pose.position, pursuit) <= ARRIVAL_RADIUS:
                    action = Action.STOP
                else:
                    action = nav.drive_to(pose, pursuit)
                    if action is None:
                        baseline_target = None  # unreachable; back to frontiers
                        pursuit = None
            if action is None:
                action = _explore(nav, picker, pose, discovered, regions, t, cfg)

        elif variant is Variant.PCM:
            confirmed = [cid for cid, _ in ranked
                         if memory.get(cid).target_obs >= PCM_MIN_SUPPORT]
            if confirmed:
                top_id = confirmed[0]
                mu = memory.get(top_id).mu
                pursuit = mu
                d = euclidean_distance(pose.position, mu)
                dock_radius = 0.5 * ep_cfg.forward_step + 0.01
                if d <= ARRIVAL_RADIUS:
                    pcm_close_steps += 1
                else:
                    pcm_close_steps = 0
                if d <= dock_radius or pcm_close_steps > guard_cfg.stall_steps:
                    # as close as the motion quantum allows: declare arrival
                    memory.mark_visited(top_id, t)
                    action = Action.STOP
                elif d <= _DOCK_RANGE:
                    action = dock_action(pose, mu, ep_cfg.forward_step, guard_cfg)
                else:
                    action = nav.drive_to(pose, mu)
            else:
                pcm_close_steps = 0
            if action is None:
                action = _explore(nav, picker, pose, discovered, regions, t, cfg)

        else:  # PCM_FSEC, Full
            dock_complete = (
                ctx.active_candidate is not None
                and ctx.last_distance
                <= min(fse_cfg.r_stop, 0.5 * ep_cfg.forward_step + 0.01))
            signals = StepSignals(
                viable_ranked=ranked, agent_pose=pose,
                new_observation_for_active=active_obs,
                planner_progress=progress_flag,
                frontiers_remaining=has_frontiers,
                approach_saturated=pending_saturated,
                force_failover=pending_failover,
                dock_complete=dock_complete)
            pending_saturated = False
            pending_failover = False

            prev_active = ctx.active_candidate
            prev_state = ctx.state
            ctx, intent = step_state(ctx, signals, memory, fse_cfg, t)
            if ctx.active_candidate != prev_active:
                if guard is not None:
                    guard.reset_semantic()
                nav.invalidate()
            if (ctx.state is ExecutiveState.FAILOVER
                    and prev_state is not ExecutiveState.FAILOVER
                    and ctx.failover_plan is not None
                    and ctx.failover_plan.resolution.value != "dock"
                    and ctx.active_candidate is not None):
                failed_mu = memory.get(ctx.active_candidate).mu
                regions.mark_failed_region(world, failed_mu, t)

            if ctx.active_candidate is not None:
                pursuit = memory.get(ctx.active_candidate).mu

            action, recovery_active = _intent_action(
                intent, ctx, pose, memory, nav, picker, discovered, regions,
                t, cfg, use_guards, search_recovery > 0)
            if search_recovery > 0:
                search_recovery -= 1

        # exploration found nothing: scan briefly if candidates may still
        # escalate, otherwise the episode ends on frontier exhaustion
        if action is None:
            committed = use_fse and ctx.state in Q_COMMIT
            if ranked and not committed and exhausted_scans <= 2 * fse_cfg.persistence:
                exhausted_scans += 1
                action = Action.LEFT
            else:
                end_reason = "frontier_exhaustion"
                _log_step(trajectory, t, pose, None, None, False, False, ctx,
                          memory, intent, pursuit, observations, guard, use_fse,
                          fse_cfg)
                break
        else:
            exhausted_scans = 0

        action = _avoid_known_wall(action, pose, discovered, ep_cfg)

        if use_guards:
            raw = action
            forward_ok = not _forward_blocked(discovered, pose, ep_cfg.forward_step)
            action = anti_spin_filter(action, guard, guard_cfg,
                                      forward_viable=forward_ok)
            if guard.resample_requested:
                if action is not raw:
                    filtered_from = raw.value
                resample = True
                guard.resample_requested = False
                nav.invalidate()
                picker.goal = None  # force a fresh subgoal choice
            gate_ok = False
            if ctx.state is ExecutiveState.SUCCESS and ctx.active_candidate is not None:
                gate_ok = verified_stop(memory.get(ctx.active_candidate), ctx, fse_cfg)
            final = intercept_stop(action, ctx.state, gate_ok)
            if final is not action:
                filtered_from = action.value
            action = final

        _log_step(trajectory, t, pose, action, filtered_from, resample,
                  recovery_active, ctx, memory, intent, pursuit, observations,
                  guard, use_fse, fse_cfg)

        if action is Action.STOP:
            stop_step = t
            end_reason = "stop"
            break

        prev_pose = pose
        pose, collided = step_dynamics(world, pose, action, ep_cfg)
        if collided:
            nav.note_collision()
            _learn_from_contact(discovered, world, pose, ep_cfg.forward_step)
        moved = euclidean_distance(prev_pose.position, pose.position)
        path_length += moved
        regions.mark_visited(world.world_to_cell(pose.position))
        progress_flag = moved >= guard_cfg.delta_move if use_guards else not nav.failed

        if use_guards:
            guard.note_motion(pose, guard_cfg)
            if ctx.state in Q_COMMIT and ctx.active_candidate is not None:
                guard.note_best_distance(ctx.best_distance, guard_cfg)
            dist_to_active = None
            has_alternative = False
            candidate_visible = False
            if ctx.active_candidate is not None and ctx.active_candidate in memory.candidates:
                mu = memory.get(ctx.active_candidate).mu
                dist_to_active = euclidean_distance(pose.position, mu)
                has_alternative = any(cid != ctx.active_candidate for cid, _ in ranked)
                candidate_visible = _expected_visible(discovered, pose, mu, det_cfg)
            verdict = update_stall(guard, ctx, guard_cfg,
                                   distance_to_active=dist_to_active,
                                   has_alternative=has_alternative,
                                   verify_radius=fse_cfg.r_v,
                                   candidate_visible=candidate_visible)
            if verdict is StallVerdict.TRIGGER_VERIFY:
                pending_saturated = True
            elif verdict in (StallVerdict.TRIGGER_FAILOVER, StallVerdict.TRIGGER_RECOVERY):
                if ctx.state in Q_COMMIT:
                    pending_failover = True
                elif ctx.state is ExecutiveState.SEARCH:
                    search_recovery = guard_cfg.recovery_budget
            if ctx.state is ExecutiveState.FAILOVER and not progress_flag:
                # escape budget about to lapse: penalize and mark the region
                if (ctx.failover_steps_used + 1 >= fse_cfg.failover_budget
                        and ctx.active_candidate is not None):
                    mu = memory.get(ctx.active_candidate).mu
                    memory.record_pursuit_failure(ctx.active_candidate, t)
                    regions.mark_failed_region(world, mu, t)

    steps = len(trajectory)
    stop_pose = None
    if stop_step is not None and trajectory:
        last = trajectory[-1]["pose"]
        stop_pose = Pose(last["x"], last["y"], last["theta"])

    outcome = classify_outcome(
        scenario, trajectory, det_cfg, feasible=True, stop_pose=stop_pose,
        stop_step=stop_step, success_radius=ep_cfg.success_radius,
        end_reason=end_reason)

    record = EpisodeRecord(
        episode_id=episode_id, scenario_id=scenario.scenario_id,
        variant=variant.value, seed=seed, outcome=outcome.value, steps=steps,
        path_length=path_length, shortest_path=l_star,
        spl_term=spl_term(outcome is Outcome.SUCCESS, path_length, l_star),
        stop_step=stop_step,
        final_state=ctx.state.value if ctx is not None else None)

    if traj_path is not None:
        lines = [json.dumps(entry, separators=(",", ":")) for entry in trajectory]
        Path(traj_path).write_text("\n".join(lines) + ("\n" if lines else ""),
                                   encoding="utf-8")
        record.trajectory_path = str(traj_path)
    return record


def _forward_blocked(discovered: OccupancyGrid, pose: Pose,
                     forward_step: float) -> bool:
    """Whether a forward step crosses a cell the agent already knows is
    Occupied (Unknown cells pass; probing the frontier is allowed)."""
    dx = math.cos(pose.theta) * forward_step
    dy = math.sin(pose.theta) * forward_step
    sample = discovered.cell_size * 0.5
    n = max(1, int(math.ceil(forward_step / sample)))
    occ = int(CellState.OCCUPIED)
    for k in range(1, n + 1):
        frac = min(1.0, k * sample / forward_step)
        point = (pose.x + dx * frac, pose.y + dy * frac)
        try:
            ix, iy = discovered.world_to_cell(point)
        except IndexError:
            return True
        if discovered.cells[iy, ix] == occ:
            return True
    return False


def _heading_clearance(discovered: OccupancyGrid, pose: Pose, dtheta: float,
                       max_range: float = 1.0) -> float:
    """Free-ray length at heading+dtheta on the known map (Unknown passes)."""
    heading = pose.theta + dtheta
    step = discovered.cell_size * 0.5
    occ = int(CellState.OCCUPIED)
    clear = 0.0
    for k in range(1, int(max_range / step) + 1):
        point = (pose.x + math.cos(heading) * k * step,
                 pose.y + math.sin(heading) * k * step)
        try:
            ix, iy = discovered.world_to_cell(point)
        except IndexError:
            break
        if discovered.cells[iy, ix] == occ:
            break
        clear = k * step
    return clear


def _avoid_known_wall(action: Optional[Action], pose: Pose,
                      discovered: OccupancyGrid, ep_cfg) -> Optional[Action]:
    """Replace a forward step into a mapped wall with a turn toward the
    freer side (ties turn left). Low-level motion sanity for all variants."""
    if action is not Action.FORWARD:
        return action
    if not _forward_blocked(discovered, pose, ep_cfg.forward_step):
        return action
    left = _heading_clearance(discovered, pose, ep_cfg.turn_angle)
    right = _heading_clearance(discovered, pose, -ep_cfg.turn_angle)
    return Action.LEFT if left >= right else Action.RIGHT


def _learn_from_contact(discovered: OccupancyGrid, world: OccupancyGrid,
                        pose: Pose, forward_step: float) -> None:
    """A collision reveals the first blocking cell along the attempted
    motion; fold it into the agent's map."""
    dx = math.cos(pose.theta) * forward_step
    dy = math.sin(pose.theta) * forward_step
    sample = world.cell_size * 0.5
    n = max(1, int(math.ceil(forward_step / sample)))
    for k in range(1, n + 1):
        frac = min(1.0, k * sample / forward_step)
        point = (pose.x + dx * frac, pose.y + dy * frac)
        try:
            ix, iy = world.world_to_cell(point)
        except IndexError:
            return
        if world.cells[iy, ix] != int(CellState.FREE):
            discovered.cells[iy, ix] = world.cells[iy, ix]
            return


def _expected_visible(discovered: OccupancyGrid, pose: Pose,
                      point: tuple[float, float], det: DetectorConfig) -> bool:
    """Whether the agent, by its own map, should be seeing this point."""
    if euclidean_distance(pose.position, point) > det.sensing_range:
        return False
    if abs(angle_diff(bearing_to(pose, point), pose.theta)) > det.fov / 2.0:
        return False
    try:
        a = discovered.world_to_cell(pose.position)
        b = discovered.world_to_cell(point)
    except IndexError:
        return False
    return grid_ray_clear(discovered, a, b)


def _explore(nav: _Navigator, picker: _SubgoalPicker, pose: Pose,
             discovered: OccupancyGrid, regions: RegionTracker, t: int,
             cfg: RunConfig) -> Optional[Action]:
    """Frontier exploration step. Returns None only when no frontier exists
    at all; if frontiers exist but none is currently drivable, scan in place
    so sensing can open a route."""
    frontiers = detect_frontiers(discovered)
    if not frontiers:
        return None
    goal = picker.pick(pose, frontiers, pose.position, t, context_key=("search",))
    action = nav.drive_to(pose, goal) if goal is not None else None
    if action is None:
        # the chosen frontier is unreachable on the known map; try the rest
        for alt in frontiers:
            if alt == goal:
                continue
            action = nav.drive_to(pose, alt)
            if action is not None:
                picker.goal = alt
                picker.steps_since_select = 0
                break
    return action if action is not None else Action.LEFT


def _intent_action(intent: Intent, ctx: ExecutiveContext, pose: Pose,
                   memory: CandidateMemory, nav: _Navigator,
                   picker: _SubgoalPicker, discovered: OccupancyGrid,
                   regions: RegionTracker, t: int, cfg: RunConfig,
                   use_guards: bool,
                   in_search_recovery: bool) -> tuple[Optional[Action], bool]:
    """Translate the executive intent into a proposed action. Returns
    (action, recovery_active); action None signals frontier exhaustion."""
    kind = intent.kind

    if kind is IntentKind.EMIT_STOP:
        return Action.STOP, False

    if kind is IntentKind.RECOVER:
        if use_guards:
            return recovery_action(pose, discovered, cfg.guard), True
        return Action.LEFT, True  # guardless variants just reset heading

    if kind is IntentKind.EXPLORE_FRONTIER:
        if in_search_recovery and use_guards:
            return recovery_action(pose, discovered, cfg.guard), True
        return _explore(nav, picker, pose, discovered, regions, t, cfg), False

    candidate = memory.get(intent.candidate)
    mu = candidate.mu

    if kind is IntentKind.HOLD_AND_OBSERVE:
        return dock_action(pose, mu, cfg.episode.forward_step, cfg.guard), False

    if kind is IntentKind.APPROACH_CANDIDATE:
        frontiers = detect_frontiers(discovered)
        dock_cell = nearest_free_cell(discovered, mu)
        extra = [discovered.cell_center(dock_cell)] if dock_cell is not None else []
        goal = picker.pick(pose, frontiers, mu, t, extra_goals=extra,
                           context_key=("approach", intent.candidate))
        if goal is None:
            return None, False
        action = nav.drive_to(pose, goal)
        if action is None:
            action = _explore(nav, picker, pose, discovered, regions, t, cfg)
        return action, False

    # VERIFY_CANDIDATE / DOCK_CANDIDATE: close-range pursuit of the
    # candidate point itself
    if euclidean_distance(pose.position, mu) > _DOCK_RANGE:
        action = nav.drive_to(pose, mu)
        if action is not None:
            return action, False
    return dock_action(pose, mu, cfg.episode.forward_step, cfg.guard), False


def _log_step(trajectory: list[dict], t: int, pose: Pose,
              action: Optional[Action], filtered_from: Optional[str],
              resample: bool, recovery_active: bool,
              ctx: Optional[ExecutiveContext], memory: Optional[CandidateMemory],
              intent: Optional[Intent], pursuit: Optional[tuple[float, float]],
              observations: list, guard: Optional[GuardState], use_fse: bool,
              fse_cfg: FseConfig) -> None:
    gate = None
    if (use_fse and ctx is not None and ctx.active_candidate is not None
            and ctx.state in (ExecutiveState.VERIFY, ExecutiveState.FINAL_APPROACH,
                              ExecutiveState.SUCCESS)):
        cand = memory.get(ctx.active_candidate)
        gate = {
            "h": ctx.target_hits,
            "d_best": _round6(ctx.best_distance) if math.isfinite(ctx.best_distance) else None,
            "kappa": _round6(ctx.kappa),
            "m_pos": cand.target_obs,
            "m_neg": cand.nontarget_obs,
            "itm_mean": _round6(cand.itm_mean),
            "passed": bool(ctx.target_hits >= 2
                           and ctx.best_distance <= fse_cfg.r_stop
                           and ctx.kappa >= fse_cfg.tau_conf
                           and cand.target_obs >= fse_cfg.m_obs
                           and cand.target_obs > cand.nontarget_obs
                           and cand.itm_mean >= fse_cfg.tau_itm),
        }

    d_best = None
    if ctx is not None and ctx.active_candidate is not None and math.isfinite(ctx.best_distance):
        d_best = _round6(ctx.best_distance)

    trajectory.append({
        "t": t,
        "pose": {"x": _round6(pose.x), "y": _round6(pose.y),
                 "theta": _round6(pose.theta)},
        "action": action.value if action is not None else None,
        "filtered_from": filtered_from,
        "resample": resample,
        "state": ctx.state.value if ctx is not None else None,
        "intent": intent.kind.value if intent is not None else None,
        "active_candidate": ctx.active_candidate if ctx is not None else None,
        "num_candidates": len(memory) if memory is not None else 0,
        "d_best": d_best,
        "h": ctx.target_hits if ctx is not None else None,
        "k_app": ctx.approach_steps if ctx is not None else None,
        "spin_budget": guard.spin_budget if guard is not None else None,
        "stall_counter": guard.stall_counter if guard is not None else None,
        "recovery_active": recovery_active,
        "pursuit": ([_round6(pursuit[0]), _round6(pursuit[1])]
                    if pursuit is not None else None),
        "gate": gate,
        "observations": [
            {"x": _round6(o.world_pos[0]), "y": _round6(o.world_pos[1]),
             "conf": _round6(o.confidence), "itm": _round6(o.itm_score),
             "is_target_label": o.is_target}
            for o in observations
        ],
    })
