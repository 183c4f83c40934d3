"""Finite-state executive: guarded escalation from search to verified stop.

The controller holds one active candidate at a time and raises commitment
along Search -> Suspect -> Approach -> Verify -> FinalApproach -> Success,
with Failover as the bounded recovery route out of any committed state.
Every transition is guarded by candidate viability, rank persistence,
distance, or verification evidence; Stop is authorized only by the
verified-stop gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .geometry import Pose, euclidean_distance
from .memory import Candidate, CandidateMemory


class ExecutiveError(Exception):
    """Internal-consistency violation; surfaced as an episode abort."""


class ExecutiveState(Enum):
    SEARCH = "Search"
    SUSPECT = "Suspect"
    APPROACH = "Approach"
    VERIFY = "Verify"
    FINAL_APPROACH = "FinalApproach"
    FAILOVER = "Failover"
    SUCCESS = "Success"


Q_COMMIT = frozenset({ExecutiveState.SUSPECT, ExecutiveState.APPROACH,
                      ExecutiveState.VERIFY, ExecutiveState.FINAL_APPROACH})
Q_RETURN = frozenset({ExecutiveState.SEARCH, ExecutiveState.APPROACH,
                      ExecutiveState.VERIFY})

# Position along the escalation chain (Failover sits off-chain).
CHAIN_INDEX = {
    ExecutiveState.SEARCH: 0,
    ExecutiveState.SUSPECT: 1,
    ExecutiveState.APPROACH: 2,
    ExecutiveState.VERIFY: 3,
    ExecutiveState.FINAL_APPROACH: 4,
    ExecutiveState.SUCCESS: 5,
}

_CHAIN_EDGES = {
    (ExecutiveState.SEARCH, ExecutiveState.SUSPECT),
    (ExecutiveState.SUSPECT, ExecutiveState.APPROACH),
    (ExecutiveState.APPROACH, ExecutiveState.VERIFY),
    (ExecutiveState.VERIFY, ExecutiveState.FINAL_APPROACH),
    (ExecutiveState.FINAL_APPROACH, ExecutiveState.SUCCESS),
    # de-escalation for a candidate invalidated before commitment deepens
    (ExecutiveState.SUSPECT, ExecutiveState.SEARCH),
}


def legal_transition(src: ExecutiveState, dst: ExecutiveState) -> bool:
    """Whether (src, dst) is an allowed edge: self-loops, the escalation
    chain, commit-state -> Failover, and Failover -> return states."""
    if src == dst:
        return True
    if (src, dst) in _CHAIN_EDGES:
        return True
    if src in Q_COMMIT and dst == ExecutiveState.FAILOVER:
        return True
    if src == ExecutiveState.FAILOVER and dst in (Q_RETURN | {ExecutiveState.FINAL_APPROACH}):
        return True
    return False


class IntentKind(Enum):
    EXPLORE_FRONTIER = "ExploreFrontier"
    HOLD_AND_OBSERVE = "HoldAndObserve"
    APPROACH_CANDIDATE = "ApproachCandidate"
    VERIFY_CANDIDATE = "VerifyCandidate"
    DOCK_CANDIDATE = "DockCandidate"
    RECOVER = "Recover"
    EMIT_STOP = "EmitStop"


@dataclass(frozen=True)
class Intent:
    kind: IntentKind
    candidate: Optional[int] = None


class FailoverResolution(Enum):
    DOCK = "dock"            # recently verified and close: finish docking
    SWITCH = "switch"        # pursue the best other unfrozen candidate
    RETURN_SEARCH = "search"


@dataclass(frozen=True)
class FailoverPlan:
    resolution: FailoverResolution
    candidate: Optional[int] = None  # switch/dock target


@dataclass
class FseConfig:
    r_v: float = 0.8                 # m, approach->verify radius
    r_extra: float = 0.4             # m, widened radius after long approach
    n_verify: int = 40               # approach steps before radius widens
    r_stop: float = 0.28             # m, verified-stop distance bound
    tau_conf: float = 0.30           # peak-confidence threshold in the gate
    m_obs: int = 3                   # minimum target observations in the gate
    tau_itm: float = 0.12            # mean-ITM threshold in the gate
    hit_window: int = 10             # steps over which hits/peak confidence count
    persistence: int = 3             # stable-top-rank steps for escalation
    strong_confidence: float = 0.55  # immediate Suspect entry threshold
    failover_budget: int = 20        # steps allowed inside Failover (B_r)
    max_failovers: int = 5           # per-episode cap on Failover entries

    def __post_init__(self) -> None:
        if self.r_stop >= self.r_v:
            raise ValueError(f"r_stop ({self.r_stop}) must be < r_v ({self.r_v})")
        for name in ("tau_conf", "tau_itm", "strong_confidence"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0,1], got {v}")


@dataclass(frozen=True)
class ActiveObservation:
    """This step's detector evidence attributed to the active candidate."""

    y: int                 # 1 = target-consistent, 0 = non-target
    confidence: float
    itm: Optional[float] = None


@dataclass
class StepSignals:
    """Per-step guard inputs aggregated for the controller."""

    viable_ranked: list  # [(candidate_id, priority)] descending
    agent_pose: Pose
    new_observation_for_active: Optional[ActiveObservation] = None
    planner_progress: bool = True
    frontiers_remaining: bool = True
    # set by the action guards when pursuit progress has saturated (the
    # alternate trigger for Approach -> Verify)
    approach_saturated: bool = False
    # set by the action guards when a stalled commitment must fail over
    force_failover: bool = False
    # set once docking has closed to the point where one motion step cannot
    # reduce the candidate distance further; gates FinalApproach -> Success
    dock_complete: bool = False


@dataclass
class ExecutiveContext:
    """Running executive state for one episode."""

    state: ExecutiveState = ExecutiveState.SEARCH
    active_candidate: Optional[int] = None
    approach_steps: int = 0                  # k_app
    best_distance: float = math.inf          # d_best, min over the pursuit
    last_distance: float = math.inf          # distance at the latest step
    target_hits: int = 0                     # h over the sliding window
    kappa: float = 0.0                       # max hit confidence in the window
    failover_steps_used: int = 0
    consecutive_top_ranks: int = 0
    stable_rank_steps: int = 0               # top-rank steps while in Suspect
    entered_state_at: int = 0
    failover_entries: int = 0
    failover_plan: Optional[FailoverPlan] = None
    last_semantic_pass: Optional[int] = None
    last_top_candidate: Optional[int] = None
    hit_log: list = field(default_factory=list)  # (step, confidence) pairs

    def begin_pursuit(self, candidate_id: int, t: int,
                      state: ExecutiveState = ExecutiveState.SUSPECT) -> None:
        self.state = state
        self.active_candidate = candidate_id
        self.approach_steps = 0
        self.best_distance = math.inf
        self.last_distance = math.inf
        self.target_hits = 0
        self.kappa = 0.0
        self.stable_rank_steps = 0
        self.entered_state_at = t
        self.last_semantic_pass = None
        self.hit_log.clear()

    def drop_pursuit(self, t: int) -> None:
        self.state = ExecutiveState.SEARCH
        self.active_candidate = None
        self.entered_state_at = t
        self.failover_plan = None
        self.hit_log.clear()
        self.target_hits = 0
        self.kappa = 0.0
        self.best_distance = math.inf
        self.last_distance = math.inf

    def note_distance(self, d: float) -> None:
        self.last_distance = d
        if d < self.best_distance:
            self.best_distance = d

    def record_hit(self, t: int, confidence: float) -> None:
        self.hit_log.append((t, confidence))

    def refresh_hit_window(self, t: int, cfg: FseConfig) -> None:
        """Recompute h and kappa over the trailing window."""
        floor = t - cfg.hit_window
        self.hit_log = [(s, c) for s, c in self.hit_log if s > floor]
        self.target_hits = len(self.hit_log)
        self.kappa = max((c for _, c in self.hit_log), default=0.0)


def check_verified_gate(c: Candidate, ctx: ExecutiveContext, cfg: FseConfig) -> bool:
    """The six-way verified-stop conjunction: enough recent hits, close
    enough best distance, strong enough peak confidence, enough target
    observations, target evidence dominating, and sufficient ITM support."""
    return (ctx.target_hits >= 2
            and ctx.best_distance <= cfg.r_stop
            and ctx.kappa >= cfg.tau_conf
            and c.target_obs >= cfg.m_obs
            and c.target_obs > c.nontarget_obs
            and c.itm_mean >= cfg.tau_itm)


def semantic_subgate(c: Candidate, ctx: ExecutiveContext, cfg: FseConfig) -> bool:
    """Verified-stop conditions minus the geometric best-distance bound;
    gates Verify -> FinalApproach."""
    return (ctx.target_hits >= 2
            and ctx.kappa >= cfg.tau_conf
            and c.target_obs >= cfg.m_obs
            and c.target_obs > c.nontarget_obs
            and c.itm_mean >= cfg.tau_itm)


def enter_failover(ctx: ExecutiveContext, memory: CandidateMemory,
                   cfg: FseConfig, t: int) -> tuple[ExecutiveContext, FailoverPlan]:
    """Route a failed commitment into Failover and pick the recovery plan:
    finish docking a recently verified close candidate, switch to the best
    other unfrozen candidate, or fall back to frontier search. Non-docking
    plans penalize the abandoned candidate."""
    if ctx.state not in Q_COMMIT:
        raise ExecutiveError(f"failover entered from non-commit state {ctx.state.value}")
    active = ctx.active_candidate
    if active is None or active not in memory.candidates:
        raise ExecutiveError("failover entered without a valid active candidate")

    recently_verified = (ctx.last_semantic_pass is not None
                         and t - ctx.last_semantic_pass <= cfg.hit_window)
    budget_left = ctx.failover_entries < cfg.max_failovers

    if budget_left and recently_verified and ctx.last_distance <= cfg.r_v:
        plan = FailoverPlan(FailoverResolution.DOCK, active)
    else:
        alternatives = [cid for cid, _ in memory.ranked_viable(t)
                        if cid != active and not memory.get(cid).frozen]
        if budget_left and alternatives:
            plan = FailoverPlan(FailoverResolution.SWITCH, alternatives[0])
        else:
            plan = FailoverPlan(FailoverResolution.RETURN_SEARCH)

    if plan.resolution is not FailoverResolution.DOCK:
        memory.record_pursuit_failure(active, t)

    ctx.state = ExecutiveState.FAILOVER
    ctx.failover_plan = plan
    ctx.failover_steps_used = 0
    ctx.failover_entries += 1
    ctx.entered_state_at = t
    return ctx, plan


def _resolve_failover(ctx: ExecutiveContext, memory: CandidateMemory,
                      cfg: FseConfig, t: int) -> tuple[ExecutiveContext, Intent]:
    plan = ctx.failover_plan or FailoverPlan(FailoverResolution.RETURN_SEARCH)
    ctx.failover_plan = None

    if plan.resolution is FailoverResolution.DOCK and plan.candidate in memory.candidates:
        ctx.state = ExecutiveState.FINAL_APPROACH
        ctx.entered_state_at = t
        return ctx, Intent(IntentKind.DOCK_CANDIDATE, plan.candidate)

    if plan.resolution is FailoverResolution.SWITCH:
        target = plan.candidate
        viable = memory.viable_set(t)
        if target not in viable:
            ranked = [cid for cid, _ in memory.ranked_viable(t)
                      if cid != ctx.active_candidate]
            target = ranked[0] if ranked else None
        if target is not None:
            ctx.begin_pursuit(target, t, state=ExecutiveState.APPROACH)
            return ctx, Intent(IntentKind.APPROACH_CANDIDATE, target)

    ctx.drop_pursuit(t)
    return ctx, Intent(IntentKind.EXPLORE_FRONTIER)


def step_state(ctx: ExecutiveContext, signals: StepSignals, memory: CandidateMemory,
               cfg: FseConfig, t: int) -> tuple[ExecutiveContext, Intent]:
    """Apply one transition (or self-loop) and return the resulting intent.

    Raises ExecutiveError when the context references a candidate id the
    memory does not contain.
    """
    if (ctx.active_candidate is not None
            and ctx.active_candidate not in memory.candidates):
        raise ExecutiveError(
            f"active candidate {ctx.active_candidate} absent from memory")

    ranked = signals.viable_ranked
    top = ranked[0][0] if ranked else None
    if top is not None and top == ctx.last_top_candidate:
        ctx.consecutive_top_ranks += 1
    elif top is not None:
        ctx.consecutive_top_ranks = 1
    else:
        ctx.consecutive_top_ranks = 0
    ctx.last_top_candidate = top

    state = ctx.state

    if state is ExecutiveState.SUCCESS:
        return ctx, Intent(IntentKind.EMIT_STOP, ctx.active_candidate)

    if state is ExecutiveState.FAILOVER:
        ctx.failover_steps_used += 1
        if signals.planner_progress or ctx.failover_steps_used >= cfg.failover_budget:
            return _resolve_failover(ctx, memory, cfg, t)
        return ctx, Intent(IntentKind.RECOVER, ctx.active_candidate)

    if state is ExecutiveState.SEARCH:
        if top is not None:
            strong = memory.get(top).confidence >= cfg.strong_confidence
            persistent = ctx.consecutive_top_ranks >= cfg.persistence
            if strong or persistent:
                ctx.begin_pursuit(top, t)
                return ctx, Intent(IntentKind.HOLD_AND_OBSERVE, top)
        return ctx, Intent(IntentKind.EXPLORE_FRONTIER)

    # Committed states below; the active candidate is always set here.
    active = ctx.active_candidate
    if active is None:
        raise ExecutiveError(f"state {state.value} requires an active candidate")
    viable_ids = {cid for cid, _ in ranked}

    if signals.force_failover:
        ctx, _ = enter_failover(ctx, memory, cfg, t)
        return ctx, Intent(IntentKind.RECOVER, ctx.active_candidate)

    if active not in viable_ids:
        if state is ExecutiveState.SUSPECT:
            ctx.drop_pursuit(t)
            return ctx, Intent(IntentKind.EXPLORE_FRONTIER)
        ctx, _ = enter_failover(ctx, memory, cfg, t)
        return ctx, Intent(IntentKind.RECOVER, ctx.active_candidate)

    cand = memory.get(active)
    dist = euclidean_distance(signals.agent_pose.position, cand.mu)
    ctx.note_distance(dist)
    if state in (ExecutiveState.VERIFY, ExecutiveState.FINAL_APPROACH):
        if semantic_subgate(cand, ctx, cfg):
            ctx.last_semantic_pass = t

    if state is ExecutiveState.SUSPECT:
        if top == active:
            ctx.stable_rank_steps += 1
        else:
            ctx.stable_rank_steps = 0
        obs = signals.new_observation_for_active
        reconfirmed = obs is not None and obs.y == 1
        if reconfirmed or ctx.stable_rank_steps >= cfg.persistence:
            ctx.state = ExecutiveState.APPROACH
            ctx.entered_state_at = t
            ctx.approach_steps = 0
            return ctx, Intent(IntentKind.APPROACH_CANDIDATE, active)
        return ctx, Intent(IntentKind.HOLD_AND_OBSERVE, active)

    if state is ExecutiveState.APPROACH:
        ctx.approach_steps += 1
        reach = cfg.r_v + (cfg.r_extra if ctx.approach_steps >= cfg.n_verify else 0.0)
        if dist <= reach or signals.approach_saturated:
            ctx.state = ExecutiveState.VERIFY
            ctx.entered_state_at = t
            return ctx, Intent(IntentKind.VERIFY_CANDIDATE, active)
        return ctx, Intent(IntentKind.APPROACH_CANDIDATE, active)

    if state is ExecutiveState.VERIFY:
        if semantic_subgate(cand, ctx, cfg):
            ctx.state = ExecutiveState.FINAL_APPROACH
            ctx.entered_state_at = t
            return ctx, Intent(IntentKind.DOCK_CANDIDATE, active)
        return ctx, Intent(IntentKind.VERIFY_CANDIDATE, active)

    if state is ExecutiveState.FINAL_APPROACH:
        if (check_verified_gate(cand, ctx, cfg) and dist <= cfg.r_stop
                and signals.dock_complete):
            ctx.state = ExecutiveState.SUCCESS
            ctx.entered_state_at = t
            return ctx, Intent(IntentKind.EMIT_STOP, active)
        return ctx, Intent(IntentKind.DOCK_CANDIDATE, active)

    raise ExecutiveError(f"unhandled state {state!r}")  # pragma: no cover
