import itertools
import math

import pytest

from consistnav.executive import (ActiveObservation, ExecutiveContext,
                                  ExecutiveError, ExecutiveState, FailoverResolution,
                                  FseConfig, IntentKind, Q_COMMIT, Q_RETURN,
                                  StepSignals, check_verified_gate, enter_failover,
                                  legal_transition, semantic_subgate, step_state)
from consistnav.geometry import Pose
from consistnav.memory import Candidate, CandidateMemory, MemoryConfig, consistency_score

S = ExecutiveState


def _memory_with(*cands):
    mem = CandidateMemory(MemoryConfig())
    for c in cands:
        c.consistency = consistency_score(c, mem.cfg)
        mem.candidates[c.candidate_id] = c
    return mem


def _strong(cid=0, mu=(2.0, 0.0), confidence=0.8):
    return Candidate(candidate_id=cid, mu=mu, confidence=confidence,
                     target_obs=4, nontarget_obs=0, itm_history=[0.4])


def _signals(mem, t=0, pose=Pose(0, 0, 0), obs=None, **kw):
    return StepSignals(viable_ranked=mem.ranked_viable(t), agent_pose=pose,
                       new_observation_for_active=obs, **kw)


# -- transition legality -------------------------------------------------------

def test_state_space_has_seven_members():
    assert len(ExecutiveState) == 7


def test_commit_and_return_sets():
    assert Q_COMMIT == {S.SUSPECT, S.APPROACH, S.VERIFY, S.FINAL_APPROACH}
    assert Q_RETURN == {S.SEARCH, S.APPROACH, S.VERIFY}


def test_legal_transition_full_table():
    allowed = set()
    for s in S:
        allowed.add((s, s))  # self-loops
    chain = [S.SEARCH, S.SUSPECT, S.APPROACH, S.VERIFY, S.FINAL_APPROACH, S.SUCCESS]
    for a, b in zip(chain, chain[1:]):
        allowed.add((a, b))
    allowed.add((S.SUSPECT, S.SEARCH))
    for s in Q_COMMIT:
        allowed.add((s, S.FAILOVER))
    for s in Q_RETURN | {S.FINAL_APPROACH}:
        allowed.add((S.FAILOVER, s))

    for a in S:
        for b in S:
            assert legal_transition(a, b) == ((a, b) in allowed), (a, b)


def test_legal_transition_examples():
    assert legal_transition(S.SEARCH, S.SUSPECT)
    assert not legal_transition(S.SEARCH, S.VERIFY)  # no skip edges
    assert legal_transition(S.VERIFY, S.FAILOVER)


# -- verified gate -------------------------------------------------------------

def _gate_inputs(cfg, bits):
    """Boundary-straddling inputs: bit k True picks the passing side of
    condition k."""
    hits, dist, kappa, m_pos_ok, majority, itm = bits
    c = Candidate(candidate_id=0, mu=(0, 0), confidence=0.5)
    ctx = ExecutiveContext(state=S.FINAL_APPROACH, active_candidate=0)
    ctx.target_hits = 2 if hits else 1
    ctx.best_distance = cfg.r_stop if dist else cfg.r_stop + 0.01
    ctx.kappa = cfg.tau_conf if kappa else cfg.tau_conf - 0.01
    c.target_obs = cfg.m_obs if m_pos_ok else cfg.m_obs - 1
    # the strict-majority condition is controlled via the negative count;
    # keep it independent of the m_pos threshold bit
    c.nontarget_obs = (c.target_obs - 1) if majority else c.target_obs
    c.itm_history = [cfg.tau_itm if itm else cfg.tau_itm - 0.01]
    return c, ctx


def test_gate_brute_force_all_64_combinations():
    cfg = FseConfig()
    for bits in itertools.product([False, True], repeat=6):
        c, ctx = _gate_inputs(cfg, bits)
        assert check_verified_gate(c, ctx, cfg) == all(bits), bits


def test_gate_examples():
    cfg = FseConfig()
    c = Candidate(candidate_id=0, mu=(0, 0), confidence=0.5, target_obs=3,
                  nontarget_obs=1, itm_history=[0.15])
    ctx = ExecutiveContext(state=S.FINAL_APPROACH, active_candidate=0)
    ctx.target_hits = 2
    ctx.best_distance = 0.25
    ctx.kappa = 0.35
    assert check_verified_gate(c, ctx, cfg)

    ctx.target_hits = 1
    assert not check_verified_gate(c, ctx, cfg)

    ctx.target_hits = 2
    c.nontarget_obs = 3
    assert not check_verified_gate(c, ctx, cfg)


def test_semantic_subgate_drops_distance_only():
    cfg = FseConfig()
    c = Candidate(candidate_id=0, mu=(0, 0), confidence=0.5, target_obs=3,
                  nontarget_obs=0, itm_history=[0.2])
    ctx = ExecutiveContext(state=S.VERIFY, active_candidate=0)
    ctx.target_hits = 2
    ctx.kappa = 0.4
    ctx.best_distance = math.inf  # geometric condition failing
    assert semantic_subgate(c, ctx, cfg)
    assert not check_verified_gate(c, ctx, cfg)


# -- step_state ------------------------------------------------------------------

def test_search_explores_when_nothing_viable():
    mem = _memory_with()
    ctx = ExecutiveContext()
    ctx, intent = step_state(ctx, _signals(mem), mem, FseConfig(), 0)
    assert ctx.state is S.SEARCH
    assert intent.kind is IntentKind.EXPLORE_FRONTIER


def test_search_enters_suspect_on_strong_candidate():
    cfg = FseConfig()
    mem = _memory_with(_strong(confidence=0.8))
    ctx = ExecutiveContext()
    ctx, intent = step_state(ctx, _signals(mem), mem, cfg, 0)
    assert ctx.state is S.SUSPECT
    assert ctx.active_candidate == 0
    assert intent.kind is IntentKind.HOLD_AND_OBSERVE


def test_search_waits_for_persistence_on_weak_candidate():
    cfg = FseConfig()
    mem = _memory_with(_strong(confidence=0.3))  # viable but below strong bar
    ctx = ExecutiveContext()
    for step in range(cfg.persistence - 1):
        ctx, intent = step_state(ctx, _signals(mem, t=step), mem, cfg, step)
        assert ctx.state is S.SEARCH
    ctx, intent = step_state(ctx, _signals(mem, t=5), mem, cfg, 5)
    assert ctx.state is S.SUSPECT


def test_suspect_advances_on_reconfirmation():
    cfg = FseConfig()
    mem = _memory_with(_strong())
    ctx = ExecutiveContext()
    ctx, _ = step_state(ctx, _signals(mem, t=0), mem, cfg, 0)
    assert ctx.state is S.SUSPECT
    obs = ActiveObservation(y=1, confidence=0.7, itm=0.3)
    ctx, intent = step_state(ctx, _signals(mem, t=1, obs=obs), mem, cfg, 1)
    assert ctx.state is S.APPROACH
    assert intent.kind is IntentKind.APPROACH_CANDIDATE


def test_suspect_advances_on_stable_rank():
    cfg = FseConfig()
    mem = _memory_with(_strong())
    ctx = ExecutiveContext()
    ctx, _ = step_state(ctx, _signals(mem, t=0), mem, cfg, 0)
    t = 1
    while ctx.state is S.SUSPECT:
        ctx, _ = step_state(ctx, _signals(mem, t=t), mem, cfg, t)
        t += 1
        assert t < 10
    assert ctx.state is S.APPROACH


def test_suspect_deescalates_when_candidate_dies():
    cfg = FseConfig()
    cand = _strong()
    mem = _memory_with(cand)
    ctx = ExecutiveContext()
    ctx, _ = step_state(ctx, _signals(mem, t=0), mem, cfg, 0)
    assert ctx.state is S.SUSPECT
    cand.frozen = True  # invalidated before commitment deepens
    ctx, intent = step_state(ctx, _signals(mem, t=1), mem, cfg, 1)
    assert ctx.state is S.SEARCH
    assert ctx.active_candidate is None
    assert intent.kind is IntentKind.EXPLORE_FRONTIER


def _approach_ctx(mem, cfg):
    ctx = ExecutiveContext(state=S.APPROACH, active_candidate=0)
    return ctx


def test_approach_to_verify_inside_radius():
    cfg = FseConfig()
    mem = _memory_with(_strong(mu=(0.7, 0.0)))
    ctx = _approach_ctx(mem, cfg)
    ctx, intent = step_state(ctx, _signals(mem, pose=Pose(0, 0, 0)), mem, cfg, 10)
    assert ctx.state is S.VERIFY
    assert intent.kind is IntentKind.VERIFY_CANDIDATE


def test_approach_stays_outside_radius():
    cfg = FseConfig()
    mem = _memory_with(_strong(mu=(3.0, 0.0)))
    ctx = _approach_ctx(mem, cfg)
    ctx, intent = step_state(ctx, _signals(mem, pose=Pose(0, 0, 0)), mem, cfg, 10)
    assert ctx.state is S.APPROACH
    assert intent.kind is IntentKind.APPROACH_CANDIDATE


def test_approach_radius_widens_after_long_approach():
    cfg = FseConfig()
    mem = _memory_with(_strong(mu=(1.1, 0.0)))
    ctx = _approach_ctx(mem, cfg)
    ctx.approach_steps = cfg.n_verify  # k_app at the widening threshold
    assert 1.1 <= cfg.r_v + cfg.r_extra
    ctx, _ = step_state(ctx, _signals(mem, pose=Pose(0, 0, 0)), mem, cfg, 50)
    assert ctx.state is S.VERIFY


def test_approach_saturation_triggers_verify():
    cfg = FseConfig()
    mem = _memory_with(_strong(mu=(3.0, 0.0)))
    ctx = _approach_ctx(mem, cfg)
    sig = _signals(mem, pose=Pose(0, 0, 0), approach_saturated=True)
    ctx, _ = step_state(ctx, sig, mem, cfg, 10)
    assert ctx.state is S.VERIFY


def test_verify_to_final_on_semantic_subgate():
    cfg = FseConfig()
    cand = _strong(mu=(0.5, 0.0))
    mem = _memory_with(cand)
    ctx = ExecutiveContext(state=S.VERIFY, active_candidate=0)
    ctx.record_hit(9, 0.6)
    ctx.record_hit(10, 0.7)
    ctx.refresh_hit_window(10, cfg)
    ctx, intent = step_state(ctx, _signals(mem, pose=Pose(0, 0, 0)), mem, cfg, 10)
    assert ctx.state is S.FINAL_APPROACH
    assert intent.kind is IntentKind.DOCK_CANDIDATE


def test_final_approach_to_success_requires_full_gate_and_dock():
    cfg = FseConfig()
    cand = _strong(mu=(0.1, 0.0))
    mem = _memory_with(cand)
    ctx = ExecutiveContext(state=S.FINAL_APPROACH, active_candidate=0)
    ctx.record_hit(9, 0.6)
    ctx.record_hit(10, 0.7)
    ctx.refresh_hit_window(10, cfg)
    ctx.best_distance = 0.1
    sig = _signals(mem, pose=Pose(0, 0, 0), dock_complete=True)
    ctx, intent = step_state(ctx, sig, mem, cfg, 10)
    assert ctx.state is S.SUCCESS
    assert intent.kind is IntentKind.EMIT_STOP

    # without dock completion the controller keeps docking
    ctx2 = ExecutiveContext(state=S.FINAL_APPROACH, active_candidate=0)
    ctx2.record_hit(9, 0.6)
    ctx2.record_hit(10, 0.7)
    ctx2.refresh_hit_window(10, cfg)
    ctx2.best_distance = 0.1
    ctx2, intent2 = step_state(ctx2, _signals(mem, pose=Pose(0, 0, 0)), mem, cfg, 10)
    assert ctx2.state is S.FINAL_APPROACH
    assert intent2.kind is IntentKind.DOCK_CANDIDATE


def test_success_self_loops_with_stop():
    mem = _memory_with(_strong())
    ctx = ExecutiveContext(state=S.SUCCESS, active_candidate=0)
    ctx, intent = step_state(ctx, _signals(mem), mem, FseConfig(), 50)
    assert ctx.state is S.SUCCESS
    assert intent.kind is IntentKind.EMIT_STOP


def test_step_state_rejects_unknown_active_candidate():
    mem = _memory_with()
    ctx = ExecutiveContext(state=S.APPROACH, active_candidate=7)
    with pytest.raises(ExecutiveError):
        step_state(ctx, _signals(mem), mem, FseConfig(), 0)


# -- failover ----------------------------------------------------------------------

def test_failover_rejected_outside_commit_states():
    mem = _memory_with(_strong())
    ctx = ExecutiveContext(state=S.SEARCH)
    with pytest.raises(ExecutiveError):
        enter_failover(ctx, mem, FseConfig(), 10)


def test_failover_returns_to_search_without_alternatives():
    cfg = FseConfig()
    cand = _strong()
    mem = _memory_with(cand)
    ctx = ExecutiveContext(state=S.APPROACH, active_candidate=0)
    ctx, plan = enter_failover(ctx, mem, cfg, 10)
    assert ctx.state is S.FAILOVER
    assert plan.resolution is FailoverResolution.RETURN_SEARCH
    assert cand.failure_count == 1  # abandoned pursuit is penalized


def test_failover_switches_to_best_alternative():
    cfg = FseConfig()
    active = _strong(cid=0)
    active.frozen = True
    other = _strong(cid=1, mu=(4.0, 4.0))
    mem = _memory_with(active, other)
    ctx = ExecutiveContext(state=S.APPROACH, active_candidate=0)
    ctx, plan = enter_failover(ctx, mem, cfg, 10)
    assert plan.resolution is FailoverResolution.SWITCH
    assert plan.candidate == 1


def test_failover_docks_recently_verified_close_candidate():
    cfg = FseConfig()
    cand = _strong()
    mem = _memory_with(cand)
    ctx = ExecutiveContext(state=S.FINAL_APPROACH, active_candidate=0)
    ctx.last_semantic_pass = 9
    ctx.last_distance = 0.5
    ctx, plan = enter_failover(ctx, mem, cfg, 10)
    assert plan.resolution is FailoverResolution.DOCK
    assert cand.failure_count == 0  # docking keeps the candidate intact


def test_failover_resolution_within_budget():
    cfg = FseConfig()
    cand = _strong()
    mem = _memory_with(cand)
    ctx = ExecutiveContext(state=S.APPROACH, active_candidate=0)
    ctx, _ = enter_failover(ctx, mem, cfg, 0)
    steps = 0
    while ctx.state is S.FAILOVER:
        sig = _signals(mem, t=steps, planner_progress=False)
        ctx, _ = step_state(ctx, sig, mem, cfg, steps)
        steps += 1
        assert steps <= cfg.failover_budget
    assert ctx.state in (Q_RETURN | {S.FINAL_APPROACH})


def test_failover_resolves_immediately_on_progress():
    cfg = FseConfig()
    cand = _strong()
    mem = _memory_with(cand)
    ctx = ExecutiveContext(state=S.APPROACH, active_candidate=0)
    ctx, _ = enter_failover(ctx, mem, cfg, 0)
    ctx, intent = step_state(ctx, _signals(mem, planner_progress=True), mem, cfg, 1)
    assert ctx.state is not S.FAILOVER


def test_forced_failover_from_signals():
    cfg = FseConfig()
    cand = _strong(mu=(3.0, 0.0))
    mem = _memory_with(cand)
    ctx = ExecutiveContext(state=S.APPROACH, active_candidate=0)
    sig = _signals(mem, pose=Pose(0, 0, 0), force_failover=True)
    ctx, intent = step_state(ctx, sig, mem, cfg, 10)
    assert ctx.state is S.FAILOVER
    assert intent.kind is IntentKind.RECOVER


def test_global_failover_cap_forces_search():
    cfg = FseConfig()
    cand = _strong()
    mem = _memory_with(cand)
    ctx = ExecutiveContext(state=S.VERIFY, active_candidate=0)
    ctx.failover_entries = cfg.max_failovers
    ctx.last_semantic_pass = 9
    ctx.last_distance = 0.1
    ctx, plan = enter_failover(ctx, mem, cfg, 10)
    assert plan.resolution is FailoverResolution.RETURN_SEARCH


# -- escalation monotonicity ---------------------------------------------------------

def test_escalation_monotone_along_nominal_chain():
    """Drive a scripted pursuit to Success; chain indices never decrease."""
    from consistnav.executive import CHAIN_INDEX
    cfg = FseConfig()
    cand = _strong(mu=(0.05, 0.0))
    mem = _memory_with(cand)
    ctx = ExecutiveContext()
    seen = []
    for t in range(40):
        obs = ActiveObservation(y=1, confidence=0.7, itm=0.3)
        ctx.record_hit(t, 0.7)
        ctx.refresh_hit_window(t, cfg)
        sig = _signals(mem, t=t, pose=Pose(0, 0, 0), obs=obs, dock_complete=True)
        ctx, intent = step_state(ctx, sig, mem, cfg, t)
        seen.append(ctx.state)
        if ctx.state is S.SUCCESS:
            break
    assert seen[-1] is S.SUCCESS
    indices = [CHAIN_INDEX[s] for s in seen if s is not S.FAILOVER]
    assert indices == sorted(indices)
