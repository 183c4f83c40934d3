import json
import math

import pytest

from consistnav.config import RunConfig
from consistnav.evaluation import Outcome
from consistnav.executive import Q_COMMIT, ExecutiveState, legal_transition
from consistnav.geometry import CellState, ObjectInstance, OccupancyGrid, Pose
from consistnav.scenario import Scenario
from consistnav.sim.episode import Variant, run_episode
from consistnav.sim.mapgen import build_scenario

STATE_BY_NAME = {s.value: s for s in ExecutiveState}


def _room(width=60, height=40):
    grid = OccupancyGrid(width, height, 0.1)
    grid.cells[0, :] = 1
    grid.cells[-1, :] = 1
    grid.cells[:, 0] = 1
    grid.cells[:, -1] = 1
    return grid


def _easy_scenario():
    grid = _room()
    objects = [ObjectInstance((2.0, 2.0), "chair", True)]
    return Scenario("easy", grid, objects, Pose(1.0, 2.0, 0.0), "chair")


def _clean_config():
    cfg = RunConfig.defaults()
    cfg.detector.p_detect = 1.0
    cfg.detector.p_confuse = 0.0
    cfg.detector.p_hallucinate = 0.0
    cfg.detector.pos_noise_sd = 0.02
    return cfg


def test_trivial_scenario_full_succeeds_quickly():
    rec = run_episode(_easy_scenario(), Variant.FULL, _clean_config(), seed=5)
    assert rec.outcome == Outcome.SUCCESS.value
    assert rec.steps <= 30
    assert rec.final_state == "Success"
    assert rec.spl_term > 0


def test_trivial_scenario_memory_variants_succeed():
    for variant in (Variant.PCM, Variant.PCM_FSEC, Variant.FULL):
        rec = run_episode(_easy_scenario(), variant, _clean_config(), seed=5)
        assert rec.outcome == Outcome.SUCCESS.value, variant


def test_trivial_scenario_baseline_stops_near_target(tmp_path):
    # the non-executive arrival rule stops within 0.3 m of a single noisy
    # detection, which need not satisfy the 0.2 m success radius
    sc = _easy_scenario()
    path = tmp_path / "base.jsonl"
    rec = run_episode(sc, Variant.BASELINE, _clean_config(), seed=5,
                      traj_path=path)
    assert rec.stop_step is not None
    last = json.loads(path.read_text().splitlines()[-1])
    tx, ty = sc.targets()[0].position
    d = math.hypot(last["pose"]["x"] - tx, last["pose"]["y"] - ty)
    assert d <= 0.5


def test_episode_deterministic_byte_identical(tmp_path):
    sc = build_scenario("office", 0, 21)
    cfg = RunConfig.defaults()
    paths = []
    records = []
    for name in ("a", "b"):
        p = tmp_path / f"{name}.jsonl"
        records.append(run_episode(sc, Variant.FULL, cfg, seed=77, traj_path=p))
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    a, b = records[0].to_dict(), records[1].to_dict()
    a.pop("trajectory_path")
    b.pop("trajectory_path")
    assert a == b


def test_infeasible_short_circuits():
    grid = _room()
    grid.cells[:, 30] = 1
    sc = Scenario("sealed", grid, [ObjectInstance((4.0, 2.0), "chair", True)],
                  Pose(1.0, 2.0, 0.0), "chair")
    rec = run_episode(sc, Variant.BASELINE, RunConfig.defaults(), seed=1)
    assert rec.outcome == Outcome.INFEASIBLE.value
    assert rec.steps == 0
    assert rec.shortest_path is None
    assert rec.spl_term == 0.0


def _trajectory(sc, variant, cfg, seed, tmp_path, name):
    path = tmp_path / f"{name}.jsonl"
    rec = run_episode(sc, variant, cfg, seed=seed, traj_path=path)
    entries = [json.loads(line) for line in path.read_text().splitlines()]
    return rec, entries


def test_motion_safety_and_log_schema(tmp_path):
    sc = build_scenario("apartment", 1, 33)
    rec, entries = _trajectory(sc, Variant.FULL, RunConfig.defaults(), 9,
                               tmp_path, "safety")
    assert entries, "episode produced no steps"
    for e in entries:
        # agent stays inside free ground-truth cells
        cell = sc.grid.world_to_cell((e["pose"]["x"], e["pose"]["y"]))
        assert sc.grid.get(*cell) is CellState.FREE
        for key in ("t", "pose", "action", "state", "intent",
                    "active_candidate", "num_candidates", "d_best",
                    "spin_budget", "stall_counter", "observations"):
            assert key in e


def test_transition_legality_in_logs(tmp_path):
    for variant in (Variant.PCM_FSEC, Variant.FULL):
        for seed in (3, 4):
            sc = build_scenario("office", seed, 50)
            rec, entries = _trajectory(sc, variant, RunConfig.defaults(), seed,
                                       tmp_path, f"legal_{variant.value}_{seed}")
            states = [STATE_BY_NAME[e["state"]] for e in entries
                      if e["state"] is not None]
            for a, b in zip(states, states[1:]):
                assert legal_transition(a, b), (variant, seed, a, b)


def test_stops_only_from_success_with_gate(tmp_path):
    for seed in (3, 8):
        sc = build_scenario("office", seed, 50)
        rec, entries = _trajectory(sc, Variant.FULL, RunConfig.defaults(), seed,
                                   tmp_path, f"stops_{seed}")
        for e in entries:
            if e["action"] == "Stop":
                assert e["state"] == "Success"
                gate = e["gate"]
                assert gate is not None and gate["passed"]


def test_d_best_monotone_per_active_candidate(tmp_path):
    sc = build_scenario("apartment", 2, 50)
    rec, entries = _trajectory(sc, Variant.FULL, RunConfig.defaults(), 6,
                               tmp_path, "dbest")
    last = {}
    for e in entries:
        cid = e["active_candidate"]
        if cid is None or e["d_best"] is None:
            continue
        if cid in last:
            assert e["d_best"] <= last[cid] + 1e-9
        last[cid] = e["d_best"]


def test_failover_resolves_within_budget(tmp_path):
    cfg = RunConfig.defaults()
    found_any = False
    for seed in (3, 4, 6, 9):
        sc = build_scenario("maze", seed, 50)
        rec, entries = _trajectory(sc, Variant.FULL, cfg, seed, tmp_path,
                                   f"fo_{seed}")
        run = 0
        for e in entries:
            if e["state"] == "Failover":
                run += 1
                found_any = True
                assert run <= cfg.fse.failover_budget
            else:
                run = 0
    assert found_any, "no failover entries exercised"


def test_spin_runs_bounded(tmp_path):
    cfg = RunConfig.defaults()
    for seed in (3, 6):
        sc = build_scenario("maze", seed, 50)
        rec, entries = _trajectory(sc, Variant.FULL, cfg, seed, tmp_path,
                                   f"spin_{seed}")
        rotations = 0
        for e in entries:
            if e.get("resample"):
                rotations = 0
            elif e["action"] in ("Left", "Right"):
                rotations += 1
                assert rotations <= cfg.guard.spin_cap, e["t"]
            elif e["action"] == "Forward":
                rotations = 0


def test_baseline_logs_carry_no_executive_state(tmp_path):
    sc = build_scenario("office", 1, 50)
    rec, entries = _trajectory(sc, Variant.BASELINE, RunConfig.defaults(), 2,
                               tmp_path, "base")
    assert all(e["state"] is None for e in entries)
    assert all(e["intent"] is None for e in entries)
    assert rec.final_state is None
