import json

import numpy as np
import pytest
from scipy import ndimage

from consistnav.evaluation import oracle_cost_cells, shortest_path_oracle
from consistnav.geometry import CellState
from consistnav.scenario import scenario_to_dict
from consistnav.sim.mapgen import (TARGET_CATEGORIES, build_scenario,
                                   generate_scenarios)

PRESETS = ("office", "maze", "apartment")


def test_count_contract():
    for preset in PRESETS:
        assert len(generate_scenarios(preset, 3, 11)) == 3


def test_count_must_be_positive():
    with pytest.raises(ValueError):
        generate_scenarios("office", 0, 1)


def test_unknown_preset_rejected():
    with pytest.raises(ValueError):
        build_scenario("warehouse", 0, 1)


def test_generation_deterministic():
    for preset in PRESETS:
        a = scenario_to_dict(build_scenario(preset, 2, 99))
        b = scenario_to_dict(build_scenario(preset, 2, 99))
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_different_seeds_differ():
    a = scenario_to_dict(build_scenario("office", 0, 1))
    b = scenario_to_dict(build_scenario("office", 0, 2))
    assert json.dumps(a) != json.dumps(b)


def test_objects_and_start_on_free_cells():
    for preset in PRESETS:
        for idx in range(4):
            sc = build_scenario(preset, idx, 5)
            assert sc.grid.is_free_at(sc.start.position)
            for obj in sc.objects:
                assert sc.grid.is_free_at(obj.position)
            assert len(sc.targets()) == 1
            assert 2 <= len(sc.distractors()) <= 6
            assert sc.target_category in TARGET_CATEGORIES
            # ground truth carries no unknown cells
            assert sc.grid.count(CellState.UNKNOWN) == 0


def test_target_connected_to_start():
    for preset in PRESETS:
        for idx in range(4):
            sc = build_scenario(preset, idx, 7)
            structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
            labels, _ = ndimage.label(
                sc.grid.cells == int(CellState.FREE), structure=structure)
            sx, sy = sc.grid.world_to_cell(sc.start.position)
            tx, ty = sc.grid.world_to_cell(sc.targets()[0].position)
            assert labels[sy, sx] == labels[ty, tx], (preset, idx)


def test_maze_has_detour_factor_at_least_two():
    found = False
    for idx in range(10):
        sc = build_scenario("maze", idx, 42)
        start = sc.grid.world_to_cell(sc.start.position)
        goal = sc.grid.world_to_cell(sc.targets()[0].position)
        cost = oracle_cost_cells(sc.grid, start, {goal})
        if cost is None:
            continue
        euclid = ((start[0] - goal[0]) ** 2 + (start[1] - goal[1]) ** 2) ** 0.5
        if euclid > 0 and cost / euclid >= 2.0:
            found = True
            break
    assert found, "no maze with a >= 2x detour in the sample"


def test_generated_scenarios_mostly_feasible():
    feasible = 0
    total = 0
    for preset in PRESETS:
        for sc in generate_scenarios(preset, 5, 13):
            start = sc.grid.world_to_cell(sc.start.position)
            if shortest_path_oracle(sc.grid, start, sc.targets(), 0.2) is not None:
                feasible += 1
            total += 1
    assert feasible == total
