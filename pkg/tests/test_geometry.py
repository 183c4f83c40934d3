import math
import random

import numpy as np
import pytest

from consistnav.geometry import (Action, CellState, OccupancyGrid, Pose,
                                 euclidean_distance, normalize_heading,
                                 world_to_cell)


def test_normalize_heading_examples():
    assert normalize_heading(0.0) == 0.0
    assert normalize_heading(2 * math.pi) == 0.0
    assert normalize_heading(-math.pi / 2) == pytest.approx(3 * math.pi / 2)


def test_normalize_heading_rejects_non_finite():
    with pytest.raises(ValueError):
        normalize_heading(float("nan"))
    with pytest.raises(ValueError):
        normalize_heading(float("inf"))


def test_normalize_heading_wraparound_property():
    rng = random.Random(1)
    for _ in range(500):
        a = rng.uniform(-50.0, 50.0)
        assert normalize_heading(a + 2 * math.pi) == pytest.approx(
            normalize_heading(a), abs=1e-9)
        assert 0.0 <= normalize_heading(a) < 2 * math.pi


def test_action_members():
    assert {a.value for a in Action} == {"Forward", "Left", "Right", "Stop"}
    assert len(Action) == 4


def test_world_to_cell_examples():
    grid = OccupancyGrid(10, 10, 0.1)
    assert grid.world_to_cell((0.05, 0.05)) == (0, 0)
    # a point exactly on a cell edge belongs to the higher-index cell
    assert grid.world_to_cell((0.10, 0.0)) == (1, 0)
    assert grid.world_to_cell((0.95, 0.25)) == (9, 2)
    assert world_to_cell((0.95, 0.25), grid) == (9, 2)


def test_world_to_cell_out_of_bounds():
    grid = OccupancyGrid(10, 10, 0.1)
    with pytest.raises(IndexError):
        grid.world_to_cell((1.5, 0.2))
    with pytest.raises(IndexError):
        grid.world_to_cell((-0.01, 0.2))


def test_cell_center_reconstruction_bound():
    grid = OccupancyGrid(30, 20, 0.1)
    rng = random.Random(7)
    bound = 0.1 * math.sqrt(2) / 2
    for _ in range(500):
        p = (rng.uniform(0, 2.999), rng.uniform(0, 1.999))
        center = grid.cell_center(grid.world_to_cell(p))
        assert euclidean_distance(p, center) < bound


def test_euclidean_examples():
    assert euclidean_distance((0, 0), (0, 0)) == 0.0
    assert euclidean_distance((0, 0), (3, 4)) == 5.0
    assert euclidean_distance((1, 1), (1, 2)) == 1.0


def test_triangle_inequality_property():
    rng = random.Random(3)
    for _ in range(500):
        a, b, c = [(rng.uniform(-5, 5), rng.uniform(-5, 5)) for _ in range(3)]
        assert euclidean_distance(a, c) <= (
            euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-12)


def test_pose_normalizes_heading_and_rejects_non_finite():
    p = Pose(1.0, 2.0, -math.pi / 2)
    assert p.theta == pytest.approx(3 * math.pi / 2)
    with pytest.raises(ValueError):
        Pose(float("nan"), 0.0)


def test_grid_validation():
    with pytest.raises(ValueError):
        OccupancyGrid(10, 10, 0.0)
    with pytest.raises(ValueError):
        OccupancyGrid(0, 10, 0.1)
    grid = OccupancyGrid(4, 3, 0.1)
    grid.set(2, 1, CellState.OCCUPIED)
    assert grid.get(2, 1) is CellState.OCCUPIED
    assert grid.count(CellState.OCCUPIED) == 1
    with pytest.raises(IndexError):
        grid.get(4, 0)


def test_grid_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        OccupancyGrid(4, 3, 0.1, cells=np.zeros((4, 4), dtype=np.uint8))
