"""Procedural scenario generation: office, maze, and apartment presets."""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ..geometry import CellState, ObjectInstance, OccupancyGrid, Pose
from ..scenario import Scenario

CELL_SIZE = 0.1
TARGET_CATEGORIES = ["chair", "plant", "couch", "tv"]
DISTRACTOR_CATEGORIES = ["table", "lamp", "box", "shelf", "bin", "cabinet"]

FREE = int(CellState.FREE)
OCC = int(CellState.OCCUPIED)

_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=int)


def _bordered(width: int, height: int) -> np.ndarray:
    cells = np.full((height, width), FREE, dtype=np.uint8)
    cells[0, :] = OCC
    cells[-1, :] = OCC
    cells[:, 0] = OCC
    cells[:, -1] = OCC
    return cells


def _office(rng: np.random.Generator) -> np.ndarray:
    width = int(rng.integers(80, 105))
    height = int(rng.integers(60, 80))
    cells = _bordered(width, height)
    cy = height // 2
    half = 6  # corridor half-width: 1.2 m corridor
    cells[cy - half, 1:-1] = OCC
    cells[cy + half, 1:-1] = OCC

    for side_top in (True, False):
        wall_y = cy - half if side_top else cy + half
        span = range(1, wall_y) if side_top else range(wall_y + 1, height - 1)
        x = 1
        dividers = []
        while x < width - 20:
            x += int(rng.integers(18, 30))
            if x < width - 10:
                dividers.append(x)
        for dx in dividers:
            for y in span:
                cells[y, dx] = OCC
        # one door per room onto the corridor
        bounds = [1] + dividers + [width - 1]
        for left, right in zip(bounds, bounds[1:]):
            if right - left < 8:
                continue
            door = int(rng.integers(left + 2, right - 6))
            cells[wall_y, door:door + 5] = FREE
    return cells


def _maze(rng: np.random.Generator) -> tuple[np.ndarray, tuple[int, int], tuple[int, int]]:
    """Perfect maze with widened corridors. Returns (cells, start_block,
    deepest_block) as lattice coordinates of corridor blocks."""
    lx = int(rng.integers(7, 10))
    ly = int(rng.integers(5, 8))
    pitch = 8  # corridor blocks of 7 cells (0.7 m) separated by 1-cell walls
    width = lx * pitch + 1
    height = ly * pitch + 1
    cells = np.full((height, width), OCC, dtype=np.uint8)

    def carve_block(i: int, j: int) -> None:
        cells[j * pitch + 1:(j + 1) * pitch, i * pitch + 1:(i + 1) * pitch] = FREE

    def open_wall(a: tuple[int, int], b: tuple[int, int]) -> None:
        (ai, aj), (bi, bj) = a, b
        if ai == bi:  # vertical neighbors: open the horizontal wall row
            wall_y = max(aj, bj) * pitch
            x0 = ai * pitch + 1
            cells[wall_y, x0:x0 + pitch - 1] = FREE
        else:
            wall_x = max(ai, bi) * pitch
            y0 = aj * pitch + 1
            cells[y0:y0 + pitch - 1, wall_x] = FREE

    start = (0, 0)
    stack = [start]
    visited = {start}
    depth = {start: 0}
    carve_block(*start)
    while stack:
        node = stack[-1]
        i, j = node
        neighbors = [(i + di, j + dj) for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))
                     if 0 <= i + di < lx and 0 <= j + dj < ly
                     and (i + di, j + dj) not in visited]
        if not neighbors:
            stack.pop()
            continue
        nxt = neighbors[int(rng.integers(len(neighbors)))]
        carve_block(*nxt)
        open_wall(node, nxt)
        visited.add(nxt)
        depth[nxt] = depth[node] + 1
        stack.append(nxt)

    deepest = max(depth, key=lambda k: (depth[k], k))
    return cells, start, deepest


def _maze_block_center(block: tuple[int, int], pitch: int = 8) -> tuple[int, int]:
    return (block[0] * pitch + pitch // 2, block[1] * pitch + pitch // 2)


def _apartment(rng: np.random.Generator) -> np.ndarray:
    width = int(rng.integers(90, 115))
    height = int(rng.integers(65, 85))
    cells = _bordered(width, height)

    def split(x0: int, y0: int, x1: int, y1: int, depth: int) -> None:
        w, h = x1 - x0, y1 - y0
        if depth <= 0 or (w < 30 and h < 30):
            return
        horizontal = h > w if h != w else bool(rng.integers(2))
        if horizontal:
            y = int(rng.integers(y0 + 12, y1 - 12))
            cells[y, x0:x1] = OCC
            door = int(rng.integers(x0 + 2, x1 - 9))
            cells[y, door:door + 7] = FREE
            split(x0, y0, x1, y, depth - 1)
            split(x0, y + 1, x1, y1, depth - 1)
        else:
            x = int(rng.integers(x0 + 12, x1 - 12))
            cells[y0:y1, x] = OCC
            door = int(rng.integers(y0 + 2, y1 - 9))
            cells[door:door + 7, x] = FREE
            split(x0, y0, x, y1, depth - 1)
            split(x + 1, y0, x1, y1, depth - 1)

    split(1, 1, width - 1, height - 1, 3)

    # furniture blobs with a clear margin so rooms stay connected
    n_blobs = int(rng.integers(3, 7))
    for _ in range(n_blobs):
        bw = int(rng.integers(3, 9))
        bh = int(rng.integers(3, 9))
        x = int(rng.integers(4, width - bw - 4))
        y = int(rng.integers(4, height - bh - 4))
        region = cells[y - 2:y + bh + 2, x - 2:x + bw + 2]
        if (region == FREE).all():
            cells[y:y + bh, x:x + bw] = OCC
    return cells


def _clear_cells(cells: np.ndarray) -> np.ndarray:
    """Free cells whose 3x3 neighborhood is entirely free (placement sites)."""
    free = cells == FREE
    ok = free.copy()
    ok[1:, :] &= free[:-1, :]
    ok[:-1, :] &= free[1:, :]
    ok[:, 1:] &= free[:, :-1]
    ok[:, :-1] &= free[:, 1:]
    ok[1:, 1:] &= free[:-1, :-1]
    ok[1:, :-1] &= free[:-1, 1:]
    ok[:-1, 1:] &= free[1:, :-1]
    ok[:-1, :-1] &= free[1:, 1:]
    ok[0, :] = ok[-1, :] = False
    ok[:, 0] = ok[:, -1] = False
    return ok


def _component_of(cells: np.ndarray, cell: tuple[int, int]) -> np.ndarray:
    labels, _ = ndimage.label(cells == FREE, structure=_FOUR)
    return labels == labels[cell[1], cell[0]]


def _pick_cell(rng: np.random.Generator, mask: np.ndarray) -> tuple[int, int]:
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise ValueError("no eligible cells to place on")
    k = int(rng.integers(len(xs)))
    return (int(xs[k]), int(ys[k]))


def build_scenario(preset: str, index: int, seed: int) -> Scenario:
    """Deterministically build one scenario for (preset, index, seed)."""
    rng = np.random.default_rng([seed, index, _preset_code(preset)])
    maze_anchor = None
    if preset == "office":
        cells = _office(rng)
    elif preset == "maze":
        cells, start_block, deep_block = _maze(rng)
        maze_anchor = (_maze_block_center(start_block), _maze_block_center(deep_block))
    elif preset == "apartment":
        cells = _apartment(rng)
    else:
        raise ValueError(f"unknown preset {preset!r}; expected office, maze, or apartment")

    height, width = cells.shape
    grid = OccupancyGrid(width, height, CELL_SIZE, cells)
    clear = _clear_cells(cells)

    if maze_anchor is not None:
        start_cell, target_cell = maze_anchor
    else:
        start_cell = _pick_cell(rng, clear)
        component = _component_of(cells, start_cell)
        sites = clear & component
        # keep the goal a nontrivial walk away when the map allows it
        sx, sy = start_cell
        ys, xs = np.nonzero(sites)
        d2 = (xs - sx) ** 2 + (ys - sy) ** 2
        far = d2 >= (2.0 / CELL_SIZE) ** 2
        if far.any():
            far_mask = np.zeros_like(sites)
            far_mask[ys[far], xs[far]] = True
            target_cell = _pick_cell(rng, far_mask)
        else:
            target_cell = _pick_cell(rng, sites)

    component = _component_of(cells, start_cell)
    sites = _clear_cells(cells) & component

    target_category = TARGET_CATEGORIES[int(rng.integers(len(TARGET_CATEGORIES)))]
    objects = [ObjectInstance(grid.cell_center(target_cell), target_category, True)]

    n_distractors = int(rng.integers(2, 7))
    for _ in range(n_distractors):
        cell = _pick_cell(rng, sites)
        category = DISTRACTOR_CATEGORIES[int(rng.integers(len(DISTRACTOR_CATEGORIES)))]
        objects.append(ObjectInstance(grid.cell_center(cell), category, False))

    start = Pose(*grid.cell_center(start_cell),
                 theta=float(rng.integers(12)) * math.pi / 6.0)
    scenario_id = f"{preset}_{index:03d}"
    return Scenario(scenario_id, grid, objects, start, target_category)


def _preset_code(preset: str) -> int:
    return {"office": 1, "maze": 2, "apartment": 3}.get(preset, 0)


def generate_scenarios(preset: str, count: int, seed: int) -> list[Scenario]:
    """Build ``count`` reproducible scenarios for one preset."""
    if count <= 0:
        raise ValueError(f"count must be positive, got {count}")
    return [build_scenario(preset, i, seed) for i in range(count)]
