"""Shortest paths on the discovered occupancy grid.

8-connected moves over Free cells with unit straight cost and sqrt(2)
diagonals; a diagonal move is allowed only when both orthogonal neighbor
cells are Free (no corner cutting). Unknown cells are not traversable.
The heavy lifting runs through scipy's compiled Dijkstra; the evaluation
module carries its own independent hand-rolled oracle.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from ..geometry import CellState, OccupancyGrid

SQRT2 = math.sqrt(2.0)


def traversable_mask(grid: OccupancyGrid) -> np.ndarray:
    return grid.cells == int(CellState.FREE)


def build_nav_graph(free: np.ndarray) -> csr_matrix:
    """Sparse adjacency over the free-cell mask; nodes are flat row-major
    cell indices. Edges are emitted in a fixed direction order so downstream
    tie-breaking is deterministic."""
    h, w = free.shape
    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)
    rows, cols, weights = [], [], []

    def add(mask: np.ndarray, a: np.ndarray, b: np.ndarray, weight: float) -> None:
        rows.append(a[mask])
        cols.append(b[mask])
        weights.append(np.full(int(np.count_nonzero(mask)), weight))

    # east, south
    add(free[:, :-1] & free[:, 1:], idx[:, :-1], idx[:, 1:], 1.0)
    add(free[:-1, :] & free[1:, :], idx[:-1, :], idx[1:, :], 1.0)
    # southeast: requires east and south neighbors free
    m = free[:-1, :-1] & free[1:, 1:] & free[:-1, 1:] & free[1:, :-1]
    add(m, idx[:-1, :-1], idx[1:, 1:], SQRT2)
    # southwest: requires west and south neighbors free
    m = free[:-1, 1:] & free[1:, :-1] & free[:-1, :-1] & free[1:, 1:]
    add(m, idx[:-1, 1:], idx[1:, :-1], SQRT2)

    row = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    col = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    dat = np.concatenate(weights) if weights else np.zeros(0)
    return csr_matrix((dat, (row, col)), shape=(h * w, h * w))


def distance_field(grid: OccupancyGrid, source: tuple[int, int]) -> np.ndarray:
    """Path cost in cell units from the source to every cell; inf where
    unreachable (including all non-Free cells)."""
    free = traversable_mask(grid)
    sx, sy = source
    if not free[sy, sx]:
        return np.full((grid.height, grid.width), np.inf)
    graph = build_nav_graph(free)
    dist = dijkstra(graph, directed=False, indices=sy * grid.width + sx)
    return dist.reshape(grid.height, grid.width)


def plan_path(grid: OccupancyGrid, start: tuple[int, int],
              goal: tuple[int, int]) -> list[tuple[int, int]] | None:
    """Shortest cell path from start to goal, inclusive of both endpoints;
    None when the goal is unreachable. The start cell must be Free."""
    free = traversable_mask(grid)
    sx, sy = start
    gx, gy = goal
    if not free[sy, sx]:
        raise ValueError(f"start cell {start} is not Free")
    if not free[gy, gx]:
        return None
    if start == goal:
        return [start]
    w = grid.width
    graph = build_nav_graph(free)
    dist, pred = dijkstra(graph, directed=False, indices=sy * w + sx,
                          return_predecessors=True)
    goal_flat = gy * w + gx
    if not np.isfinite(dist[goal_flat]):
        return None
    path = []
    node = goal_flat
    while node >= 0:
        path.append((int(node % w), int(node // w)))
        node = int(pred[node])
    path.reverse()
    return path


def path_cost_cells(path: list[tuple[int, int]]) -> float:
    """Cost of a cell path in cell units (1 per straight, sqrt(2) per diagonal)."""
    cost = 0.0
    for (ax, ay), (bx, by) in zip(path, path[1:]):
        cost += SQRT2 if (ax != bx and ay != by) else 1.0
    return cost


def ray_clear_strict(grid: OccupancyGrid, a: tuple[int, int],
                     b: tuple[int, int]) -> bool:
    """Bresenham walk from a to b where Occupied cells block and a diagonal
    step additionally requires both orthogonal neighbors to be Free; used to
    pick steering waypoints the quantized motion can actually follow."""
    occ = int(CellState.OCCUPIED)
    cells = grid.cells
    x0, y0 = a
    x1, y1 = b
    dx, dy = abs(x1 - x0), abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx - dy
    x, y = x0, y0
    while (x, y) != (x1, y1):
        e2 = 2 * err
        step_x = e2 > -dy
        step_y = e2 < dx
        if step_x and step_y:
            if cells[y, x + sx] == occ or cells[y + sy, x] == occ:
                return False
        if step_x:
            err -= dy
            x += sx
        if step_y:
            err += dx
            y += sy
        if cells[y, x] == occ:
            return False
    return True


def nearest_free_cell(grid: OccupancyGrid, point: tuple[float, float],
                      max_radius_cells: int = 12) -> tuple[int, int] | None:
    """Closest Free cell to a world point, searched ring by ring in a
    deterministic order; None if nothing Free within the radius."""
    cx = int(math.floor(point[0] / grid.cell_size))
    cy = int(math.floor(point[1] / grid.cell_size))
    cx = min(max(cx, 0), grid.width - 1)
    cy = min(max(cy, 0), grid.height - 1)
    free = traversable_mask(grid)
    if free[cy, cx]:
        return (cx, cy)
    for r in range(1, max_radius_cells + 1):
        best, best_d2 = None, math.inf
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                if max(abs(dx), abs(dy)) != r:
                    continue
                x, y = cx + dx, cy + dy
                if 0 <= x < grid.width and 0 <= y < grid.height and free[y, x]:
                    center = grid.cell_center((x, y))
                    d2 = (center[0] - point[0]) ** 2 + (center[1] - point[1]) ** 2
                    if d2 < best_d2 - 1e-12:
                        best, best_d2 = (x, y), d2
        if best is not None:
            return best
    return None
