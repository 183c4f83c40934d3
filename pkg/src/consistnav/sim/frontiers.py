"""Frontier detection on the agent's discovered map."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..geometry import CellState, OccupancyGrid

# frontier clusters smaller than this are sensor specks, not goals
MIN_CLUSTER_CELLS = 3

_EIGHT = np.ones((3, 3), dtype=int)


def frontier_mask(discovered: OccupancyGrid) -> np.ndarray:
    """Free cells 4-adjacent to at least one Unknown cell."""
    cells = discovered.cells
    free = cells == int(CellState.FREE)
    unknown = cells == int(CellState.UNKNOWN)
    near_unknown = np.zeros_like(unknown)
    near_unknown[1:, :] |= unknown[:-1, :]
    near_unknown[:-1, :] |= unknown[1:, :]
    near_unknown[:, 1:] |= unknown[:, :-1]
    near_unknown[:, :-1] |= unknown[:, 1:]
    return free & near_unknown


def detect_frontiers(discovered: OccupancyGrid,
                     min_cluster: int = MIN_CLUSTER_CELLS) -> list[tuple[float, float]]:
    """Cluster frontier cells (8-adjacency) and return one subgoal per
    cluster of at least ``min_cluster`` cells: the cluster cell nearest its
    centroid, as a world point. Cluster order follows label scan order."""
    mask = frontier_mask(discovered)
    if not mask.any():
        return []
    labels, n = ndimage.label(mask, structure=_EIGHT)
    out = []
    ys, xs = np.nonzero(mask)
    cluster_ids = labels[ys, xs]
    for label in range(1, n + 1):
        sel = cluster_ids == label
        if int(np.count_nonzero(sel)) < min_cluster:
            continue
        cx = xs[sel].astype(float)
        cy = ys[sel].astype(float)
        mean_x, mean_y = cx.mean(), cy.mean()
        d2 = (cx - mean_x) ** 2 + (cy - mean_y) ** 2
        best = int(np.argmin(d2))  # first minimum in scan order breaks ties
        out.append(discovered.cell_center((int(cx[best]), int(cy[best]))))
    return out
