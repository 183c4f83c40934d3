"""Line-of-sight sensing and the synthetic open-vocabulary detector stand-in."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..geometry import (CellState, ObjectInstance, OccupancyGrid, Pose,
                        SemanticObservation, angle_diff, bearing_to,
                        euclidean_distance)


@dataclass
class DetectorConfig:
    sensing_range: float = 5.0       # m
    fov: float = math.radians(79.0)  # rad
    p_detect: float = 0.8            # per-step detection of a visible true target
    p_confuse: float = 0.05          # visible distractor emits a target label
    p_hallucinate: float = 0.02      # spurious target detection per step
    conf_true_mean: float = 0.60
    conf_true_sd: float = 0.15
    conf_false_mean: float = 0.25
    conf_false_sd: float = 0.15
    itm_true_mean: float = 0.30
    itm_true_sd: float = 0.10
    itm_false_mean: float = 0.08
    itm_false_sd: float = 0.05
    pos_noise_sd: float = 0.1        # m, isotropic projection noise
    hallucinate_min_dist: float = 1.2  # m, spurious detections spawn beyond this
    blackout_from: Optional[int] = None   # detector dark for steps in [from, until)
    blackout_until: Optional[int] = None

    def __post_init__(self) -> None:
        for name in ("p_detect", "p_confuse", "p_hallucinate"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0,1], got {v}")

    def dark_at(self, step: int) -> bool:
        if self.blackout_from is None:
            return False
        until = self.blackout_until if self.blackout_until is not None else math.inf
        return self.blackout_from <= step < until


def grid_ray_clear(grid: OccupancyGrid, a: tuple[int, int], b: tuple[int, int]) -> bool:
    """Bresenham line walk from cell a to cell b; any intermediate Occupied
    cell blocks. Endpoints do not block, and the stepping visits one cell per
    major axis step, so merely touching an Occupied corner does not block."""
    x0, y0 = a
    x1, y1 = b
    dx, dy = abs(x1 - x0), abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx - dy
    x, y = x0, y0
    while True:
        if (x, y) != a and (x, y) != b:
            if grid.cells[y, x] == int(CellState.OCCUPIED):
                return False
        if (x, y) == b:
            return True
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x += sx
        if e2 < dx:
            err += dx
            y += sy


def visibility_mask(grid: OccupancyGrid, pose: Pose, sensing_range: float,
                    fov: float) -> np.ndarray:
    """Boolean (height, width) mask of cells swept by a dense ray fan from
    the pose, stopping each ray at the first Occupied cell (which is itself
    marked visible, so walls are sensed)."""
    step = grid.cell_size * 0.5
    n_steps = max(1, int(sensing_range / step))
    n_rays = max(5, int(math.degrees(fov) * 1.5) + 1)
    angles = pose.theta + np.linspace(-fov / 2.0, fov / 2.0, n_rays)
    radii = np.arange(1, n_steps + 1) * step
    xs = pose.x + np.cos(angles)[:, None] * radii[None, :]
    ys = pose.y + np.sin(angles)[:, None] * radii[None, :]
    ix = np.floor(xs / grid.cell_size).astype(np.int64)
    iy = np.floor(ys / grid.cell_size).astype(np.int64)
    inside = (ix >= 0) & (ix < grid.width) & (iy >= 0) & (iy < grid.height)
    occupied = np.zeros(ix.shape, dtype=bool)
    occupied[inside] = grid.cells[iy[inside], ix[inside]] == int(CellState.OCCUPIED)
    blocked = occupied | ~inside
    # a sample is visible until (and including) the first blocking sample
    ahead_blocks = np.cumsum(blocked, axis=1) - blocked.astype(np.int64)
    visible = (ahead_blocks == 0) & inside

    mask = np.zeros((grid.height, grid.width), dtype=bool)
    mask[iy[visible], ix[visible]] = True
    try:
        ax, ay = grid.world_to_cell(pose.position)
        mask[ay, ax] = True
    except IndexError:
        pass
    return mask


def visible_objects(grid: OccupancyGrid, objects: list[ObjectInstance], pose: Pose,
                    sensing_range: float, fov: float) -> list[ObjectInstance]:
    """Objects within range, inside the view cone, and with a clear grid ray."""
    agent_cell = grid.world_to_cell(pose.position)
    out = []
    for obj in objects:
        if euclidean_distance(pose.position, obj.position) > sensing_range:
            continue
        if abs(angle_diff(bearing_to(pose, obj.position), pose.theta)) > fov / 2.0:
            continue
        if not grid_ray_clear(grid, agent_cell, grid.world_to_cell(obj.position)):
            continue
        out.append(obj)
    return out


def raycast_visible(grid: OccupancyGrid, objects: list[ObjectInstance], pose: Pose,
                    cfg: DetectorConfig) -> tuple[list[ObjectInstance], np.ndarray]:
    """Visible object instances plus the visible-cell mask for this pose."""
    mask = visibility_mask(grid, pose, cfg.sensing_range, cfg.fov)
    objs = visible_objects(grid, objects, pose, cfg.sensing_range, cfg.fov)
    return objs, mask


def update_discovered_map(discovered: OccupancyGrid, world: OccupancyGrid, pose: Pose,
                          sensing_range: float, fov: float) -> np.ndarray:
    """Fold the currently visible cells into the agent's map (ground-truth
    states; never reverts a known cell to Unknown). Returns the mask."""
    mask = visibility_mask(world, pose, sensing_range, fov)
    discovered.cells[mask] = world.cells[mask]
    return mask


def _clipped_normal(rng: np.random.Generator, mean: float, sd: float) -> float:
    return float(min(1.0, max(0.0, rng.normal(mean, sd))))


def synth_detect(visible: list[ObjectInstance], visible_mask: np.ndarray,
                 pose: Pose, grid: OccupancyGrid, cfg: DetectorConfig,
                 rng: np.random.Generator, step: int) -> list[SemanticObservation]:
    """Sample this step's detections.

    Visible true targets fire with p_detect using the true score
    distributions; visible distractors emit a target-labeled confusion with
    p_confuse or a correctly labeled non-target detection with p_detect;
    with p_hallucinate a spurious target detection lands on a uniformly
    chosen visible free cell beyond hallucinate_min_dist. Positions carry
    isotropic Gaussian noise.
    """
    if cfg.dark_at(step):
        return []

    out = []
    for obj in visible:
        if obj.is_target:
            if rng.random() < cfg.p_detect:
                out.append(_make_obs(obj.position, True, cfg.conf_true_mean,
                                     cfg.conf_true_sd, cfg.itm_true_mean,
                                     cfg.itm_true_sd, cfg, rng, step))
        else:
            if rng.random() < cfg.p_confuse:
                out.append(_make_obs(obj.position, True, cfg.conf_false_mean,
                                     cfg.conf_false_sd, cfg.itm_false_mean,
                                     cfg.itm_false_sd, cfg, rng, step))
            elif rng.random() < cfg.p_detect:
                out.append(_make_obs(obj.position, False, cfg.conf_false_mean,
                                     cfg.conf_false_sd, cfg.itm_false_mean,
                                     cfg.itm_false_sd, cfg, rng, step))

    if cfg.p_hallucinate > 0 and rng.random() < cfg.p_hallucinate:
        free = visible_mask & (grid.cells == int(CellState.FREE))
        ys, xs = np.nonzero(free)
        if len(xs) > 0:
            centers_x = (xs + 0.5) * grid.cell_size
            centers_y = (ys + 0.5) * grid.cell_size
            d2 = (centers_x - pose.x) ** 2 + (centers_y - pose.y) ** 2
            far = d2 >= cfg.hallucinate_min_dist ** 2
            if far.any():
                fx, fy = xs[far], ys[far]
                pick = int(rng.integers(len(fx)))
                center = grid.cell_center((int(fx[pick]), int(fy[pick])))
                out.append(_make_obs(center, True, cfg.conf_false_mean,
                                     cfg.conf_false_sd, cfg.itm_false_mean,
                                     cfg.itm_false_sd, cfg, rng, step))
    return out


def _make_obs(position: tuple[float, float], as_target: bool, conf_mean: float,
              conf_sd: float, itm_mean: float, itm_sd: float, cfg: DetectorConfig,
              rng: np.random.Generator, step: int) -> SemanticObservation:
    noise = rng.normal(0.0, cfg.pos_noise_sd, 2) if cfg.pos_noise_sd > 0 else (0.0, 0.0)
    return SemanticObservation(
        world_pos=(position[0] + float(noise[0]), position[1] + float(noise[1])),
        confidence=_clipped_normal(rng, conf_mean, conf_sd),
        is_target=as_target,
        itm_score=_clipped_normal(rng, itm_mean, itm_sd),
        step=step,
    )
