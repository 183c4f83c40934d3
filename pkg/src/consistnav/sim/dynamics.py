"""Discrete motion model: fixed forward steps and turn quanta with
segment-sampled collision checking."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..geometry import Action, CellState, OccupancyGrid, Pose


@dataclass
class EpisodeConfig:
    max_steps: int = 500
    success_radius: float = 0.2      # m
    forward_step: float = 0.25       # m
    turn_angle: float = math.radians(30.0)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_steps <= 0:
            raise ValueError(f"max_steps must be positive, got {self.max_steps}")
        if self.success_radius <= 0:
            raise ValueError(f"success_radius must be positive, got {self.success_radius}")


def step_dynamics(grid: OccupancyGrid, pose: Pose, action: Action,
                  cfg: EpisodeConfig) -> tuple[Pose, bool]:
    """Apply one action. Forward motion is blocked (pose unchanged,
    collided=True) if any cell sampled along the swept segment is not Free."""
    if action is Action.STOP:
        raise ValueError("Stop is terminal; it does not move the agent")
    if action is Action.LEFT:
        return pose.rotated(cfg.turn_angle), False
    if action is Action.RIGHT:
        return pose.rotated(-cfg.turn_angle), False

    dx = math.cos(pose.theta) * cfg.forward_step
    dy = math.sin(pose.theta) * cfg.forward_step
    sample = grid.cell_size * 0.5
    n = max(1, int(math.ceil(cfg.forward_step / sample)))
    for k in range(1, n + 1):
        frac = min(1.0, k * sample / cfg.forward_step)
        point = (pose.x + dx * frac, pose.y + dy * frac)
        try:
            ix, iy = grid.world_to_cell(point)
        except IndexError:
            return pose, True
        if grid.cells[iy, ix] != int(CellState.FREE):
            return pose, True
    return pose.moved(dx, dy), False
