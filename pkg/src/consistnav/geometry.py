"""Core geometric types shared by every module: poses, actions, grids, observations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional

import numpy as np

TWO_PI = 2.0 * math.pi


class Action(Enum):
    """Discrete navigation action set."""

    FORWARD = "Forward"
    LEFT = "Left"
    RIGHT = "Right"
    STOP = "Stop"


class CellState(IntEnum):
    FREE = 0
    OCCUPIED = 1
    UNKNOWN = 2


def normalize_heading(angle: float) -> float:
    """Wrap an angle into [0, 2*pi). Raises ValueError on non-finite input."""
    if not math.isfinite(angle):
        raise ValueError(f"heading must be finite, got {angle!r}")
    wrapped = math.fmod(angle, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    if wrapped >= TWO_PI:  # fmod can land exactly on 2*pi after the add
        wrapped -= TWO_PI
    return wrapped


def angle_diff(a: float, b: float) -> float:
    """Signed smallest rotation from b to a, in (-pi, pi]."""
    d = math.fmod(a - b, TWO_PI)
    if d > math.pi:
        d -= TWO_PI
    elif d <= -math.pi:
        d += TWO_PI
    return d


@dataclass(frozen=True)
class Pose:
    """Agent pose: planar position in meters, heading in radians [0, 2*pi)."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"pose position must be finite, got ({self.x}, {self.y})")
        object.__setattr__(self, "theta", normalize_heading(self.theta))

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def moved(self, dx: float, dy: float) -> "Pose":
        return Pose(self.x + dx, self.y + dy, self.theta)

    def rotated(self, dtheta: float) -> "Pose":
        return Pose(self.x, self.y, self.theta + dtheta)


def euclidean_distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def bearing_to(origin: Pose, point: tuple[float, float]) -> float:
    """Absolute bearing from a pose's position to a world point."""
    return normalize_heading(math.atan2(point[1] - origin.y, point[0] - origin.x))


class OccupancyGrid:
    """2D occupancy grid over a metric workspace.

    Cells are stored row-major in a (height, width) uint8 array and indexed by
    (ix, iy) pairs where ix runs along x/width and iy along y/height. A point
    exactly on a cell edge belongs to the higher-index cell.
    """

    def __init__(self, width: int, height: int, cell_size: float,
                 cells: Optional[np.ndarray] = None,
                 fill: CellState = CellState.FREE) -> None:
        if cell_size <= 0:
            raise ValueError(f"cell_size must be positive, got {cell_size}")
        if width <= 0 or height <= 0:
            raise ValueError(f"grid dimensions must be positive, got {width}x{height}")
        self.width = int(width)
        self.height = int(height)
        self.cell_size = float(cell_size)
        if cells is None:
            self.cells = np.full((self.height, self.width), int(fill), dtype=np.uint8)
        else:
            cells = np.asarray(cells, dtype=np.uint8)
            if cells.shape != (self.height, self.width):
                raise ValueError(
                    f"cells shape {cells.shape} does not match grid {height}x{width}")
            self.cells = cells

    # -- indexing ---------------------------------------------------------

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def get(self, ix: int, iy: int) -> CellState:
        if not self.in_bounds(ix, iy):
            raise IndexError(f"cell ({ix}, {iy}) outside {self.width}x{self.height} grid")
        return CellState(self.cells[iy, ix])

    def set(self, ix: int, iy: int, state: CellState) -> None:
        if not self.in_bounds(ix, iy):
            raise IndexError(f"cell ({ix}, {iy}) outside {self.width}x{self.height} grid")
        self.cells[iy, ix] = int(state)

    def world_extent(self) -> tuple[float, float]:
        return (self.width * self.cell_size, self.height * self.cell_size)

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.width, self.height, self.cell_size, self.cells.copy())

    def count(self, state: CellState) -> int:
        return int(np.count_nonzero(self.cells == int(state)))

    # -- world <-> cell ---------------------------------------------------

    def world_to_cell(self, point: tuple[float, float]) -> tuple[int, int]:
        """Map a world point to its containing cell; edge points go to the
        higher-index cell. Raises IndexError for points outside the grid."""
        ix = int(math.floor(point[0] / self.cell_size))
        iy = int(math.floor(point[1] / self.cell_size))
        if not self.in_bounds(ix, iy):
            raise IndexError(
                f"point {point} maps to cell ({ix}, {iy}) outside "
                f"{self.width}x{self.height} grid")
        return (ix, iy)

    def cell_center(self, cell: tuple[int, int]) -> tuple[float, float]:
        return ((cell[0] + 0.5) * self.cell_size, (cell[1] + 0.5) * self.cell_size)

    def is_free_at(self, point: tuple[float, float]) -> bool:
        try:
            ix, iy = self.world_to_cell(point)
        except IndexError:
            return False
        return self.cells[iy, ix] == int(CellState.FREE)


def world_to_cell(point: tuple[float, float], grid: OccupancyGrid) -> tuple[int, int]:
    """Module-level alias for OccupancyGrid.world_to_cell."""
    return grid.world_to_cell(point)


@dataclass(frozen=True)
class SemanticObservation:
    """One projected detection: world position, scores, and the label flag."""

    world_pos: tuple[float, float]
    confidence: float
    is_target: bool
    itm_score: Optional[float] = None
    step: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0,1], got {self.confidence}")
        if self.itm_score is not None and not (0.0 <= self.itm_score <= 1.0):
            raise ValueError(f"itm_score must be in [0,1], got {self.itm_score}")
        if self.step < 0:
            raise ValueError(f"step must be nonnegative, got {self.step}")


@dataclass(frozen=True)
class ObjectInstance:
    """A placed object: position, category label, and whether it is the goal class."""

    position: tuple[float, float]
    category: str
    is_target: bool = False
