"""Scenario files: the on-disk JSON description of a world.

Schema (``"scenario_version": 1``)::

    {
      "scenario_version": 1,
      "id": "office_000",
      "cell_size": 0.1,
      "width": 80, "height": 60,
      "occupied": [[[0, 80]], [[0, 1], [79, 1]], ...],   # per-row RLE runs
      "objects": [{"x": 3.2, "y": 1.4, "category": "chair", "is_target": true}, ...],
      "start": {"x": 1.0, "y": 1.0, "theta": 0.0},
      "target_category": "chair"
    }

``occupied`` holds one list per grid row (index = iy); each entry is a
``[start_ix, run_length]`` pair of occupied cells. Rows with no occupied
cells are empty lists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .geometry import CellState, ObjectInstance, OccupancyGrid, Pose

SCENARIO_VERSION = 1


class ScenarioError(Exception):
    """Raised when a scenario file violates the schema."""


@dataclass
class Scenario:
    scenario_id: str
    grid: OccupancyGrid  # ground truth: Free/Occupied only
    objects: list[ObjectInstance]
    start: Pose
    target_category: str

    def targets(self) -> list[ObjectInstance]:
        return [o for o in self.objects if o.is_target]

    def distractors(self) -> list[ObjectInstance]:
        return [o for o in self.objects if not o.is_target]


def encode_rows(cells: np.ndarray) -> list[list[list[int]]]:
    """Run-length encode the occupied cells of each row."""
    rows = []
    for iy in range(cells.shape[0]):
        occupied = cells[iy] == int(CellState.OCCUPIED)
        runs = []
        ix = 0
        width = cells.shape[1]
        while ix < width:
            if occupied[ix]:
                start = ix
                while ix < width and occupied[ix]:
                    ix += 1
                runs.append([start, ix - start])
            else:
                ix += 1
        rows.append(runs)
    return rows


def decode_rows(rows: list, width: int, height: int) -> np.ndarray:
    cells = np.full((height, width), int(CellState.FREE), dtype=np.uint8)
    if len(rows) != height:
        raise ScenarioError(f"occupied: expected {height} rows, got {len(rows)}")
    for iy, runs in enumerate(rows):
        for run in runs:
            if not (isinstance(run, (list, tuple)) and len(run) == 2):
                raise ScenarioError(f"occupied[{iy}]: run {run!r} is not a [start, length] pair")
            start, length = int(run[0]), int(run[1])
            if start < 0 or length <= 0 or start + length > width:
                raise ScenarioError(
                    f"occupied[{iy}]: run [{start}, {length}] exceeds row width {width}")
            cells[iy, start:start + length] = int(CellState.OCCUPIED)
    return cells


def scenario_to_dict(sc: Scenario) -> dict[str, Any]:
    return {
        "scenario_version": SCENARIO_VERSION,
        "id": sc.scenario_id,
        "cell_size": sc.grid.cell_size,
        "width": sc.grid.width,
        "height": sc.grid.height,
        "occupied": encode_rows(sc.grid.cells),
        "objects": [
            {"x": o.position[0], "y": o.position[1],
             "category": o.category, "is_target": o.is_target}
            for o in sc.objects
        ],
        "start": {"x": sc.start.x, "y": sc.start.y, "theta": sc.start.theta},
        "target_category": sc.target_category,
    }


def _require(data: dict, key: str, where: str) -> Any:
    if key not in data:
        raise ScenarioError(f"{where}: missing required field '{key}'")
    return data[key]


def scenario_from_dict(data: dict[str, Any], scenario_id: str = "") -> Scenario:
    version = _require(data, "scenario_version", "scenario")
    if version != SCENARIO_VERSION:
        raise ScenarioError(f"scenario: unsupported scenario_version {version!r}")
    width = int(_require(data, "width", "scenario"))
    height = int(_require(data, "height", "scenario"))
    cell_size = float(_require(data, "cell_size", "scenario"))
    cells = decode_rows(_require(data, "occupied", "scenario"), width, height)
    grid = OccupancyGrid(width, height, cell_size, cells)

    objects = []
    for i, entry in enumerate(_require(data, "objects", "scenario")):
        where = f"objects[{i}]"
        pos = (float(_require(entry, "x", where)), float(_require(entry, "y", where)))
        obj = ObjectInstance(pos, str(_require(entry, "category", where)),
                             bool(entry.get("is_target", False)))
        if not grid.is_free_at(pos):
            raise ScenarioError(f"{where}: position {pos} is not inside a Free cell")
        objects.append(obj)

    start_raw = _require(data, "start", "scenario")
    start = Pose(float(_require(start_raw, "x", "start")),
                 float(_require(start_raw, "y", "start")),
                 float(start_raw.get("theta", 0.0)))
    if not grid.is_free_at(start.position):
        raise ScenarioError(f"start: pose {start.position} is not inside a Free cell")

    target_category = str(_require(data, "target_category", "scenario"))
    if not any(o.is_target for o in objects):
        raise ScenarioError("scenario: no object has is_target=true")

    return Scenario(scenario_id or str(data.get("id", "")), grid, objects, start,
                    target_category)


def save_scenario(sc: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=1) + "\n",
                          encoding="utf-8")


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    try:
        return scenario_from_dict(data, scenario_id=path.stem)
    except ScenarioError as e:
        raise ScenarioError(f"{path}: {e}") from e
