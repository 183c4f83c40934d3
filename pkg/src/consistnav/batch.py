"""Batch execution: run manifests, per-episode seed derivation, optional
process-level parallelism, and deterministic results files.

``results.json`` is bit-reproducible for a given manifest: host- and
time-dependent information goes to a sibling ``meta.json``, and trajectory
paths are stored relative to the output directory.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .config import RunConfig
from .evaluation import EpisodeRecord, aggregate_report
from .scenario import Scenario, load_scenario
from .sim.episode import Variant, run_episode

VARIANT_BY_NAME = {v.value: v for v in Variant}


@dataclass
class RunManifest:
    scenario_paths: list[str]
    variants: list[str]
    episodes_per_scenario: int
    global_seed: int
    out_dir: str
    dump_trajectories: bool = False
    config_path: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.variants:
            raise ValueError("manifest requires at least one variant")
        for name in self.variants:
            if name not in VARIANT_BY_NAME:
                raise ValueError(f"unknown variant {name!r}; expected one of "
                                 f"{sorted(VARIANT_BY_NAME)}")
        if self.episodes_per_scenario <= 0:
            raise ValueError("episodes_per_scenario must be positive")

    def portable_dict(self) -> dict:
        """Manifest view embedded in results.json: free of absolute paths so
        reruns elsewhere compare byte-identical."""
        return {
            "scenarios": [Path(p).stem for p in self.scenario_paths],
            "variants": list(self.variants),
            "episodes_per_scenario": self.episodes_per_scenario,
            "global_seed": self.global_seed,
            "dump_trajectories": self.dump_trajectories,
        }

    def to_dict(self) -> dict:
        return {
            "scenario_paths": list(self.scenario_paths),
            "variants": list(self.variants),
            "episodes_per_scenario": self.episodes_per_scenario,
            "global_seed": self.global_seed,
            "out_dir": self.out_dir,
            "dump_trajectories": self.dump_trajectories,
            "config_path": self.config_path,
        }


def episode_seed(global_seed: int, scenario_id: str, variant: str,
                 episode_index: int) -> int:
    """Stable 64-bit per-episode seed; identical across runs and platforms."""
    key = f"{global_seed}|{scenario_id}|{variant}|{episode_index}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def resolve_workers(requested: Optional[int] = None) -> int:
    """Worker count: explicit argument, else CONSISTNAV_THREADS (0 = auto),
    else the machine's CPU count."""
    if requested is None:
        env = os.environ.get("CONSISTNAV_THREADS")
        if env is not None:
            requested = int(env)
    if requested is None or requested == 0:
        return os.cpu_count() or 1
    return max(1, requested)


def resolve_scenario_paths(scenarios: str | Path) -> list[str]:
    """Accept a directory of scenario files or an index.json; returns sorted
    scenario file paths."""
    path = Path(scenarios)
    if path.is_dir():
        files = sorted(p for p in path.glob("*.json")
                       if p.name not in ("index.json", "manifest.json"))
        if not files:
            raise FileNotFoundError(f"no scenario files in {path}")
        return [str(p) for p in files]
    if path.name == "index.json":
        data = json.loads(path.read_text(encoding="utf-8"))
        return [str(path.parent / entry["file"]) for entry in data["scenarios"]]
    if path.is_file():
        return [str(path)]
    raise FileNotFoundError(f"scenario path {path} does not exist")


_SCENARIO_CACHE: dict[str, Scenario] = {}
_CONFIG_CACHE: dict[str, RunConfig] = {}


def _cached_scenario(path: str) -> Scenario:
    sc = _SCENARIO_CACHE.get(path)
    if sc is None:
        sc = load_scenario(path)
        _SCENARIO_CACHE[path] = sc
    return sc


def _cached_config(cfg_json: str) -> RunConfig:
    cfg = _CONFIG_CACHE.get(cfg_json)
    if cfg is None:
        cfg = RunConfig.from_dict(json.loads(cfg_json))
        _CONFIG_CACHE[cfg_json] = cfg
    return cfg


def _run_spec(spec: tuple) -> dict:
    (path, variant_name, ep_index, seed, cfg_json, traj_file) = spec
    scenario = _cached_scenario(path)
    cfg = _cached_config(cfg_json)
    episode_id = f"{scenario.scenario_id}:{variant_name}:{ep_index}"
    record = run_episode(scenario, VARIANT_BY_NAME[variant_name], cfg, seed,
                         episode_id=episode_id, traj_path=traj_file)
    return record.to_dict()


def build_specs(manifest: RunManifest, cfg: RunConfig) -> list[tuple]:
    """Episode specs in canonical order: scenario id, manifest variant
    order, episode index."""
    cfg_json = json.dumps(cfg.to_dict(), sort_keys=True)
    out_dir = Path(manifest.out_dir)
    traj_dir = out_dir / "trajectories"
    specs = []
    paths = sorted(manifest.scenario_paths, key=lambda p: Path(p).stem)
    for path in paths:
        sid = Path(path).stem
        for variant in manifest.variants:
            for ep in range(manifest.episodes_per_scenario):
                seed = episode_seed(manifest.global_seed, sid, variant, ep)
                traj_file = None
                if manifest.dump_trajectories:
                    traj_file = str(traj_dir / f"{sid}__{variant}__{ep:02d}.jsonl")
                specs.append((path, variant, ep, seed, cfg_json, traj_file))
    return specs


def _record_sort_key(manifest: RunManifest, rec: dict) -> tuple:
    order = {name: i for i, name in enumerate(manifest.variants)}
    sid, variant, ep = rec["episode_id"].rsplit(":", 2)
    return (sid, order.get(variant, len(order)), int(ep))


def run_batch(manifest: RunManifest, cfg: RunConfig,
              workers: Optional[int] = None) -> dict:
    """Execute every episode in the manifest and write results.json,
    meta.json, and manifest.json into the output directory. Interruption
    yields a partial results file flagged ``"incomplete": true``."""
    started = time.time()
    out_dir = Path(manifest.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if manifest.dump_trajectories:
        (out_dir / "trajectories").mkdir(exist_ok=True)

    n_workers = resolve_workers(workers)
    specs = build_specs(manifest, cfg)

    records: list[dict] = []
    incomplete = False
    if n_workers <= 1 or len(specs) <= 1:
        try:
            for spec in specs:
                records.append(_run_spec(spec))
        except KeyboardInterrupt:
            incomplete = True
    else:
        executor = ProcessPoolExecutor(max_workers=n_workers)
        futures = {executor.submit(_run_spec, spec): spec for spec in specs}
        try:
            pending = set(futures)
            while pending:
                done, pending = wait(pending, return_when=FIRST_COMPLETED)
                for fut in done:
                    records.append(fut.result())
            executor.shutdown()
        except KeyboardInterrupt:
            incomplete = True
            for fut in futures:
                fut.cancel()
            executor.shutdown(wait=False, cancel_futures=True)

    records.sort(key=lambda r: _record_sort_key(manifest, r))
    for rec in records:
        if rec.get("trajectory_path"):
            rec["trajectory_path"] = str(Path(rec["trajectory_path"]).relative_to(out_dir))

    typed = [EpisodeRecord.from_dict(r) for r in records]
    results = {
        "run_config": cfg.to_dict(),
        "manifest": manifest.portable_dict(),
        "incomplete": incomplete,
        "records": records,
        "aggregates": aggregate_report(typed) if typed else {},
    }
    (out_dir / "results.json").write_text(
        json.dumps(results, indent=1) + "\n", encoding="utf-8")
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), indent=1) + "\n", encoding="utf-8")
    meta = {
        "started_at": started,
        "finished_at": time.time(),
        "workers": n_workers,
        "episodes": len(records),
        "host": os.uname().nodename if hasattr(os, "uname") else "",
    }
    (out_dir / "meta.json").write_text(
        json.dumps(meta, indent=1) + "\n", encoding="utf-8")
    return results
