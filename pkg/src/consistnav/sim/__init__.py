"""Deterministic gridworld harness: sensing, dynamics, frontiers, planning,
scenario generation, and the per-episode agent loop."""

from .dynamics import EpisodeConfig, step_dynamics
from .episode import Variant, run_episode
from .frontiers import detect_frontiers
from .mapgen import generate_scenarios
from .planner import plan_path
from .sensing import DetectorConfig, raycast_visible, synth_detect, update_discovered_map

__all__ = [
    "DetectorConfig", "EpisodeConfig", "Variant",
    "detect_frontiers", "generate_scenarios", "plan_path", "raycast_visible",
    "run_episode", "step_dynamics", "synth_detect", "update_discovered_map",
]
