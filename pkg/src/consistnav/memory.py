"""Persistent candidate memory.

Accumulates projected semantic detections into long-lived object hypotheses.
Each hypothesis tracks a smoothed position, asymmetric confidence, target /
non-target observation counts, an ITM score window, and failure bookkeeping;
a scalar consistency score gates which hypotheses may influence control.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .geometry import SemanticObservation, euclidean_distance

# Non-target evidence shrinks confidence at a fixed fraction of the gain rate,
# so misses suppress a hypothesis gradually instead of killing it outright.
NEGATIVE_RATE = 0.12

# Positive-observation count at which the repeated-support term saturates.
SUPPORT_SATURATION = 6


@dataclass
class MemoryConfig:
    merge_radius: float = 0.5        # m, association gate
    ema_lambda: float = 0.3          # position smoothing factor
    alpha: float = 0.2               # confidence gain per target observation
    beta: float = 1.0                # negative-evidence step per verify failure
    w_confidence: float = 0.35
    w_ratio: float = 0.25
    w_support: float = 0.15
    w_itm: float = 0.15
    w_failure: float = 0.30
    epsilon: float = 1e-6
    tau_c: float = 0.15              # viability confidence threshold
    tau_cons: float = 0.42           # viability consistency threshold
    stale_after: int = 150           # steps without update before rank penalty
    cooldown_steps: int = 50         # steps a failed candidate sits out
    itm_window: int = 8              # bounded ITM history length
    failure_decay: float = 0.5       # confidence multiplier on pursuit failure
    freeze_after: int = 2            # pursuit failures before permanent freeze
    stale_penalty: float = 0.2
    visit_penalty: float = 0.2
    visit_window: int = 30           # recently-visited horizon for rank penalty

    def __post_init__(self) -> None:
        if not (0.0 < self.ema_lambda < 1.0):
            raise ValueError(f"ema_lambda must be in (0,1), got {self.ema_lambda}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        for name in ("tau_c", "tau_cons"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0,1], got {v}")


@dataclass
class Candidate:
    """One persistent object hypothesis."""

    candidate_id: int
    mu: tuple[float, float]
    confidence: float
    negative_evidence: float = 0.0
    target_obs: int = 0
    nontarget_obs: int = 0
    consistency: float = 0.0
    itm_history: list[float] = field(default_factory=list)
    failure_count: int = 0
    frozen: bool = False
    cooldown_until: int = 0
    last_update: int = 0
    last_visited: Optional[int] = None

    @property
    def itm_mean(self) -> float:
        if not self.itm_history:
            return 0.0
        return sum(self.itm_history) / len(self.itm_history)

    def confidence_band(self) -> str:
        """Display label only; has no behavioral role."""
        if self.confidence >= 0.7:
            return "high"
        if self.confidence >= 0.4:
            return "medium"
        return "low"

    def to_dict(self) -> dict:
        return {
            "id": self.candidate_id,
            "mu": [self.mu[0], self.mu[1]],
            "confidence": self.confidence,
            "negative_evidence": self.negative_evidence,
            "target_obs": self.target_obs,
            "nontarget_obs": self.nontarget_obs,
            "consistency": self.consistency,
            "itm_history": list(self.itm_history),
            "itm_mean": self.itm_mean,
            "failure_count": self.failure_count,
            "frozen": self.frozen,
            "cooldown_until": self.cooldown_until,
            "last_update": self.last_update,
            "last_visited": self.last_visited,
        }


def update_position(mu: tuple[float, float], obs_pos: tuple[float, float],
                    ema_lambda: float) -> tuple[float, float]:
    """Exponential position smoothing toward a new observation."""
    if not (0.0 < ema_lambda <= 1.0):
        raise ValueError(f"smoothing factor must be in (0,1], got {ema_lambda}")
    keep = 1.0 - ema_lambda
    return (keep * mu[0] + ema_lambda * obs_pos[0],
            keep * mu[1] + ema_lambda * obs_pos[1])


def update_belief(c: Candidate, y: int, z: int, cfg: MemoryConfig) -> Candidate:
    """Asymmetric belief update.

    y=1 marks a target-consistent observation, y=0 a non-target one;
    z=1 marks a verify-stage failure. Confidence rises by alpha per hit and
    falls by NEGATIVE_RATE*alpha per miss, clamped to [0,1]; negative
    evidence accumulates additively. Mutates and returns ``c``.
    """
    c.confidence = min(1.0, c.confidence + cfg.alpha * y
                       - NEGATIVE_RATE * cfg.alpha * (1 - y))
    c.confidence = max(0.0, c.confidence)
    c.negative_evidence += cfg.beta * z
    if y:
        c.target_obs += 1
    else:
        c.nontarget_obs += 1
    return c


def failure_penalty(c: Candidate) -> float:
    return min(1.0, 0.5 * c.failure_count)


def consistency_score(c: Candidate, cfg: MemoryConfig) -> float:
    """Scalar consistency in [0,1] combining confidence, the positive
    observation ratio, saturated repeated support, ITM evidence, and a
    failure penalty."""
    ratio = c.target_obs / (c.target_obs + c.nontarget_obs + cfg.epsilon)
    support = min(1.0, c.target_obs / SUPPORT_SATURATION)
    raw = (cfg.w_confidence * c.confidence
           + cfg.w_ratio * ratio
           + cfg.w_support * support
           + cfg.w_itm * c.itm_mean
           - cfg.w_failure * failure_penalty(c))
    return min(1.0, max(0.0, raw))


def priority(c: Candidate, t: int, cfg: MemoryConfig) -> float:
    """Rank score: confidence + consistency + capped support + ITM evidence,
    penalizing stale and recently visited candidates."""
    score = (c.confidence + c.consistency + 0.1 * min(c.target_obs, 10)
             + c.itm_mean)
    if t - c.last_update > cfg.stale_after:
        score -= cfg.stale_penalty
    if c.last_visited is not None and t - c.last_visited <= cfg.visit_window:
        score -= cfg.visit_penalty
    return score


def apply_pursuit_failure(c: Candidate, t: int, cfg: MemoryConfig) -> Candidate:
    """Penalize the active candidate after a failed pursuit: add negative
    evidence, count the failure, decay confidence, start a cooldown, and
    freeze permanently after ``freeze_after`` failures. Mutates ``c``."""
    c.negative_evidence += cfg.beta
    c.failure_count += 1
    c.confidence *= cfg.failure_decay
    c.cooldown_until = t + cfg.cooldown_steps
    if c.failure_count >= cfg.freeze_after:
        c.frozen = True
    c.consistency = consistency_score(c, cfg)
    return c


class CandidateMemory:
    """Owns the candidate list for one episode."""

    def __init__(self, cfg: MemoryConfig) -> None:
        self.cfg = cfg
        self.candidates: dict[int, Candidate] = {}
        self._next_id = 0

    def __len__(self) -> int:
        return len(self.candidates)

    def get(self, candidate_id: int) -> Candidate:
        return self.candidates[candidate_id]

    def ids(self) -> list[int]:
        return sorted(self.candidates)

    def associate(self, obs: SemanticObservation) -> int:
        """Match an observation to the nearest candidate within the merge
        radius, or create a new candidate seeded from it. Returns the id.
        Ties between equidistant candidates break toward the lowest id."""
        best_id, best_dist = None, float("inf")
        for cid in sorted(self.candidates):
            d = euclidean_distance(self.candidates[cid].mu, obs.world_pos)
            if d < best_dist:
                best_id, best_dist = cid, d
        if best_id is not None and best_dist < self.cfg.merge_radius:
            return best_id
        cid = self._next_id
        self._next_id += 1
        cand = Candidate(
            candidate_id=cid,
            mu=obs.world_pos,
            confidence=obs.confidence,
            target_obs=1 if obs.is_target else 0,
            nontarget_obs=0 if obs.is_target else 1,
            last_update=obs.step,
        )
        if obs.itm_score is not None:
            cand.itm_history.append(obs.itm_score)
        cand.consistency = consistency_score(cand, self.cfg)
        self.candidates[cid] = cand
        return cid

    def integrate(self, obs: SemanticObservation) -> int:
        """Associate and merge one observation: smooth the position, apply
        the belief update, and extend the ITM window. Returns the id."""
        before = set(self.candidates)
        cid = self.associate(obs)
        c = self.candidates[cid]
        if cid in before:
            c.mu = update_position(c.mu, obs.world_pos, self.cfg.ema_lambda)
            update_belief(c, 1 if obs.is_target else 0, 0, self.cfg)
            if obs.itm_score is not None:
                c.itm_history.append(obs.itm_score)
                if len(c.itm_history) > self.cfg.itm_window:
                    del c.itm_history[:len(c.itm_history) - self.cfg.itm_window]
            c.last_update = obs.step
            c.consistency = consistency_score(c, self.cfg)
        return cid

    def refresh_consistency(self) -> None:
        for c in self.candidates.values():
            c.consistency = consistency_score(c, self.cfg)

    def viable_set(self, t: int) -> set[int]:
        """Candidates admissible for executive control: unfrozen, past their
        cooldown, positive-dominant, and above both thresholds (inclusive)."""
        cfg = self.cfg
        return {
            cid for cid, c in self.candidates.items()
            if (not c.frozen
                and t >= c.cooldown_until
                and c.target_obs > c.nontarget_obs
                and c.confidence >= cfg.tau_c
                and c.consistency >= cfg.tau_cons)
        }

    def rank_candidates(self, viable: set[int], t: int) -> list[tuple[int, float]]:
        """Order viable candidates by descending priority, ties by ascending
        id. Returns (id, priority) pairs."""
        scored = [(cid, priority(self.candidates[cid], t, self.cfg))
                  for cid in viable]
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored

    def ranked_viable(self, t: int) -> list[tuple[int, float]]:
        return self.rank_candidates(self.viable_set(t), t)

    def mark_visited(self, candidate_id: int, t: int) -> None:
        self.candidates[candidate_id].last_visited = t

    def record_pursuit_failure(self, candidate_id: int, t: int) -> None:
        apply_pursuit_failure(self.candidates[candidate_id], t, self.cfg)

    def snapshot(self) -> list[dict]:
        return [self.candidates[cid].to_dict() for cid in sorted(self.candidates)]
