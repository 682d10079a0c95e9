"""Numeric core of group-relative policy optimization.

These operate on plain numbers supplied by an external trainer: rewards of a
rollout group and per-token log-probabilities. No model is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, GroupSizeError, LengthMismatchError

DEFAULT_GROUP_SIZE = 8


@dataclass(frozen=True)
class SurrogateParams:
    clip_eps: float = 0.2
    kl_coeff: float = 0.0

    def __post_init__(self):
        if not self.clip_eps > 0:
            raise ValueError(f"clip_eps must be > 0, got {self.clip_eps}")
        if self.kl_coeff < 0:
            raise ValueError(f"kl_coeff must be >= 0, got {self.kl_coeff}")


@dataclass(frozen=True)
class RolloutGroup:
    rewards: tuple[float, ...]
    # optional (new_logp, old_logp) token sequences, one pair per rollout
    logps: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...] | None = field(default=None)

    def __post_init__(self):
        if len(self.rewards) < 2:
            raise GroupSizeError(f"a rollout group needs at least 2 rewards, got {len(self.rewards)}")
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("rewards must be finite")
        if self.logps is not None and len(self.logps) != len(self.rewards):
            raise LengthMismatchError("one log-prob pair per rollout is required")

    @property
    def G(self) -> int:
        return len(self.rewards)

    def advantages(self, eps: float = 1e-8) -> np.ndarray:
        return group_advantages(self.rewards, eps)

    def surrogate(self, params: SurrogateParams = SurrogateParams()) -> float:
        """Mean over rollouts of the per-token clipped objective minus the KL penalty."""
        if self.logps is None:
            raise ValueError("surrogate needs per-token log-probs")
        adv = self.advantages()
        per_rollout = []
        for a, (new, old) in zip(adv, self.logps):
            ratios = np.exp(np.asarray(new, float) - np.asarray(old, float))
            terms = [clipped_term(r, a, params.clip_eps) for r in ratios]
            obj = float(np.mean(terms)) if terms else 0.0
            per_rollout.append(obj - params.kl_coeff * kl_estimate(new, old))
        return float(np.mean(per_rollout))


def group_advantages(rewards: Sequence[float], eps: float = 1e-8) -> np.ndarray:
    """(r - mean) / (population std + eps); exactly zero when all rewards are equal."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1 or r.size < 2:
        raise GroupSizeError(f"group size must be >= 2, got {r.size}")
    if not np.all(np.isfinite(r)):
        raise ValueError("rewards must be finite")
    if np.all(r == r[0]):
        return np.zeros_like(r)
    centered = r - r.mean()
    return centered / (r.std() + eps)


def clipped_term(ratio: float, advantage: float, eps: float = 0.2) -> float:
    if not ratio > 0:
        raise DomainError(f"importance ratio must be > 0, got {ratio}")
    if not eps > 0:
        raise DomainError(f"clip epsilon must be > 0, got {eps}")
    clipped = min(max(ratio, 1.0 - eps), 1.0 + eps)
    return float(min(ratio * advantage, clipped * advantage))


def kl_estimate(new_logp: Sequence[float], old_logp: Sequence[float]) -> float:
    """Mean of r - 1 - log r with r = exp(old - new); non-negative term by term."""
    new = np.asarray(new_logp, dtype=np.float64)
    old = np.asarray(old_logp, dtype=np.float64)
    if new.shape != old.shape:
        raise LengthMismatchError(f"log-prob sequences differ in length: {new.size} vs {old.size}")
    if new.size == 0:
        return 0.0
    d = old - new
    # expm1(d) - d is r - 1 - log r without cancellation near r = 1
    return float(max(np.mean(np.expm1(d) - d), 0.0))
