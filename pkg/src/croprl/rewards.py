"""Aesthetics-aware reward.

The per-step reward is the sign of the aesthetics-score change minus a small
per-step penalty that grows with episode length, with an additional fixed
negative reward whenever the window's aspect ratio leaves the allowed range.
Only the ordering of scores matters: the sign clipping makes the reward
invariant under any strictly increasing rescaling of the scorer.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class RewardConfig:
    """Penalty terms and the permitted aspect-ratio band.

    aspect_penalty is added (it is negative) whenever the ratio falls
    strictly outside [ar_low, ar_high]; the boundary values themselves are
    not penalized.
    """

    aspect_penalty: float = -5.0
    step_penalty_coeff: float = 0.001
    ar_low: float = 0.5
    ar_high: float = 2.0

    def __post_init__(self) -> None:
        if self.aspect_penalty > 0:
            raise ValueError("aspect_penalty must be <= 0")
        if self.step_penalty_coeff < 0:
            raise ValueError("step_penalty_coeff must be >= 0")
        if not 0 < self.ar_low < self.ar_high:
            raise ValueError("need 0 < ar_low < ar_high")


def base_reward(
    score_prev: float, score_new: float, t: int, config: RewardConfig = RewardConfig()
) -> float:
    """Sign of the score change minus the step penalty for step index t (from 0)."""
    if score_new > score_prev:
        s = 1.0
    elif score_new < score_prev:
        s = -1.0
    else:
        s = 0.0
    return s - config.step_penalty_coeff * (t + 1)


def full_reward(
    score_prev: float,
    score_new: float,
    t: int,
    ar: float,
    config: RewardConfig = RewardConfig(),
) -> float:
    """Base reward plus the aspect-ratio penalty when ar is strictly out of range."""
    r = base_reward(score_prev, score_new, t, config)
    if ar < config.ar_low or ar > config.ar_high:
        r += config.aspect_penalty
    return r


def termination_reward(t: int, config: RewardConfig = RewardConfig()) -> float:
    """Reward for the stop action: the window is unchanged, so only the step penalty."""
    return -config.step_penalty_coeff * (t + 1)
