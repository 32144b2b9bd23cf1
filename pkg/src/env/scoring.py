"""
Rescaled episode score.

Bands: dying before the do-nothing baseline maps onto [-100, 0), surviving
longer but not finishing onto [0, 80), finishing onto [80, 100] where the top
20 points reward operating cost saved relative to the baseline.
"""
from typing import Sequence

import numpy as np


def episode_cost(rewards: Sequence[float]) -> float:
    """Cumulative operating cost of an episode: sum of (1 - r) over non-failure steps."""
    values = np.asarray([r for r in rewards if r >= 0.0], dtype=np.float64)
    return float(np.sum(1.0 - values))


def l2rpn_score(
    agent_steps: int,
    baseline_steps: int,
    episode_length: int,
    agent_cost: float = 0.0,
    baseline_cost: float = 0.0,
    eps: float = 1e-9,
) -> float:
    if episode_length <= 0:
        raise ValueError(f"episode length must be positive, got {episode_length}")
    for name, steps in (("agent", agent_steps), ("baseline", baseline_steps)):
        if not 0 <= steps <= episode_length:
            raise ValueError(f"{name} survival {steps} outside [0, {episode_length}]")

    if agent_steps == episode_length:
        saving = (baseline_cost - agent_cost) / max(baseline_cost, eps)
        return 80.0 + 20.0 * float(np.clip(saving, 0.0, 1.0))
    if baseline_steps == 0 and agent_steps == 0:
        return -100.0
    if agent_steps < baseline_steps:
        return -100.0 * (1.0 - agent_steps / baseline_steps)
    return 80.0 * (agent_steps - baseline_steps) / (episode_length - baseline_steps)
