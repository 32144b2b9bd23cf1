from typing import Callable, Dict, Optional, Union

import numpy as np

from src.agents.buffers import TransitionBatch
from src.agents.ppo import PPOAgent, compute_gae
from src.agents.sacd import SACDAgent

Agent = Union[SACDAgent, PPOAgent]
NextValueFn = Callable[[TransitionBatch], np.ndarray]
ResidualFn = Callable[[TransitionBatch], np.ndarray]

WAITING = {"status": "waiting"}


def update_cycle(
    agent: Agent,
    interactions: int = 0,
    next_values_fn: Optional[NextValueFn] = None,
    residual_fn: Optional[ResidualFn] = None,
) -> Dict[str, float]:
    """
    Run one update cycle if the agent is ready, else report ``waiting``.

    SACD samples one replay batch once ``interactions`` reaches the update
    start; PPO waits for a full rollout, seals it, computes advantages and
    clears it afterwards. ``next_values_fn`` replaces the bootstrap value
    V(s') of each sampled transition; ``residual_fn`` replaces the PPO TD
    residuals of a sealed rollout. Both carry the dependent targets.
    """
    if isinstance(agent, SACDAgent):
        if not agent.ready(interactions):
            return dict(WAITING)
        batch = agent.buffer.sample(agent.hp.batch_size)
        next_values = next_values_fn(batch) if next_values_fn is not None else None
        return agent.update(batch, next_values)

    if not agent.ready():
        return dict(WAITING)
    batch = agent.rollout.seal()
    if residual_fn is not None:
        next_values, deltas = None, residual_fn(batch)
    else:
        next_values = next_values_fn(batch) if next_values_fn is not None else agent.value(batch.next_states)
        deltas = None
    advantages, value_targets = compute_gae(
        batch.rewards, batch.values, next_values, batch.dones, agent.hp.gamma, agent.hp.gae_lambda, deltas=deltas
    )
    agent.rollout.set_advantages(advantages, value_targets)
    metrics = agent.update(batch, advantages, value_targets)
    agent.rollout.clear()
    return metrics
