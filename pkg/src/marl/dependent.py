"""
Dependent value targets through the empirical mid-level transition matrix.

Entry p_ij of the estimate is the observed frequency with which agent j acts
right after agent i. Dependent SACD bootstraps agent i with
sum_j p_ij V^j(s'), dependent PPO uses the same mixture inside its TD
residual; a row that is the indicator on i reduces both to the independent
learners.
"""
from typing import Sequence

import numpy as np

from src.agents.ppo import td_residuals
from src.exceptions import ShapeMismatchError


class MidPolicyEstimate:
    """n x n activation counts with a Laplace prior; rows always sum to 1."""

    def __init__(self, n_agents: int, prior: float = 1.0, forced_identity: bool = False):
        if n_agents < 1:
            raise ValueError(f"need at least one agent, got {n_agents}")
        if prior < 0:
            raise ValueError(f"prior must be non-negative, got {prior}")
        self.n_agents = n_agents
        self.prior = prior
        self.forced_identity = forced_identity
        self.counts = np.zeros((n_agents, n_agents))
        self.frozen = False

    def update(self, acting: int, following: int) -> "MidPolicyEstimate":
        if not (0 <= acting < self.n_agents and 0 <= following < self.n_agents):
            raise IndexError(f"agent pair ({acting}, {following}) outside 0..{self.n_agents - 1}")
        if not self.frozen:
            self.counts[acting, following] += 1
        return self

    def matrix(self) -> np.ndarray:
        if self.forced_identity:
            return np.eye(self.n_agents)
        weights = self.counts + self.prior
        totals = weights.sum(axis=1, keepdims=True)
        uniform = np.full_like(weights, 1.0 / self.n_agents)
        return np.divide(weights, totals, out=uniform, where=totals > 0)

    def row(self, agent: int) -> np.ndarray:
        return self.matrix()[agent]


def _check_row(row: np.ndarray, n_values: int) -> np.ndarray:
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (n_values,):
        raise ShapeMismatchError("dependent value", row.shape, (n_values,))
    return row


def dependent_soft_value(row: np.ndarray, values: Sequence[np.ndarray]) -> np.ndarray:
    """
    sum_j p_ij V^j(s') for each sampled s'.

    ``values`` holds one array per agent. Products and sum are taken
    elementwise so an indicator row returns V^i bit for bit.
    """
    stacked = np.stack([np.asarray(v, dtype=np.float64) for v in values])
    row = _check_row(row, stacked.shape[0])
    weights = row.reshape((-1,) + (1,) * (stacked.ndim - 1))
    return np.sum(weights * stacked, axis=0)


def dependent_td_residual(
    row: np.ndarray,
    rewards: np.ndarray,
    gamma: float,
    next_values: Sequence[np.ndarray],
    values: np.ndarray,
    dones: np.ndarray,
) -> np.ndarray:
    """delta^i = r + gamma sum_j p_ij V^j(s') - V^i(s), bootstrap dropped at terminals."""
    return td_residuals(rewards, values, dependent_soft_value(row, next_values), dones, gamma)
