"""
Proximal policy optimization with generalized advantage estimation.
"""
import time
from typing import Dict, Optional, Tuple, Union

import numpy as np

from src.agents.buffers import RolloutBuffer, TransitionBatch
from src.agents.hyperparams import Algorithm, HyperParams
from src.agents.networks import build_ppo_params, ppo_actor_logits, ppo_values
from src.exceptions import EmptyBatchError, ShapeMismatchError
from src.monitoring.metrics import track_agent_update
from src.nn.graph import GraphBatch, batch_graphs
from src.nn.optim import Adam
from src.nn.params import ParameterSet
from src.nn.tensor import Tensor, minimum

Scalar = Union[Tensor, float]


def td_residuals(
    rewards: np.ndarray, values: np.ndarray, next_values: np.ndarray, dones: np.ndarray, gamma: float
) -> np.ndarray:
    """delta_t = r_t + gamma V(s_t') - V(s_t), with the bootstrap dropped at terminals."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    next_values = np.asarray(next_values, dtype=np.float64)
    if not (rewards.shape == values.shape == next_values.shape):
        raise ShapeMismatchError("td residual", rewards.shape, next_values.shape)
    bootstrap = np.where(np.asarray(dones, dtype=bool), 0.0, gamma * next_values)
    return rewards + bootstrap - values


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    next_values: Optional[np.ndarray],
    dones: np.ndarray,
    gamma: float,
    lam: float,
    deltas: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Advantages A_t = delta_t + gamma lam A_{t+1}, reset after terminal steps.

    ``next_values`` is V(s') for every step, so the caller decides what is
    bootstrapped; ``deltas`` may be passed precomputed. Returns (advantages,
    value targets = advantages + values), both unnormalized.
    """
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    if deltas is None:
        if next_values is None:
            raise ValueError("compute_gae needs next_values or precomputed deltas")
        deltas = td_residuals(rewards, values, next_values, dones, gamma)
    advantages = np.zeros_like(values)
    running = 0.0
    for t in range(len(deltas) - 1, -1, -1):
        if dones[t]:
            running = 0.0
        running = deltas[t] + gamma * lam * running
        advantages[t] = running
    return advantages, advantages + values


def normalize(advantages: np.ndarray) -> np.ndarray:
    if advantages.size < 2:
        return advantages - advantages.mean() if advantages.size else advantages
    return (advantages - advantages.mean()) / (advantages.std() + 1e-8)


def ppo_clip_loss(log_probs: Tensor, old_log_probs: Optional[np.ndarray], advantages: np.ndarray, eps: float) -> Tensor:
    """
    The clipped surrogate objective L^CLIP = mean(min(r A, clip(r, 1-eps, 1+eps) A)).

    It is returned as the objective; ``ppo_combined_loss`` negates it.
    """
    if old_log_probs is None:
        raise ValueError("old log-probabilities recorded at collection time are required")
    if log_probs.shape[0] == 0:
        raise EmptyBatchError("clip objective over an empty batch")
    old_log_probs = np.asarray(old_log_probs, dtype=np.float64)
    if log_probs.shape != old_log_probs.shape:
        raise ShapeMismatchError("clip objective", log_probs.shape, old_log_probs.shape)
    advantages = np.asarray(advantages, dtype=np.float64)
    ratio = (log_probs - old_log_probs).exp()
    unclipped = ratio * advantages
    clipped = ratio.clip(1.0 - eps, 1.0 + eps) * advantages
    return minimum(unclipped, clipped).mean()


def ppo_value_loss(values: Tensor, value_targets: np.ndarray) -> Tensor:
    """L^VF = mean((V(s) - V_targ)^2)."""
    error = values - np.asarray(value_targets, dtype=np.float64)
    return (error * error).mean()


def policy_entropy(logits: Tensor) -> Tensor:
    """Mean entropy of the categorical policies in a batch of logits."""
    return -(logits.softmax(axis=-1) * logits.log_softmax(axis=-1)).sum(axis=-1).mean()


def ppo_combined_loss(clip: Scalar, value_loss: Scalar, entropy: Scalar, c1: float, c2: float) -> Scalar:
    """L = -L^CLIP + c1 L^VF - c2 S."""
    return -clip + value_loss * c1 - entropy * c2


class PPOAgent:
    """One PPO learner with separate actor and critic stacks and its own rollout."""

    algorithm = Algorithm.PPO

    def __init__(
        self,
        name: str,
        in_dim: int,
        n_actions: int,
        hp: HyperParams,
        init_rng: np.random.Generator,
        minibatch_rng: np.random.Generator,
    ):
        self.name = name
        self.n_actions = n_actions
        self.hp = hp
        self.actor, self.critic = build_ppo_params(in_dim, n_actions, hp, init_rng)
        self.actor_opt = Adam(self.actor, hp.learning_rate)
        self.critic_opt = Adam(self.critic, hp.learning_rate)
        self.rollout = RolloutBuffer(hp.horizon)
        self.minibatch_rng = minibatch_rng
        self.updates = 0

    def parameter_sets(self) -> Dict[str, ParameterSet]:
        return {"actor": self.actor, "critic": self.critic}

    def policy(self, graph: GraphBatch) -> np.ndarray:
        return ppo_actor_logits(self.actor, graph).softmax(axis=-1).data

    def value(self, graph: GraphBatch) -> np.ndarray:
        """V(s) per graph, shape (n_graphs,)."""
        return ppo_values(self.critic, graph).data

    def act(self, graph: GraphBatch, rng: np.random.Generator, greedy: bool = False) -> Tuple[int, float, float]:
        """Return (action index, log-probability, V(s)); sampling draws exactly one uniform."""
        log_probs = ppo_actor_logits(self.actor, graph).log_softmax(axis=-1).data[0]
        probs = np.exp(log_probs)
        if greedy:
            action = int(np.argmax(probs))
        else:
            action = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"))
            action = min(action, self.n_actions - 1)
        return action, float(log_probs[action]), float(self.value(graph)[0])

    def ready(self) -> bool:
        return self.rollout.full

    def update(self, batch: TransitionBatch, advantages: np.ndarray, value_targets: np.ndarray) -> Dict[str, float]:
        """``ppo_epochs`` passes of shuffled minibatch steps on the combined loss."""
        started = time.perf_counter()
        n = batch.size
        split_at = np.arange(self.hp.minibatch_size, n, self.hp.minibatch_size)
        states = batch.state_graphs
        totals = {"clip_objective": 0.0, "value_loss": 0.0, "entropy": 0.0, "total_loss": 0.0}
        steps = 0
        for _ in range(self.hp.ppo_epochs):
            for index in np.split(self.minibatch_rng.permutation(n), split_at):
                graphs = batch_graphs([states[i] for i in index])
                adv = advantages[index]
                if self.hp.normalize_advantages:
                    adv = normalize(adv)

                self.actor_opt.zero_grad()
                self.critic_opt.zero_grad()
                logits = ppo_actor_logits(self.actor, graphs)
                log_probs = logits.log_softmax(axis=-1).pick(batch.actions[index])
                clip = ppo_clip_loss(log_probs, batch.log_probs[index], adv, self.hp.clip_eps)
                value_loss = ppo_value_loss(ppo_values(self.critic, graphs), value_targets[index])
                entropy = policy_entropy(logits)
                loss = ppo_combined_loss(clip, value_loss, entropy, self.hp.vf_coef, self.hp.ent_coef)
                loss.backward()
                self.actor_opt.step()
                self.critic_opt.step()

                totals["clip_objective"] += clip.item()
                totals["value_loss"] += value_loss.item()
                totals["entropy"] += entropy.item()
                totals["total_loss"] += loss.item()
                steps += 1

        self.updates += 1
        track_agent_update(self.algorithm.value, time.perf_counter() - started)
        return {"status": "updated", **{key: value / steps for key, value in totals.items()}}

