"""
Soft actor-critic for discrete actions.

The trunk is trained through the critic loss only; the actor reads a
detached copy of the trunk output. Targets come from a Polyak-averaged copy
of trunk and critic heads, bootstrapping with the soft state value of the
current policy. Terminal transitions drop the bootstrap term.
"""
import time
from typing import Dict, Optional, Tuple

import numpy as np

from src.agents.buffers import ReplayBuffer, TransitionBatch
from src.agents.hyperparams import Algorithm, HyperParams
from src.agents.networks import build_sacd_params, sacd_actor_logits, sacd_q_values, trunk_forward
from src.exceptions import EmptyBatchError, ShapeMismatchError
from src.monitoring.metrics import track_agent_update
from src.nn.graph import GraphBatch
from src.nn.optim import Adam
from src.nn.params import ParameterSet, Role, soft_update_target
from src.nn.tensor import Tensor, parameter


def sacd_soft_state_value(probs: np.ndarray, q_values: np.ndarray, alpha: float) -> np.ndarray:
    """V = pi . (Q - alpha log pi) per row; actions with pi = 0 contribute 0."""
    probs = np.asarray(probs, dtype=np.float64)
    q_values = np.asarray(q_values, dtype=np.float64)
    if probs.shape != q_values.shape:
        raise ShapeMismatchError("soft state value", probs.shape, q_values.shape)
    positive = probs > 0
    log_probs = np.log(np.where(positive, probs, 1.0))
    terms = np.where(positive, probs * (q_values - alpha * log_probs), 0.0)
    return terms.sum(axis=-1)


def sacd_targets(rewards: np.ndarray, dones: np.ndarray, next_values: np.ndarray, gamma: float) -> np.ndarray:
    """y = r + gamma * V(s') on non-terminal transitions, y = r on terminal ones."""
    rewards = np.asarray(rewards, dtype=np.float64)
    next_values = np.asarray(next_values, dtype=np.float64)
    if rewards.shape != next_values.shape:
        raise ShapeMismatchError("td target", rewards.shape, next_values.shape)
    return np.where(np.asarray(dones, dtype=bool), rewards, rewards + gamma * next_values)


def sacd_critic_loss(q_values: Tensor, actions: np.ndarray, targets: np.ndarray) -> Tensor:
    """Mean of 1/2 (Q(s, a) - y)^2 for one critic head."""
    if q_values.shape[0] == 0:
        raise EmptyBatchError("critic loss over an empty batch")
    error = q_values.pick(actions) - np.asarray(targets, dtype=np.float64)
    return (error * error).mean() * 0.5


def sacd_actor_loss(logits: Tensor, q_values: np.ndarray, alpha: float) -> Tensor:
    """Mean of pi . (alpha log pi - Q); the critic enters as a constant."""
    if logits.shape[0] == 0:
        raise EmptyBatchError("actor loss over an empty batch")
    q_values = np.asarray(q_values, dtype=np.float64)
    if logits.shape != q_values.shape:
        raise ShapeMismatchError("actor loss", logits.shape, q_values.shape)
    probs = logits.softmax(axis=-1)
    log_probs = logits.log_softmax(axis=-1)
    return (probs * (log_probs * alpha - q_values)).sum(axis=-1).mean()


def sacd_temperature_loss(log_alpha: Tensor, probs: np.ndarray, target_entropy: float) -> Tensor:
    """
    Mean of pi . (-alpha (log pi + H_target)) with alpha = exp(log_alpha).

    Equal to alpha * (entropy - H_target), so the gradient raises alpha when the
    policy entropy falls below the target.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape[0] == 0:
        raise EmptyBatchError("temperature loss over an empty batch")
    positive = probs > 0
    log_probs = np.log(np.where(positive, probs, 1.0))
    gap = -np.where(positive, probs * (log_probs + target_entropy), 0.0).sum(axis=-1)
    return (log_alpha.exp() * gap).mean()


def target_entropy(n_actions: int, scale: float) -> float:
    return scale * float(np.log(n_actions)) if n_actions > 1 else 0.0


class SACDAgent:
    """One discrete SAC learner: nets, target copies, optimizers and its own replay buffer."""

    algorithm = Algorithm.SACD

    def __init__(
        self,
        name: str,
        in_dim: int,
        n_actions: int,
        hp: HyperParams,
        init_rng: np.random.Generator,
        replay_rng: np.random.Generator,
    ):
        self.name = name
        self.n_actions = n_actions
        self.hp = hp
        self.trunk, self.actor, self.critic = build_sacd_params(in_dim, n_actions, hp, init_rng)
        self.target_trunk = self.trunk.copy(Role.TARGET_CRITIC)
        self.target_critic = self.critic.copy(Role.TARGET_CRITIC)
        self.temperature = ParameterSet(Role.TEMPERATURE, {"log_alpha": parameter(np.array([np.log(hp.initial_alpha)]))})

        self.trunk_opt = Adam(self.trunk, hp.learning_rate)
        self.critic_opt = Adam(self.critic, hp.learning_rate)
        self.actor_opt = Adam(self.actor, hp.learning_rate)
        self.alpha_opt = Adam(self.temperature, hp.learning_rate)

        self.target_entropy = target_entropy(n_actions, hp.target_entropy_scale)
        self.buffer = ReplayBuffer(hp.replay_capacity, replay_rng)
        self.updates = 0

    @property
    def alpha(self) -> float:
        return float(np.exp(self.temperature["log_alpha"].data[0]))

    def parameter_sets(self) -> Dict[str, ParameterSet]:
        return {
            "trunk": self.trunk,
            "actor": self.actor,
            "critic": self.critic,
            "target_trunk": self.target_trunk,
            "target_critic": self.target_critic,
            "temperature": self.temperature,
        }

    def policy(self, graph: GraphBatch) -> np.ndarray:
        """Action probabilities per graph, shape (n_graphs, n_actions)."""
        h = trunk_forward(self.trunk, graph).detach()
        return sacd_actor_logits(self.actor, h, graph).softmax(axis=-1).data

    def act(self, graph: GraphBatch, rng: np.random.Generator, greedy: bool = False) -> Tuple[int, float, float]:
        """Return (action index, log-probability, 0.0); sampling draws exactly one uniform."""
        probs = self.policy(graph)[0]
        if greedy:
            action = int(np.argmax(probs))
        else:
            action = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"))
            action = min(action, self.n_actions - 1)
        return action, float(np.log(max(probs[action], 1e-300))), 0.0

    def soft_value(self, graph: GraphBatch) -> np.ndarray:
        """V(s) under the target critic and the current policy, shape (n_graphs,)."""
        target_q = sacd_q_values(self.target_critic, trunk_forward(self.target_trunk, graph), graph)
        q = np.minimum.reduce([t.data for t in target_q])
        return sacd_soft_state_value(self.policy(graph), q, self.alpha)

    def ready(self, interactions: int) -> bool:
        return interactions >= self.hp.update_start_interactions and len(self.buffer) > 0

    def update(self, batch: TransitionBatch, next_values: Optional[np.ndarray] = None) -> Dict[str, float]:
        """One gradient step each on critic(s), actor and temperature, then Polyak targets."""
        started = time.perf_counter()
        if next_values is None:
            next_values = self.soft_value(batch.next_states)
        targets = sacd_targets(batch.rewards, batch.dones, next_values, self.hp.gamma)

        self.trunk_opt.zero_grad()
        self.critic_opt.zero_grad()
        q_heads = sacd_q_values(self.critic, trunk_forward(self.trunk, batch.states), batch.states)
        critic_loss = sacd_critic_loss(q_heads[0], batch.actions, targets)
        for q in q_heads[1:]:
            critic_loss = critic_loss + sacd_critic_loss(q, batch.actions, targets)
        critic_loss.backward()
        self.trunk_opt.step()
        self.critic_opt.step()

        h = trunk_forward(self.trunk, batch.states).detach()
        q_now = np.minimum.reduce([q.data for q in sacd_q_values(self.critic, h, batch.states)])
        self.actor_opt.zero_grad()
        logits = sacd_actor_logits(self.actor, h, batch.states)
        actor_loss = sacd_actor_loss(logits, q_now, self.alpha)
        actor_loss.backward()
        self.actor_opt.step()

        probs = logits.softmax(axis=-1).data
        self.alpha_opt.zero_grad()
        alpha_loss = sacd_temperature_loss(self.temperature["log_alpha"], probs, self.target_entropy)
        alpha_loss.backward()
        self.alpha_opt.step()

        soft_update_target(self.trunk, self.target_trunk, self.hp.tau)
        soft_update_target(self.critic, self.target_critic, self.hp.tau)
        self.updates += 1
        track_agent_update(self.algorithm.value, time.perf_counter() - started)

        positive = probs > 0
        entropy = -np.where(positive, probs * np.log(np.where(positive, probs, 1.0)), 0.0).sum(axis=-1).mean()
        return {
            "status": "updated",
            "critic_loss": critic_loss.item(),
            "actor_loss": actor_loss.item(),
            "alpha_loss": alpha_loss.item(),
            "alpha": self.alpha,
            "entropy": float(entropy),
        }
