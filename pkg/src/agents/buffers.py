from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.exceptions import EmptyBatchError, UnsealedRolloutError
from src.nn.graph import GraphBatch, batch_graphs


@dataclass(frozen=True)
class Transition:
    state: GraphBatch
    action: int
    reward: float
    next_state: GraphBatch
    done: bool
    agent_id: int
    next_agent_id: Optional[int] = None
    log_prob: float = 0.0
    value: float = 0.0


@dataclass(frozen=True)
class TransitionBatch:
    states: GraphBatch
    actions: np.ndarray
    rewards: np.ndarray
    next_states: GraphBatch
    dones: np.ndarray
    agent_ids: np.ndarray
    next_agent_ids: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    state_graphs: Tuple[GraphBatch, ...] = ()

    @property
    def size(self) -> int:
        return len(self.actions)

    @classmethod
    def collate(cls, transitions: Sequence[Transition]) -> "TransitionBatch":
        if not transitions:
            raise EmptyBatchError("cannot collate an empty list of transitions")
        return cls(
            states=batch_graphs([t.state for t in transitions]),
            actions=np.array([t.action for t in transitions], dtype=np.int64),
            rewards=np.array([t.reward for t in transitions], dtype=np.float64),
            next_states=batch_graphs([t.next_state for t in transitions]),
            dones=np.array([t.done for t in transitions], dtype=bool),
            agent_ids=np.array([t.agent_id for t in transitions], dtype=np.int64),
            next_agent_ids=np.array([-1 if t.next_agent_id is None else t.next_agent_id for t in transitions], dtype=np.int64),
            log_probs=np.array([t.log_prob for t in transitions], dtype=np.float64),
            values=np.array([t.value for t in transitions], dtype=np.float64),
            state_graphs=tuple(t.state for t in transitions),
        )


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform sampling."""

    def __init__(self, capacity: int, rng: np.random.Generator):
        if capacity <= 0:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.rng = rng
        self._items: List[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._items)

    def add(self, transition: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._next] = transition
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int) -> TransitionBatch:
        """Uniform draw with replacement."""
        if not self._items:
            raise EmptyBatchError("cannot sample from an empty replay buffer")
        index = self.rng.integers(0, len(self._items), size=batch_size)
        return TransitionBatch.collate([self._items[i] for i in index])


class RolloutBuffer:
    """Ordered on-policy transitions up to the horizon; sealed before advantages are read."""

    def __init__(self, horizon: int):
        self.horizon = horizon
        self._items: List[Transition] = []
        self.sealed = False
        self.advantages: Optional[np.ndarray] = None
        self.value_targets: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self._items)

    @property
    def full(self) -> bool:
        return len(self._items) >= self.horizon

    def add(self, transition: Transition) -> None:
        if self.sealed:
            raise UnsealedRolloutError("rollout is sealed; clear() it before collecting again")
        if self.full:
            raise ValueError(f"rollout already holds {self.horizon} transitions")
        self._items.append(transition)

    def seal(self) -> TransitionBatch:
        if not self._items:
            raise EmptyBatchError("cannot seal an empty rollout")
        self.sealed = True
        return TransitionBatch.collate(self._items)

    def set_advantages(self, advantages: np.ndarray, value_targets: np.ndarray) -> None:
        if not self.sealed:
            raise UnsealedRolloutError("advantages require a sealed rollout")
        self.advantages = advantages
        self.value_targets = value_targets

    def batch(self) -> TransitionBatch:
        if not self.sealed:
            raise UnsealedRolloutError("rollout is still open")
        return TransitionBatch.collate(self._items)

    def clear(self) -> None:
        self._items = []
        self.sealed = False
        self.advantages = None
        self.value_targets = None
