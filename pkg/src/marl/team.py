"""
Low-level agent teams for the six training strategies.

Independent strategies (isacd, ippo) bootstrap every agent from its own
value function. Dependent strategies (dsacd, dppo) mix the next-state values
of all agents through the estimated mid-level transition matrix. The
single-agent baselines (sacd, ppo) run one learner over the union action
space under the same gate.
"""
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src import seeding
from src.agents.buffers import Transition, TransitionBatch
from src.agents.hyperparams import HyperParams
from src.agents.ppo import PPOAgent
from src.agents.sacd import SACDAgent
from src.agents.update import NextValueFn, ResidualFn, update_cycle
from src.exceptions import CheckpointError, StructureMismatchError
from src.marl.actions import SubstationAgentSpec
from src.marl.dependent import MidPolicyEstimate, dependent_soft_value, dependent_td_residual
from src.marl.hierarchy import Strategy
from src.monitoring.logger import get_logger
from src.monitoring.metrics import track_replay_size
from src.nn.checkpoint import load_checkpoint, save_checkpoint
from src.nn.graph import GraphBatch

logger = get_logger(__name__)

Agent = Union[SACDAgent, PPOAgent]


class AgentTeam:
    """One learner per low-level agent plus the shared mid-level estimate."""

    def __init__(
        self,
        strategy: Strategy,
        agent_specs: Sequence[SubstationAgentSpec],
        in_dim: int,
        hp: HyperParams,
        seed: int,
        laplace_prior: float = 1.0,
        forced_identity: bool = False,
    ):
        self.strategy = Strategy(strategy)
        self.agent_specs = list(agent_specs)
        self.hp = hp
        self.seed = seed
        self.training = True
        self.agents: List[Agent] = []
        for index, agent_spec in enumerate(self.agent_specs):
            name = f"agent_{index}" if agent_spec.substation < 0 else f"sub_{agent_spec.substation}"
            init_rng = seeding.stream(seed, seeding.INIT, index)
            if self.strategy.is_sacd:
                agent = SACDAgent(name, in_dim, agent_spec.n_actions, hp, init_rng, seeding.stream(seed, seeding.REPLAY, index))
            else:
                agent = PPOAgent(name, in_dim, agent_spec.n_actions, hp, init_rng, seeding.stream(seed, seeding.MINIBATCH, index))
            self.agents.append(agent)
        self.estimate = MidPolicyEstimate(len(self.agents), prior=laplace_prior, forced_identity=forced_identity)
        self.pending_metrics: List[Tuple[int, Dict[str, Any]]] = []

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def set_training(self, training: bool) -> None:
        """Outside training the estimate is frozen and nothing is recorded."""
        self.training = training
        self.estimate.frozen = not training

    def select(self, agent_id: int, graph: GraphBatch, rng: np.random.Generator, greedy: bool) -> Tuple[int, float, float]:
        return self.agents[agent_id].act(graph, rng, greedy)

    def state_values(self, agent_id: int, graph: GraphBatch) -> np.ndarray:
        """V^j(s) under agent j's own value function, one entry per graph."""
        agent = self.agents[agent_id]
        return agent.soft_value(graph) if isinstance(agent, SACDAgent) else agent.value(graph)

    def next_values_fn(self, agent_id: int) -> Optional[NextValueFn]:
        if not self.strategy.is_dependent:
            return None

        def mixed(batch: TransitionBatch) -> np.ndarray:
            values = [self.state_values(j, batch.next_states) for j in range(self.n_agents)]
            return dependent_soft_value(self.estimate.row(agent_id), values)

        return mixed

    def residual_fn(self, agent_id: int) -> Optional[ResidualFn]:
        """Dependent PPO TD residuals for a sealed rollout of ``agent_id``."""
        if not self.strategy.is_dependent:
            return None

        def residuals(batch: TransitionBatch) -> np.ndarray:
            next_values = [self.state_values(j, batch.next_states) for j in range(self.n_agents)]
            return dependent_td_residual(
                self.estimate.row(agent_id), batch.rewards, self.hp.gamma, next_values, batch.values, batch.dones
            )

        return residuals

    def record(self, transition: Transition) -> None:
        if not self.training:
            return
        agent_id = transition.agent_id
        if transition.next_agent_id is not None:
            self.estimate.update(agent_id, transition.next_agent_id)
        agent = self.agents[agent_id]
        if isinstance(agent, SACDAgent):
            agent.buffer.add(transition)
            track_replay_size(agent.name, len(agent.buffer))
            return
        agent.rollout.add(transition)
        if agent.ready():
            self._collect(agent_id, update_cycle(agent, residual_fn=self.residual_fn(agent_id)))

    def after_interaction(self, agent_id: int, interactions: int) -> None:
        """One SACD update cycle for the agent that just acted; PPO updates on a full rollout instead."""
        if not self.training:
            return
        agent = self.agents[agent_id]
        if isinstance(agent, SACDAgent):
            self._collect(agent_id, update_cycle(agent, interactions, self.next_values_fn(agent_id)))

    def _collect(self, agent_id: int, metrics: Dict[str, Any]) -> None:
        if metrics.get("status") == "updated":
            self.pending_metrics.append((agent_id, metrics))

    def drain_metrics(self) -> List[Tuple[int, Dict[str, Any]]]:
        drained, self.pending_metrics = self.pending_metrics, []
        return drained

    def save(self, directory: Union[str, Path], metadata: Optional[Dict[str, Any]] = None) -> List[Path]:
        directory = Path(directory)
        paths = []
        for agent in self.agents:
            meta = {"agent": agent.name, "algorithm": agent.algorithm.value, "strategy": self.strategy.value}
            meta.update(metadata or {})
            paths.append(save_checkpoint(directory / agent.name, agent.parameter_sets(), meta))
        np.savetxt(directory / "mid_policy_counts.csv", self.estimate.counts, delimiter=",", fmt="%.17g")
        logger.info("team_saved", directory=str(directory), agents=len(paths))
        return paths

    def load(self, directory: Union[str, Path]) -> None:
        directory = Path(directory)
        for agent in self.agents:
            param_sets, _ = load_checkpoint(directory / agent.name)
            own = agent.parameter_sets()
            if set(param_sets) != set(own):
                raise CheckpointError(
                    f"checkpoint {directory / agent.name} holds {sorted(param_sets)}, expected {sorted(own)}"
                )
            try:
                for name, params in param_sets.items():
                    own[name].load_state(params.state())
            except StructureMismatchError as e:
                raise CheckpointError(f"checkpoint {directory / agent.name} does not fit this team: {e}") from e
        counts_path = directory / "mid_policy_counts.csv"
        if counts_path.exists():
            counts = np.loadtxt(counts_path, delimiter=",", ndmin=2)
            if counts.shape != self.estimate.counts.shape:
                raise CheckpointError(f"mid-policy counts {counts.shape} do not match {self.n_agents} agents")
            self.estimate.counts = counts
        logger.info("team_loaded", directory=str(directory), agents=self.n_agents)
