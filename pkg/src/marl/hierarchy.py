"""
Three-level control loop.

The top level steps do-nothing while the grid is safe. Once some line
exceeds the threshold, the mid-level policy fixes an activation order and
each low-level agent in turn proposes a configuration for its substation.
Proposals equal to the substation's current configuration are skipped
without using environment time; every other proposal is one environment
step and one counted interaction.

A transition waits until the next acting agent is known, which may only
happen at a later activation. If the episode ends first it is stored as
terminal.
"""
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, List, Literal, Optional, Protocol, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.agents.buffers import Transition
from src.env.action import DO_NOTHING, Action
from src.env.chronics import Chronic
from src.env.environment import GridEnvironment, StepOutcome
from src.grid.game_over import FailureCause
from src.marl.actions import SubstationAgentSpec
from src.marl.gating import MidLevelPolicy, is_unsafe
from src.nn.graph import GraphBatch, encode_observation


class Strategy(str, Enum):
    ISACD = "isacd"
    IPPO = "ippo"
    DSACD = "dsacd"
    DPPO = "dppo"
    SACD = "sacd"
    PPO = "ppo"

    @property
    def is_sacd(self) -> bool:
        return self in (Strategy.ISACD, Strategy.DSACD, Strategy.SACD)

    @property
    def is_dependent(self) -> bool:
        return self in (Strategy.DSACD, Strategy.DPPO)

    @property
    def is_single_agent(self) -> bool:
        return self in (Strategy.SACD, Strategy.PPO)

    @property
    def default_preset(self) -> str:
        if self.is_single_agent:
            return self.value
        return "masacd" if self.is_sacd else "mappo"


class HierarchyConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rho_thresh: float = Field(default=0.95, gt=0, le=1)
    mid_policy: Literal["capa", "fixed", "random"] = "capa"
    strategy: Strategy = Strategy.DSACD
    early_exit: bool = Field(default=True, description="end an activation once the grid is safe again")
    recompute_order: bool = Field(default=False, description="re-rank the remaining agents after every action")
    laplace_prior: float = Field(default=1.0, ge=0)
    min_substation_size: int = Field(default=4, ge=2)


class LowLevelTeam(Protocol):
    def select(self, agent_id: int, graph: GraphBatch, rng: np.random.Generator, greedy: bool) -> Tuple[int, float, float]:
        """Return (action index, log-probability, state value)."""

    def record(self, transition: Transition) -> None:
        """Store a finalized transition of ``transition.agent_id``."""


@dataclass(frozen=True)
class TraceEvent:
    kind: str
    timestep: int
    agent: Optional[int] = None
    detail: Tuple = ()


@dataclass
class EpisodeResult:
    chronic_id: str
    offset: int
    length: int
    survived: int
    rewards: List[float] = field(default_factory=list)
    cause: Optional[FailureCause] = None
    interactions: int = 0
    stopped: bool = False

    @property
    def completed(self) -> bool:
        return self.cause is None and self.survived == self.length


@dataclass
class _Pending:
    transition: Transition


class HierarchicalController:
    def __init__(
        self,
        env: GridEnvironment,
        agents: Sequence[SubstationAgentSpec],
        mid_policy: MidLevelPolicy,
        team: LowLevelTeam,
        config: HierarchyConfig,
        rng: np.random.Generator,
    ):
        self.env = env
        self.spec = env.spec
        self.agents = list(agents)
        self.mid_policy = mid_policy
        self.team = team
        self.config = config
        self.rng = rng
        self.trace: Optional[List[TraceEvent]] = None

    def _log(self, kind: str, agent: Optional[int] = None, detail: Tuple = ()) -> None:
        if self.trace is not None:
            self.trace.append(TraceEvent(kind, self.env.timestep, agent, detail))

    def _is_identity(self, action: Action) -> bool:
        if action.is_do_nothing:
            return True
        return self.env.topology.substation_config(self.spec, action.substation) == action.buses

    def _step(self, action: Action, result: EpisodeResult) -> StepOutcome:
        outcome = self.env.step(action)
        result.rewards.append(outcome.reward)
        result.survived = outcome.step - 1 if outcome.failed else outcome.step
        result.cause = outcome.cause
        return outcome

    def run_episode(
        self,
        chronic: Chronic,
        offset: int = 0,
        length: Optional[int] = None,
        training: bool = True,
        greedy: bool = False,
        after_interaction: Optional[Callable[[int, int], bool]] = None,
    ) -> EpisodeResult:
        """
        Play one sub-episode.

        ``after_interaction(agent_id, interactions)`` runs after every counted
        interaction; returning True stops the episode early (budget reached).
        Transitions are only recorded when ``training`` is set.
        """
        obs = self.env.reset(chronic, offset, length)
        result = EpisodeResult(chronic_id=chronic.id, offset=offset, length=self.env.episode_length, survived=0)
        pending: Optional[_Pending] = None

        def finalize(next_agent: Optional[int]) -> None:
            nonlocal pending
            if pending is None:
                return
            if training:
                transition = pending.transition
                if next_agent is None:
                    transition = replace(transition, done=True, next_agent_id=None)
                else:
                    transition = replace(transition, next_agent_id=next_agent)
                self.team.record(transition)
            pending = None

        while not self.env.done:
            unsafe = is_unsafe(obs, self.config.rho_thresh)
            self._log("gate", detail=(unsafe,))
            if not unsafe:
                obs = self._step(DO_NOTHING, result).observation
                continue

            order = self.mid_policy.order(obs)
            self._log("order", detail=tuple(order))
            stepped = False
            position = 0
            while position < len(order) and not self.env.done:
                if position > 0 and self.config.early_exit and not is_unsafe(obs, self.config.rho_thresh):
                    break
                agent_id = order[position]
                graph = encode_observation(self.spec, obs)
                index, log_prob, value = self.team.select(agent_id, graph, self.rng, greedy)
                action = self.agents[agent_id].actions[index]
                if self._is_identity(action):
                    self._log("skip", agent_id, (index,))
                    position += 1
                    continue

                outcome = self._step(action, result)
                stepped = True
                result.interactions += 1
                self._log("act", agent_id, (index, str(action)))
                finalize(agent_id)
                pending = _Pending(
                    Transition(
                        state=graph,
                        action=index,
                        reward=outcome.reward,
                        next_state=encode_observation(self.spec, outcome.observation),
                        done=outcome.done,
                        agent_id=agent_id,
                        log_prob=log_prob,
                        value=value,
                    )
                )
                obs = outcome.observation
                if outcome.done:
                    finalize(None)
                if after_interaction is not None and after_interaction(agent_id, result.interactions):
                    result.stopped = True
                    finalize(None)
                    return result

                position += 1
                if self.config.recompute_order and position < len(order):
                    remaining = set(order[position:])
                    order = order[:position] + [a for a in self.mid_policy.order(obs) if a in remaining]

            if not stepped and not self.env.done:
                # Every agent kept its configuration: time still has to advance.
                self._log("idle")
                obs = self._step(DO_NOTHING, result).observation

        finalize(None)
        return result
