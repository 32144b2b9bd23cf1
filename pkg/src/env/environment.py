"""
Bus-switching grid environment.

One step applies at most one substation reconfiguration, advances the chronic
by one row, solves the DC flow, runs overload protection and checks for a
game over. Failure steps pay -1 and end the episode; every other step pays
the efficiency reward.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.env.action import Action, validate_configuration
from src.env.chronics import SUB_EPISODE_LENGTH, Chronic
from src.env.reward import FAILURE_REWARD, congestion_loss_mw, efficiency_reward
from src.exceptions import EnvironmentConstructionError, EnvironmentDoneError
from src.grid.dynamics import OverloadConfig, apply_overload_dynamics
from src.grid.game_over import FailureCause, check_game_over
from src.grid.model import GridSpec
from src.grid.power_flow import PowerFlowResult, solve_dc_power_flow
from src.grid.topology import ElectricalGraph, Injections, Topology, build_electrical_graph
from src.monitoring.metrics import track_env_step, track_game_over


class EnvConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    episode_length: int = Field(default=SUB_EPISODE_LENGTH, gt=0)
    reward_floor: float = Field(default=0.9, ge=0, lt=1, description="served/generation ratio mapped to reward 0")
    rho_soft: float = Field(default=0.95, gt=0, description="loading above which congestion losses accrue")
    loss_coefficient: float = Field(default=1.0, ge=0)
    overload: OverloadConfig = Field(default_factory=OverloadConfig)


@dataclass(frozen=True)
class Observation:
    gen_mw: np.ndarray
    load_mw: np.ndarray
    bus: np.ndarray
    line_status: np.ndarray
    rho: np.ndarray
    flow_mw: np.ndarray
    timestep: int

    @property
    def topo_vect(self) -> np.ndarray:
        """Bus per element followed by line status per line."""
        return np.concatenate([self.bus.astype(np.int64), self.line_status.astype(np.int64)])

    @property
    def max_rho(self) -> float:
        return float(self.rho.max()) if self.rho.size else 0.0


@dataclass(frozen=True)
class StepOutcome:
    observation: Observation
    reward: float
    done: bool
    cause: Optional[FailureCause]
    step: int

    @property
    def failed(self) -> bool:
        return self.cause is not None


class GridEnvironment:
    """Single-owner episode state over one grid and one chronic window."""

    def __init__(self, spec: GridSpec, config: Optional[EnvConfig] = None, phase: str = "train"):
        self.spec = spec
        self.config = config or EnvConfig()
        self.phase = phase
        self._chronic: Optional[Chronic] = None
        self._offset = 0
        self._length = self.config.episode_length
        self._t = 0
        self._done = True
        self._topo = Topology.reference(spec)
        self._result: Optional[PowerFlowResult] = None

    @property
    def timestep(self) -> int:
        return self._t

    @property
    def done(self) -> bool:
        return self._done

    @property
    def episode_length(self) -> int:
        return self._length

    @property
    def topology(self) -> Topology:
        return self._topo.copy()

    @property
    def last_result(self) -> Optional[PowerFlowResult]:
        return self._result

    def reset(self, chronic: Chronic, offset: int = 0, length: Optional[int] = None) -> Observation:
        """Reference topology, injections at ``offset``, initial flow solved."""
        length = self.config.episode_length if length is None else length
        if offset < 0 or offset + length > chronic.length:
            raise EnvironmentConstructionError(
                f"window [{offset}, {offset + length}] outside chronic {chronic.id} of length {chronic.length}"
            )
        self._chronic = chronic
        self._offset = offset
        self._length = length
        self._t = 0
        self._topo = Topology.reference(self.spec)

        graph, result = self._solve(chronic.injections_at(offset))
        cause = check_game_over(graph, result)
        if cause is not None:
            raise EnvironmentConstructionError(
                f"chronic {chronic.id} at offset {offset} starts in failure ({cause.value}); recalibrate the grid"
            )
        self._result = result
        self._done = False
        return self._observe(chronic.injections_at(offset))

    def step(self, action: Action) -> StepOutcome:
        if self._done or self._chronic is None:
            raise EnvironmentDoneError("step() called on a finished episode; call reset() first")

        if not action.is_do_nothing:
            validate_configuration(self.spec, action.substation, action.buses)
            self._topo = self._topo.with_substation_config(self.spec, action.substation, action.buses)

        self._t += 1
        injections = self._chronic.injections_at(self._offset + self._t)
        graph, result = self._solve(injections)

        protected = apply_overload_dynamics(result, self._topo, self.config.overload)
        status_changed = not np.array_equal(protected.line_status, self._topo.line_status)
        self._topo = protected
        if status_changed:
            graph, result = self._solve(injections)
        self._result = result
        track_env_step(self.phase)

        cause = check_game_over(graph, result)
        if cause is not None:
            self._done = True
            track_game_over(cause.value)
            reward = FAILURE_REWARD
        else:
            self._done = self._t >= self._length
            reward = self._reward(result)

        return StepOutcome(
            observation=self._observe(injections),
            reward=reward,
            done=self._done,
            cause=cause,
            step=self._t,
        )

    def _solve(self, injections: Injections) -> Tuple[ElectricalGraph, PowerFlowResult]:
        graph = build_electrical_graph(self.spec, self._topo, injections)
        return graph, solve_dc_power_flow(graph)

    def _reward(self, result: PowerFlowResult) -> float:
        served = result.served_mw
        loss = congestion_loss_mw(
            result.rho[self._topo.line_status],
            served,
            rho_soft=self.config.rho_soft,
            coefficient=self.config.loss_coefficient,
        )
        return efficiency_reward(served, served + loss, r_min=self.config.reward_floor)

    def _observe(self, injections: Injections) -> Observation:
        result = self._result
        return Observation(
            gen_mw=np.asarray(injections.generation_mw, dtype=np.float64).copy(),
            load_mw=np.asarray(injections.demand_mw, dtype=np.float64).copy(),
            bus=self._topo.bus.copy(),
            line_status=self._topo.line_status.copy(),
            rho=result.rho.copy(),
            flow_mw=result.flow_mw.copy(),
            timestep=self._t,
        )
