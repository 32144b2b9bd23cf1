"""
Top-level safety gate and the mid-level ordering policies.
"""
from abc import ABC, abstractmethod
from typing import List, Sequence

import numpy as np

from src.env.environment import Observation
from src.grid.model import GridSpec
from src.marl.actions import SubstationAgentSpec


def is_unsafe(obs: Observation, rho_thresh: float) -> bool:
    """True iff some in-service line is loaded strictly above the threshold."""
    rho = obs.rho[obs.line_status]
    return bool(rho.size) and float(rho.max()) > rho_thresh


def incident_max_rho(spec: GridSpec, obs: Observation, substation: int) -> float:
    lines = [line for line in spec.incident_lines(substation) if obs.line_status[line]]
    return float(obs.rho[lines].max()) if lines else 0.0


def capa_order(spec: GridSpec, obs: Observation, agents: Sequence[SubstationAgentSpec]) -> List[int]:
    """Agent ids by descending incident loading, ties by ascending substation id."""
    return [
        a.agent_id
        for a in sorted(agents, key=lambda a: (-incident_max_rho(spec, obs, a.substation), a.substation))
    ]


def fixed_order(agents: Sequence[SubstationAgentSpec]) -> List[int]:
    """Agent ids by descending substation size, ties by ascending substation id."""
    return [a.agent_id for a in sorted(agents, key=lambda a: (-a.size, a.substation))]


def random_order(agents: Sequence[SubstationAgentSpec], rng: np.random.Generator) -> List[int]:
    return [agents[i].agent_id for i in rng.permutation(len(agents))]


class MidLevelPolicy(ABC):
    """Orders the low-level agents once the top level has flagged the grid unsafe."""

    name: str = ""

    def __init__(self, spec: GridSpec, agents: Sequence[SubstationAgentSpec]):
        if not agents:
            raise ValueError("a mid-level policy needs at least one agent")
        self.spec = spec
        self.agents = list(agents)

    @abstractmethod
    def order(self, obs: Observation) -> List[int]:
        """Agent ids in activation order."""


class CapaPolicy(MidLevelPolicy):
    name = "capa"

    def order(self, obs: Observation) -> List[int]:
        return capa_order(self.spec, obs, self.agents)


class FixedPolicy(MidLevelPolicy):
    name = "fixed"

    def __init__(self, spec: GridSpec, agents: Sequence[SubstationAgentSpec]):
        super().__init__(spec, agents)
        self._order = fixed_order(self.agents)

    def order(self, obs: Observation) -> List[int]:
        return list(self._order)


class RandomPolicy(MidLevelPolicy):
    name = "random"

    def __init__(self, spec: GridSpec, agents: Sequence[SubstationAgentSpec], rng: np.random.Generator):
        super().__init__(spec, agents)
        self.rng = rng

    def order(self, obs: Observation) -> List[int]:
        return random_order(self.agents, self.rng)


class MidPolicyFactory:
    """Factory for creating mid-level ordering policies."""

    @staticmethod
    def create_policy(
        policy_type: str,
        spec: GridSpec,
        agents: Sequence[SubstationAgentSpec],
        rng: np.random.Generator = None,
    ) -> MidLevelPolicy:
        policies = {
            "capa": CapaPolicy,
            "fixed": FixedPolicy,
            "random": RandomPolicy,
        }
        policy_class = policies.get(policy_type.lower())
        if not policy_class:
            raise ValueError(f"Unknown mid-level policy: {policy_type}")
        if policy_class is RandomPolicy:
            if rng is None:
                raise ValueError("the random mid-level policy needs a seeded generator")
            return RandomPolicy(spec, agents, rng)
        return policy_class(spec, agents)
