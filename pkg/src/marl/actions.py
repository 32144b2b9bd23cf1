"""
Substation action spaces.

An agent's actions are every bus assignment of its substation with the first
element pinned to bus 1 (the mirrored assignment is the same topology),
minus those leaving a generator or load on a bus without lines.
"""
from dataclasses import dataclass
from itertools import product
from typing import List, Sequence, Tuple

from src.env.action import DO_NOTHING, Action, is_isolation_safe
from src.exceptions import InvalidActionError
from src.grid.model import GridSpec
from src.grid.topology import BUS_1, BUS_2

MIN_AGENT_SUBSTATION_SIZE = 4


@dataclass(frozen=True)
class SubstationAgentSpec:
    agent_id: int
    substation: int
    size: int
    actions: Tuple[Action, ...]

    @property
    def n_actions(self) -> int:
        return len(self.actions)


def enumerate_actions(spec: GridSpec, substation: int) -> List[Action]:
    """Canonical, isolation-safe configurations in lexicographic bus order."""
    size = spec.substation_size(substation)
    if size < 2:
        raise InvalidActionError(f"substation {substation} has {size} element(s); at least 2 are needed to split")
    actions = []
    for rest in product((BUS_1, BUS_2), repeat=size - 1):
        buses = (BUS_1,) + rest
        if is_isolation_safe(spec, substation, buses):
            actions.append(Action(substation=substation, buses=buses))
    return actions


def agent_substations(spec: GridSpec, min_size: int = MIN_AGENT_SUBSTATION_SIZE) -> List[int]:
    return [s.id for s in spec.substations if spec.substation_size(s.id) >= min_size]


def build_agent_specs(spec: GridSpec, min_size: int = MIN_AGENT_SUBSTATION_SIZE) -> List[SubstationAgentSpec]:
    return [
        SubstationAgentSpec(
            agent_id=i,
            substation=sub,
            size=spec.substation_size(sub),
            actions=tuple(enumerate_actions(spec, sub)),
        )
        for i, sub in enumerate(agent_substations(spec, min_size))
    ]


def union_agent_spec(specs: Sequence[SubstationAgentSpec]) -> SubstationAgentSpec:
    """Single agent over every substation action, with an explicit do-nothing first."""
    actions = (DO_NOTHING,) + tuple(a for s in specs for a in s.actions)
    return SubstationAgentSpec(agent_id=0, substation=-1, size=0, actions=actions)
