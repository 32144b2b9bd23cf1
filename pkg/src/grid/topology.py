"""
Mutable bus-assignment state and the electrical graph derived from it.
"""
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from src.grid.model import GridSpec

BUS_1 = 1
BUS_2 = 2


@dataclass
class Topology:
    """Bus per element, plus line status and the overload bookkeeping counters."""

    bus: np.ndarray
    line_status: np.ndarray
    cooldown: np.ndarray
    overload_steps: np.ndarray

    @classmethod
    def reference(cls, spec: GridSpec) -> "Topology":
        """All elements on bus 1, all lines in service, counters at zero."""
        return cls(
            bus=np.full(spec.n_elements, BUS_1, dtype=np.int8),
            line_status=np.ones(spec.n_lines, dtype=bool),
            cooldown=np.zeros(spec.n_lines, dtype=np.int64),
            overload_steps=np.zeros(spec.n_lines, dtype=np.int64),
        )

    def copy(self) -> "Topology":
        return Topology(
            bus=self.bus.copy(),
            line_status=self.line_status.copy(),
            cooldown=self.cooldown.copy(),
            overload_steps=self.overload_steps.copy(),
        )

    def equals(self, other: "Topology") -> bool:
        return (
            np.array_equal(self.bus, other.bus)
            and np.array_equal(self.line_status, other.line_status)
            and np.array_equal(self.cooldown, other.cooldown)
            and np.array_equal(self.overload_steps, other.overload_steps)
        )

    def substation_config(self, spec: GridSpec, substation: int) -> Tuple[int, ...]:
        return tuple(int(self.bus[i]) for i in spec.layout.substation_elements[substation])

    def with_substation_config(self, spec: GridSpec, substation: int, buses: Sequence[int]) -> "Topology":
        updated = self.copy()
        updated.bus[list(spec.layout.substation_elements[substation])] = np.asarray(buses, dtype=np.int8)
        return updated


@dataclass(frozen=True)
class Injections:
    """Generator outputs and load demands in MW, indexed by generator / load id."""

    generation_mw: np.ndarray
    demand_mw: np.ndarray


@dataclass(frozen=True)
class ElectricalGraph:
    """
    Nodes are (substation, bus) pairs with at least one assigned element.
    Edges are in-service lines between the nodes their endpoints sit on.
    """

    node_keys: Tuple[Tuple[int, int], ...]
    edge_lines: np.ndarray
    edge_from: np.ndarray
    edge_to: np.ndarray
    edge_reactance: np.ndarray
    generation: np.ndarray
    demand: np.ndarray
    has_generator: np.ndarray
    has_load: np.ndarray
    line_limits: np.ndarray
    element_node: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def n_nodes(self) -> int:
        return len(self.node_keys)

    @property
    def n_edges(self) -> int:
        return len(self.edge_lines)

    @property
    def n_lines(self) -> int:
        return len(self.line_limits)

    @property
    def injections(self) -> np.ndarray:
        return self.generation - self.demand

    @property
    def node_index(self) -> Dict[Tuple[int, int], int]:
        return {key: i for i, key in enumerate(self.node_keys)}

    def components(self) -> Tuple[int, np.ndarray]:
        """Connected components over in-service edges: (count, label per node)."""
        adjacency = coo_matrix(
            (np.ones(self.n_edges), (self.edge_from, self.edge_to)),
            shape=(self.n_nodes, self.n_nodes),
        )
        return connected_components(adjacency, directed=False)


def build_electrical_graph(spec: GridSpec, topo: Topology, injections: Injections) -> ElectricalGraph:
    """Derive the electrical graph for a topology and per-element injections."""
    layout = spec.layout
    if len(injections.generation_mw) != len(spec.generators) or len(injections.demand_mw) != len(spec.loads):
        raise ValueError(
            f"injections cover {len(injections.generation_mw)} generators / {len(injections.demand_mw)} loads, "
            f"grid has {len(spec.generators)} / {len(spec.loads)}"
        )

    keys = sorted({(int(layout.element_substation[e]), int(topo.bus[e])) for e in range(layout.n_elements)})
    index = {key: i for i, key in enumerate(keys)}
    element_node = np.array(
        [index[(int(layout.element_substation[e]), int(topo.bus[e]))] for e in range(layout.n_elements)],
        dtype=np.int64,
    )

    n_nodes = len(keys)
    generation = np.zeros(n_nodes)
    demand = np.zeros(n_nodes)
    has_generator = np.zeros(n_nodes, dtype=bool)
    has_load = np.zeros(n_nodes, dtype=bool)
    gen_nodes = element_node[layout.generator_element]
    load_nodes = element_node[layout.load_element]
    np.add.at(generation, gen_nodes, injections.generation_mw)
    np.add.at(demand, load_nodes, injections.demand_mw)
    has_generator[gen_nodes] = True
    has_load[load_nodes] = True

    in_service = np.flatnonzero(topo.line_status)
    return ElectricalGraph(
        node_keys=tuple(keys),
        edge_lines=in_service.astype(np.int64),
        edge_from=element_node[layout.line_origin_element[in_service]],
        edge_to=element_node[layout.line_extremity_element[in_service]],
        edge_reactance=spec.reactances[in_service],
        generation=generation,
        demand=demand,
        has_generator=has_generator,
        has_load=has_load,
        line_limits=spec.line_limits,
        element_node=element_node,
    )
