"""
Graph batches and the observation encoder.

Node features (version 1), one row per electrical node (substation, bus):

    0      net injection (generation - demand) / total generator capacity
    1      max loading over in-service lines incident to the node
    2      mean loading over those lines (0 when there are none)
    3..4   bus one-hot (bus 1, bus 2)
    5..    substation one-hot

Edges are in-service lines, one directed edge per direction.
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.env.environment import Observation
from src.exceptions import EmptyBatchError, ShapeMismatchError
from src.grid.model import GridSpec
from src.grid.topology import Injections, Topology, build_electrical_graph

FEATURE_VERSION = 1
BASE_FEATURES = 5


def feature_width(spec: GridSpec) -> int:
    return BASE_FEATURES + spec.n_substations


@dataclass(frozen=True)
class GraphBatch:
    features: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    node_graph: np.ndarray
    n_graphs: int = 1

    def __post_init__(self):
        n = self.features.shape[0]
        if self.edge_src.shape != self.edge_dst.shape:
            raise ShapeMismatchError("edges", self.edge_src.shape, self.edge_dst.shape)
        if self.edge_src.size and (max(self.edge_src.max(), self.edge_dst.max()) >= n or min(self.edge_src.min(), self.edge_dst.min()) < 0):
            raise ValueError(f"edge endpoint outside [0, {n})")
        if self.node_graph.shape != (n,):
            raise ShapeMismatchError("node_graph", (n,), self.node_graph.shape)

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edge_src.shape[0]

    @property
    def width(self) -> int:
        return self.features.shape[1]

    @property
    def nodes_per_graph(self) -> np.ndarray:
        return np.bincount(self.node_graph, minlength=self.n_graphs)


def encode_observation(spec: GridSpec, obs: Observation) -> GraphBatch:
    topo = Topology(
        bus=obs.bus,
        line_status=obs.line_status,
        cooldown=np.zeros(spec.n_lines, dtype=np.int64),
        overload_steps=np.zeros(spec.n_lines, dtype=np.int64),
    )
    graph = build_electrical_graph(spec, topo, Injections(obs.gen_mw, obs.load_mw))
    n = graph.n_nodes

    rho = obs.rho[graph.edge_lines]
    ends = np.concatenate([graph.edge_from, graph.edge_to])
    both = np.concatenate([rho, rho])
    rho_max = np.zeros(n)
    np.maximum.at(rho_max, ends, both)
    degree = np.bincount(ends, minlength=n)
    rho_sum = np.bincount(ends, weights=both, minlength=n)
    rho_mean = np.divide(rho_sum, degree, out=np.zeros(n), where=degree > 0)

    subs = np.array([key[0] for key in graph.node_keys], dtype=np.int64)
    buses = np.array([key[1] for key in graph.node_keys], dtype=np.int64)
    features = np.zeros((n, feature_width(spec)))
    features[:, 0] = graph.injections / spec.p_max.sum()
    features[:, 1] = rho_max
    features[:, 2] = rho_mean
    features[np.arange(n), 2 + buses] = 1.0
    features[np.arange(n), BASE_FEATURES + subs] = 1.0

    return GraphBatch(
        features=features,
        edge_src=np.concatenate([graph.edge_from, graph.edge_to]).astype(np.int64),
        edge_dst=np.concatenate([graph.edge_to, graph.edge_from]).astype(np.int64),
        node_graph=np.zeros(n, dtype=np.int64),
    )


def batch_graphs(graphs: Sequence[GraphBatch]) -> GraphBatch:
    """Disjoint union; node indices shift by the nodes of preceding graphs."""
    if not graphs:
        raise EmptyBatchError("cannot batch zero graphs")
    widths = {g.width for g in graphs}
    if len(widths) != 1:
        raise ShapeMismatchError("batch_graphs", (graphs[0].width,), tuple(sorted(widths)))
    offsets = np.cumsum([0] + [g.n_nodes for g in graphs[:-1]])
    graph_offsets = np.cumsum([0] + [g.n_graphs for g in graphs[:-1]])
    return GraphBatch(
        features=np.concatenate([g.features for g in graphs], axis=0),
        edge_src=np.concatenate([g.edge_src + o for g, o in zip(graphs, offsets)]).astype(np.int64),
        edge_dst=np.concatenate([g.edge_dst + o for g, o in zip(graphs, offsets)]).astype(np.int64),
        node_graph=np.concatenate([g.node_graph + o for g, o in zip(graphs, graph_offsets)]).astype(np.int64),
        n_graphs=int(sum(g.n_graphs for g in graphs)),
    )
