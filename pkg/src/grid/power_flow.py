"""
DC power flow over an electrical graph.

Each connected component is balanced with a distributed slack (generation
scaled to the component's demand) and solved as ``B_red . theta = P_red``
with one slack node removed. Line flows are ``(theta_from - theta_to) / x``
in MW, so thermal limits are MW as well.
"""
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from src.grid.topology import ElectricalGraph


@dataclass(frozen=True)
class PowerFlowResult:
    flow_mw: np.ndarray
    rho: np.ndarray
    theta: np.ndarray
    generation: np.ndarray
    demand: np.ndarray
    feasible: bool
    n_components: int
    served_mw: float

    @property
    def injections(self) -> np.ndarray:
        """Balanced net injection per node."""
        return self.generation - self.demand

    @property
    def total_generation_mw(self) -> float:
        return float(self.generation.sum())


def susceptance_matrix(n_nodes: int, edge_from: np.ndarray, edge_to: np.ndarray, reactance: np.ndarray):
    b = 1.0 / reactance
    rows = np.concatenate([edge_from, edge_to, edge_from, edge_to])
    cols = np.concatenate([edge_from, edge_to, edge_to, edge_from])
    data = np.concatenate([b, b, -b, -b])
    return coo_matrix((data, (rows, cols)), shape=(n_nodes, n_nodes)).tocsc()


def solve_dc_power_flow(graph: ElectricalGraph) -> PowerFlowResult:
    """Solve the DC power flow; infeasibility is reported, never raised."""
    n_nodes = graph.n_nodes
    n_components, labels = graph.components()
    generation = graph.generation.astype(np.float64).copy()
    demand = graph.demand.astype(np.float64)
    theta = np.zeros(n_nodes)
    feasible = n_nodes > 0
    served = 0.0

    for component in range(n_components):
        nodes = np.flatnonzero(labels == component)
        gen_total = generation[nodes].sum()
        load_total = demand[nodes].sum()
        generator_nodes = nodes[graph.has_generator[nodes]]
        if graph.has_load[nodes].any() and not len(generator_nodes):
            # A load with no generator element in its component: flows are undefined.
            feasible = False
            continue
        if gen_total > 0.0:
            generation[nodes] *= load_total / gen_total
        elif len(generator_nodes):
            # Generators present but all dispatched at 0 MW share the demand equally.
            generation[generator_nodes] = load_total / len(generator_nodes)
        served += load_total
        if len(nodes) == 1:
            continue

        slack = generator_nodes[0] if len(generator_nodes) else nodes[0]
        others = nodes[nodes != slack]

        in_component = (labels[graph.edge_from] == component)
        b_matrix = susceptance_matrix(
            n_nodes,
            graph.edge_from[in_component],
            graph.edge_to[in_component],
            graph.edge_reactance[in_component],
        )
        reduced = b_matrix[others][:, others]
        rhs = (generation - demand)[others]
        solution = np.atleast_1d(spsolve(reduced, rhs))
        if not np.all(np.isfinite(solution)):
            feasible = False
            continue
        theta[others] = solution
        theta[slack] = 0.0

    flow = np.zeros(graph.n_lines)
    flow[graph.edge_lines] = (theta[graph.edge_from] - theta[graph.edge_to]) / graph.edge_reactance
    rho = np.abs(flow) / graph.line_limits

    return PowerFlowResult(
        flow_mw=flow,
        rho=rho,
        theta=theta,
        generation=generation,
        demand=demand,
        feasible=bool(feasible),
        n_components=int(n_components),
        served_mw=float(served),
    )
