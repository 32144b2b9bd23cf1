"""
Dense and attention message-passing layers over ParameterSets.

Layers are functions of (params, prefix, inputs) so that an online network
and its target copy share one definition and differ only in the set passed.
"""
import numpy as np

from src.exceptions import EmptyBatchError, ShapeMismatchError
from src.nn.graph import GraphBatch
from src.nn.params import ParameterSet, orthogonal
from src.nn.tensor import Tensor, segment_sum

LEAKY_SLOPE = 0.01


def init_dense(params: ParameterSet, prefix: str, in_dim: int, out_dim: int, rng: np.random.Generator, gain: float = 1.0) -> None:
    params.add(f"{prefix}.weight", orthogonal(rng, in_dim, out_dim, gain))
    params.add(f"{prefix}.bias", np.zeros(out_dim))


def dense(params: ParameterSet, prefix: str, x: Tensor) -> Tensor:
    weight = params[f"{prefix}.weight"]
    if x.shape[-1] != weight.shape[0]:
        raise ShapeMismatchError(f"dense {prefix}", x.shape, weight.shape)
    return x @ weight + params[f"{prefix}.bias"]


def init_gnn_block(params: ParameterSet, prefix: str, in_dim: int, out_dim: int, rng: np.random.Generator) -> None:
    params.add(f"{prefix}.w_self", orthogonal(rng, in_dim, out_dim))
    params.add(f"{prefix}.w_msg", orthogonal(rng, in_dim, out_dim))
    params.add(f"{prefix}.bias", np.zeros(out_dim))
    params.add(f"{prefix}.a_self", orthogonal(rng, out_dim, 1))
    params.add(f"{prefix}.a_msg", orthogonal(rng, out_dim, 1))


def gnn_block(params: ParameterSet, prefix: str, h: Tensor, graph: GraphBatch) -> Tensor:
    """
    h'_i = act(W_self h_i + b + sum_j alpha_ij W_msg h_j), plus h_i when widths match.

    alpha_ij is a softmax over the in-neighbours j of i of
    leaky_relu(a_self . W_self h_i + a_msg . W_msg h_j). Nodes without
    in-neighbours keep only the self term.
    """
    if graph.n_nodes == 0:
        raise EmptyBatchError(f"gnn block {prefix} on an empty graph")
    w_self = params[f"{prefix}.w_self"]
    if h.shape != (graph.n_nodes, w_self.shape[0]):
        raise ShapeMismatchError(f"gnn block {prefix}", h.shape, (graph.n_nodes, w_self.shape[0]))

    self_term = h @ w_self
    pre = self_term + params[f"{prefix}.bias"]
    if graph.n_edges:
        messages = h @ params[f"{prefix}.w_msg"]
        score = (self_term @ params[f"{prefix}.a_self"]).take_rows(graph.edge_dst) + (
            messages @ params[f"{prefix}.a_msg"]
        ).take_rows(graph.edge_src)
        score = score.leaky_relu(LEAKY_SLOPE)

        # Per-destination max shift; constant w.r.t. the gradient.
        shift = np.full((graph.n_nodes, 1), -np.inf)
        np.maximum.at(shift, graph.edge_dst, score.data)
        weights = (score - shift[graph.edge_dst]).exp()
        norm = segment_sum(weights, graph.edge_dst, graph.n_nodes).take_rows(graph.edge_dst)
        alpha = weights / norm
        pre = pre + segment_sum(messages.take_rows(graph.edge_src) * alpha, graph.edge_dst, graph.n_nodes)

    out = pre.leaky_relu(LEAKY_SLOPE)
    if out.shape == h.shape:
        out = out + h
    return out


def mean_pool(h: Tensor, graph: GraphBatch) -> Tensor:
    """Average node rows per graph: (n_nodes, d) -> (n_graphs, d)."""
    counts = np.maximum(graph.nodes_per_graph, 1).astype(np.float64)
    return segment_sum(h, graph.node_graph, graph.n_graphs) * (1.0 / counts)[:, None]
