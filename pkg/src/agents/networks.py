"""
Graph networks for the two agent families.

SACD: shared trunk of ``trunk_blocks`` GNN blocks, an actor head of
``actor_blocks`` blocks and one or two critic heads of ``critic_blocks``
blocks; every head mean-pools node states and ends in a dense layer of
action-space width. PPO: separate actor and critic stacks of ``ppo_blocks``
blocks each, the critic ending in a single value.
"""
from typing import List

import numpy as np

from src.agents.hyperparams import HyperParams
from src.nn.graph import GraphBatch
from src.nn.layers import dense, gnn_block, init_dense, init_gnn_block, mean_pool
from src.nn.params import ParameterSet, Role
from src.nn.tensor import Tensor

OUTPUT_GAIN = 0.01


def _init_stack(params: ParameterSet, prefix: str, in_dim: int, width: int, blocks: int, rng: np.random.Generator) -> None:
    for b in range(blocks):
        init_gnn_block(params, f"{prefix}.block{b}", in_dim if b == 0 else width, width, rng)


def _run_stack(params: ParameterSet, prefix: str, h: Tensor, graph: GraphBatch) -> Tensor:
    b = 0
    while f"{prefix}.block{b}.w_self" in params:
        h = gnn_block(params, f"{prefix}.block{b}", h, graph)
        b += 1
    return h


def critic_heads(hp: HyperParams) -> List[str]:
    return ["q1", "q2"] if hp.twin_critics else ["q1"]


def build_sacd_params(in_dim: int, n_actions: int, hp: HyperParams, rng: np.random.Generator):
    """Return (trunk, actor, critic) parameter sets."""
    width = hp.hidden_dim
    trunk = ParameterSet(Role.SHARED)
    _init_stack(trunk, "trunk", in_dim, width, hp.trunk_blocks, rng)

    actor = ParameterSet(Role.ACTOR)
    _init_stack(actor, "actor", width, width, hp.actor_blocks, rng)
    init_dense(actor, "actor.out", width, n_actions, rng, gain=OUTPUT_GAIN)

    critic = ParameterSet(Role.CRITIC)
    for head in critic_heads(hp):
        _init_stack(critic, head, width, width, hp.critic_blocks, rng)
        init_dense(critic, f"{head}.out", width, n_actions, rng)
    return trunk, actor, critic


def trunk_forward(trunk: ParameterSet, graph: GraphBatch) -> Tensor:
    return _run_stack(trunk, "trunk", Tensor(graph.features), graph)


def sacd_actor_logits(actor: ParameterSet, h: Tensor, graph: GraphBatch) -> Tensor:
    return dense(actor, "actor.out", mean_pool(_run_stack(actor, "actor", h, graph), graph))


def sacd_q_values(critic: ParameterSet, h: Tensor, graph: GraphBatch) -> List[Tensor]:
    """One (n_graphs, n_actions) Q table per critic head."""
    heads = [name for name in ("q1", "q2") if f"{name}.out.weight" in critic]
    return [dense(critic, f"{head}.out", mean_pool(_run_stack(critic, head, h, graph), graph)) for head in heads]


def build_ppo_params(in_dim: int, n_actions: int, hp: HyperParams, rng: np.random.Generator):
    """Return (actor, critic) parameter sets."""
    width = hp.hidden_dim
    actor = ParameterSet(Role.ACTOR)
    _init_stack(actor, "actor", in_dim, width, hp.ppo_blocks, rng)
    init_dense(actor, "actor.out", width, n_actions, rng, gain=OUTPUT_GAIN)

    critic = ParameterSet(Role.CRITIC)
    _init_stack(critic, "critic", in_dim, width, hp.ppo_blocks, rng)
    init_dense(critic, "critic.out", width, 1, rng)
    return actor, critic


def ppo_actor_logits(actor: ParameterSet, graph: GraphBatch) -> Tensor:
    h = _run_stack(actor, "actor", Tensor(graph.features), graph)
    return dense(actor, "actor.out", mean_pool(h, graph))


def ppo_values(critic: ParameterSet, graph: GraphBatch) -> Tensor:
    """State values, shape (n_graphs,)."""
    h = _run_stack(critic, "critic", Tensor(graph.features), graph)
    return dense(critic, "critic.out", mean_pool(h, graph)).reshape(graph.n_graphs)
