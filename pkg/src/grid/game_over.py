from enum import Enum
from typing import Optional

import numpy as np

from src.grid.power_flow import PowerFlowResult
from src.grid.topology import ElectricalGraph


class FailureCause(str, Enum):
    ISOLATED_LOAD = "isolated-load"
    ISOLATED_GENERATOR = "isolated-generator"
    NETWORK_SPLIT = "network-split"
    INFEASIBLE_FLOW = "infeasible-flow"


def check_game_over(graph: ElectricalGraph, result: PowerFlowResult) -> Optional[FailureCause]:
    """
    Classify a terminal failure, or return None when the grid is operable.

    Only components holding a load or a generator matter; a bus that keeps
    nothing but disconnected line ends is harmless. More than one such
    component is a split even when every island is balanced.
    """
    _, labels = graph.components()
    active = graph.has_load | graph.has_generator
    active_components = np.unique(labels[active])

    for component in active_components:
        members = labels == component
        has_load = bool(graph.has_load[members].any())
        has_generator = bool(graph.has_generator[members].any())
        if has_load and not has_generator:
            return FailureCause.ISOLATED_LOAD
        if has_generator and not has_load:
            return FailureCause.ISOLATED_GENERATOR

    if len(active_components) > 1:
        return FailureCause.NETWORK_SPLIT
    if not result.feasible:
        return FailureCause.INFEASIBLE_FLOW
    return None
