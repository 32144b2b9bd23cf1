"""
Overload protection: hard trips, delayed soft trips and automatic reconnection.
"""
import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.grid.power_flow import PowerFlowResult
from src.grid.topology import Topology


class OverloadConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    hard_overflow: float = Field(default=2.0, gt=1.0, description="rho at or above which a line trips immediately")
    soft_overflow_steps: int = Field(default=3, ge=0, description="overloaded steps tolerated before tripping")
    reconnect_delay: int = Field(default=12, ge=0, description="steps a tripped line stays out of service")


def apply_overload_dynamics(result: PowerFlowResult, topo: Topology, config: OverloadConfig = OverloadConfig()) -> Topology:
    """Return the topology after one step of protection logic."""
    updated = topo.copy()
    rho = result.rho
    was_out = ~topo.line_status

    # Lines already out of service count down and come back when the delay expires.
    updated.cooldown[was_out] = np.maximum(updated.cooldown[was_out] - 1, 0)
    updated.line_status[was_out & (updated.cooldown == 0)] = True

    in_service = topo.line_status
    hard = in_service & (rho >= config.hard_overflow)
    soft = in_service & ~hard & (rho > 1.0)
    calm = in_service & ~hard & ~soft

    updated.overload_steps[soft] += 1
    updated.overload_steps[calm] = 0
    tripped = hard | (soft & (updated.overload_steps > config.soft_overflow_steps))

    updated.line_status[tripped] = False
    updated.cooldown[tripped] = config.reconnect_delay
    updated.overload_steps[tripped] = 0
    if config.reconnect_delay == 0:
        updated.line_status[tripped] = True
    return updated
