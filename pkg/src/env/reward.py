"""
Energy-efficiency reward.

DC flow has no losses, so congestion is charged as a loss term
``coefficient * served * sum(max(0, rho - rho_soft)^2)`` added on top of the
served load to form the generation the ratio is taken against.
"""
import numpy as np

from src.exceptions import UndefinedRatioError

FAILURE_REWARD = -1.0


def congestion_loss_mw(rho: np.ndarray, served_mw: float, rho_soft: float = 0.95, coefficient: float = 1.0) -> float:
    excess = np.clip(np.asarray(rho, dtype=np.float64) - rho_soft, 0.0, None)
    return float(coefficient * served_mw * np.sum(excess ** 2))


def efficiency_reward(served_mw: float, generation_mw: float, r_min: float = 0.9) -> float:
    """Served/generation ratio rescaled from [r_min, 1] onto [0, 1] and clamped."""
    if generation_mw <= 0:
        raise UndefinedRatioError(f"generation must be positive, got {generation_mw}")
    ratio = served_mw / generation_mw
    return float(np.clip((ratio - r_min) / (1.0 - r_min), 0.0, 1.0))
