"""
Learning hyperparameters and the four tuned presets.

Preset columns (single-agent PPO, multi-agent PPO, single-agent SACD,
multi-agent SACD):

    parameter               ppo     mappo   sacd    masacd
    (mini-)batch            4x32    2x32    64      16
    update start (x1000)    -       -       4       3
    gamma                   0.95    0.996   0.995   0.998
    learning rate           3e-3    2e-3    5e-5    2e-4
    value coefficient c1    0.5     0.5     -       -
    entropy coefficient c2  0.01    5e-5    -       -
    clip epsilon            0.2     0.12    -       -
    GAE lambda              0.95    0.85    -       -
    target entropy scale    -       -       0.98    0.98
    tau                     -       -       0.001   0.002
"""
from enum import Enum
from typing import Any, Dict

from pydantic import BaseModel, ConfigDict, Field

from src.exceptions import ConfigError


class Algorithm(str, Enum):
    SACD = "sacd"
    PPO = "ppo"


class HyperParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    preset: str = Field(default="custom", description="preset column the values started from")

    gamma: float = Field(default=0.99, gt=0, lt=1)
    learning_rate: float = Field(default=3e-4, gt=0)
    hidden_dim: int = Field(default=128, gt=0)

    # SACD
    batch_size: int = Field(default=64, gt=0, description="uniform replay sample size")
    update_start: float = Field(default=1.0, ge=0, description="thousands of counted interactions before updates")
    target_entropy_scale: float = Field(default=0.98, gt=0)
    tau: float = Field(default=0.005, gt=0, le=1)
    initial_alpha: float = Field(default=1.0, gt=0)
    twin_critics: bool = True
    replay_capacity: int = Field(default=100_000, gt=0)
    trunk_blocks: int = Field(default=3, ge=1)
    actor_blocks: int = Field(default=3, ge=1)
    critic_blocks: int = Field(default=1, ge=1)

    # PPO
    n_minibatches: int = Field(default=4, gt=0)
    minibatch_size: int = Field(default=32, gt=0)
    clip_eps: float = Field(default=0.2, gt=0)
    vf_coef: float = Field(default=0.5, ge=0)
    ent_coef: float = Field(default=0.01, ge=0)
    gae_lambda: float = Field(default=0.95, ge=0, le=1)
    ppo_epochs: int = Field(default=4, gt=0)
    ppo_blocks: int = Field(default=3, ge=1)
    normalize_advantages: bool = True

    # Hierarchy gate, mirrored from HierarchyConfig by the experiment config
    rho_thresh: float = Field(default=0.95, gt=0, le=1)

    @property
    def horizon(self) -> int:
        """Rollout length h collected before each PPO update."""
        return self.n_minibatches * self.minibatch_size

    @property
    def update_start_interactions(self) -> int:
        return int(round(self.update_start * 1000))

    @classmethod
    def preset_values(cls, name: str) -> Dict[str, Any]:
        if name not in PRESETS:
            raise ConfigError(f"unknown hyperparameter preset {name!r}; choose from {sorted(PRESETS)}")
        return {"preset": name, **PRESETS[name]}

    @classmethod
    def from_preset(cls, name: str, **overrides: Any) -> "HyperParams":
        return cls(**{**cls.preset_values(name), **overrides})


PRESETS: Dict[str, Dict[str, Any]] = {
    "ppo": {
        "n_minibatches": 4,
        "minibatch_size": 32,
        "gamma": 0.95,
        "learning_rate": 0.003,
        "vf_coef": 0.5,
        "ent_coef": 0.01,
        "clip_eps": 0.2,
        "gae_lambda": 0.95,
    },
    "mappo": {
        "n_minibatches": 2,
        "minibatch_size": 32,
        "gamma": 0.996,
        "learning_rate": 0.002,
        "vf_coef": 0.5,
        "ent_coef": 5e-5,
        "clip_eps": 0.12,
        "gae_lambda": 0.85,
    },
    "sacd": {
        "batch_size": 64,
        "update_start": 4,
        "gamma": 0.995,
        "learning_rate": 5e-5,
        "target_entropy_scale": 0.98,
        "tau": 0.001,
    },
    "masacd": {
        "batch_size": 16,
        "update_start": 3,
        "gamma": 0.998,
        "learning_rate": 2e-4,
        "target_entropy_scale": 0.98,
        "tau": 0.002,
    },
}

PRESET_ALGORITHM = {
    "ppo": Algorithm.PPO,
    "mappo": Algorithm.PPO,
    "sacd": Algorithm.SACD,
    "masacd": Algorithm.SACD,
}
