"""
Pytest configuration and fixtures for the grid-control test suite.
"""
import os
import sys

import numpy as np
import pytest

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

os.environ.setdefault("ENVIRONMENT", "test")
os.environ.setdefault("LOG_LEVEL", "ERROR")

from src.agents.hyperparams import HyperParams
from src.env.chronics import ChronicProfile, generate_chronics
from src.env.environment import EnvConfig, GridEnvironment
from src.grid.dynamics import OverloadConfig
from src.grid.model import load_grid
from src.nn.graph import encode_observation
from src.nn.tensor import Tensor, parameter


@pytest.fixture(scope="session")
def case5():
    """The bundled five-substation grid."""
    return load_grid()


@pytest.fixture(scope="session")
def roomy_case5(case5):
    """case5 with limits so wide that no line ever gets close to them."""
    return case5.with_line_limits(case5.line_limits * 100.0)


@pytest.fixture(scope="session")
def small_episode_set(case5):
    """4 calm chronics of 40 steps, two 20-step windows each."""
    return generate_chronics(
        case5,
        seed=7,
        count=4,
        length=40,
        profile=ChronicProfile.calm(),
        sub_episode_length=20,
        sub_episodes_per_chronic=2,
    )


@pytest.fixture
def no_trip_config():
    """Protection effectively disabled so episodes only end on the clock or a split."""
    return EnvConfig(
        episode_length=20,
        overload=OverloadConfig(hard_overflow=1e6, soft_overflow_steps=10**6),
    )


@pytest.fixture
def first_observation(case5, small_episode_set, no_trip_config):
    env = GridEnvironment(case5, no_trip_config)
    chronic = small_episode_set.chronics_in("train")[0]
    return env.reset(chronic, 0)


@pytest.fixture
def observation_graph(case5, first_observation):
    return encode_observation(case5, first_observation)


@pytest.fixture
def tiny_sacd_hp():
    """MASACD preset shrunk so a full update takes milliseconds."""
    return HyperParams.from_preset(
        "masacd",
        hidden_dim=8,
        trunk_blocks=1,
        actor_blocks=1,
        critic_blocks=1,
        batch_size=4,
        update_start=0.0,
        replay_capacity=256,
    )


@pytest.fixture
def tiny_ppo_hp():
    """MAPPO preset with a 2 x 4 rollout and a single epoch."""
    return HyperParams.from_preset(
        "mappo",
        hidden_dim=8,
        ppo_blocks=1,
        n_minibatches=2,
        minibatch_size=4,
        ppo_epochs=1,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def gradient_check():
    """Compare backward() against central differences for every input of ``fn``."""

    def check(fn, *arrays, h=1e-6, rtol=1e-4, atol=1e-6):
        arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
        leaves = [parameter(a.copy()) for a in arrays]
        fn(*leaves).backward()
        for k, array in enumerate(arrays):
            numeric = np.zeros_like(array)
            for index in np.ndindex(array.shape):
                up = [a.copy() for a in arrays]
                down = [a.copy() for a in arrays]
                up[k][index] += h
                down[k][index] -= h
                numeric[index] = (fn(*map(Tensor, up)).item() - fn(*map(Tensor, down)).item()) / (2 * h)
            assert np.allclose(leaves[k].grad, numeric, rtol=rtol, atol=atol), (k, leaves[k].grad, numeric)

    return check
