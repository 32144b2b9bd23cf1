"""
Do-nothing reference runs.

Scores are only defined relative to the agent that never touches the
topology, so its survival and cost per sub-episode are computed once and
cached as JSON next to the episode set.
"""
import json
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.env.action import DO_NOTHING
from src.env.chronics import Chronic, EpisodeSet
from src.env.environment import EnvConfig, GridEnvironment
from src.env.scoring import episode_cost, l2rpn_score
from src.exceptions import BaselineMissingError, ConfigError
from src.grid.model import GridSpec
from src.monitoring.logger import get_logger
from src.monitoring.metrics import measure_time, track_baseline

logger = get_logger(__name__)

BASELINE_SCHEMA_VERSION = 1


def episode_key(chronic_id: str, offset: int) -> str:
    return f"{chronic_id}@{offset}"


class BaselineEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    survived: int = Field(ge=0)
    cost: float = Field(ge=0)
    length: int = Field(gt=0)


class BaselineCache(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: int = BASELINE_SCHEMA_VERSION
    entries: Dict[str, BaselineEntry] = Field(default_factory=dict)

    def get(self, chronic_id: str, offset: int) -> BaselineEntry:
        key = episode_key(chronic_id, offset)
        if key not in self.entries:
            raise BaselineMissingError(f"no do-nothing baseline for sub-episode {key}; run the baseline first")
        return self.entries[key]

    def score(self, chronic_id: str, offset: int, survived: int, cost: float, length: int) -> float:
        entry = self.get(chronic_id, offset)
        if entry.length != length:
            raise BaselineMissingError(
                f"baseline for {episode_key(chronic_id, offset)} covers {entry.length} steps, episode has {length}"
            )
        return l2rpn_score(survived, entry.survived, length, agent_cost=cost, baseline_cost=entry.cost)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "BaselineCache":
        path = Path(path)
        if not path.exists():
            raise BaselineMissingError(f"baseline cache {path} does not exist")
        try:
            return cls.model_validate_json(path.read_text(encoding="utf-8"))
        except ValidationError as e:
            raise ConfigError(f"invalid baseline cache {path}: {e}") from e


def run_do_nothing(env: GridEnvironment, chronic: Chronic, offset: int, length: Optional[int] = None) -> BaselineEntry:
    env.reset(chronic, offset, length)
    rewards = []
    survived = 0
    while not env.done:
        outcome = env.step(DO_NOTHING)
        rewards.append(outcome.reward)
        survived = outcome.step - 1 if outcome.failed else outcome.step
    return BaselineEntry(survived=survived, cost=episode_cost(rewards), length=env.episode_length)


@measure_time(track_baseline)
def run_baseline(
    spec: GridSpec,
    episode_set: EpisodeSet,
    splits: Sequence[str] = ("test", "validation"),
    env_config: Optional[EnvConfig] = None,
) -> BaselineCache:
    env = GridEnvironment(spec, env_config, phase="baseline")
    cache = BaselineCache()
    for split in splits:
        for chronic, offset in episode_set.sub_episodes(split):
            entry = run_do_nothing(env, chronic, offset, episode_set.sub_episode_length)
            cache.entries[episode_key(chronic.id, offset)] = entry
            logger.info(
                "baseline_episode",
                chronic=chronic.id,
                offset=offset,
                survived=entry.survived,
                length=entry.length,
            )
    return cache
