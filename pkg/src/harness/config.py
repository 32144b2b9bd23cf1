"""
Experiment configuration files.

A TOML document with four tables:

    [env]        grid file, episode set location and simulator settings
    [hierarchy]  gate threshold, mid-level policy, strategy
    [algo]       ``preset`` plus any HyperParams field by name
    [run]        seeds, interaction budget, eval period, workers, output dir

Unknown keys are schema violations. Dotted ``section.key=value`` overrides
from the command line are applied before validation.
"""
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.agents.hyperparams import HyperParams
from src.config import settings
from src.env.chronics import FULL_EPISODE_LENGTH, SUB_EPISODE_LENGTH, ChronicProfile
from src.env.environment import EnvConfig
from src.exceptions import ConfigError, SeedBudgetError
from src.grid.dynamics import OverloadConfig
from src.marl.hierarchy import HierarchyConfig

SECTIONS = ("env", "hierarchy", "algo", "run")


class EnvSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    grid_file: Optional[Path] = None
    chronics_dir: Optional[Path] = None
    baseline_file: Optional[Path] = None

    chronic_seed: int = 0
    chronic_count: int = Field(default=20, ge=3)
    chronic_length: int = Field(default=FULL_EPISODE_LENGTH, gt=0)
    sub_episode_length: int = Field(default=SUB_EPISODE_LENGTH, gt=0)
    profile: Union[Literal["calm", "stressed"], ChronicProfile] = "stressed"

    reward_floor: float = Field(default=0.9, ge=0, lt=1)
    rho_soft: float = Field(default=0.95, gt=0)
    loss_coefficient: float = Field(default=1.0, ge=0)
    overload: OverloadConfig = Field(default_factory=OverloadConfig)

    def chronic_profile(self) -> ChronicProfile:
        if isinstance(self.profile, ChronicProfile):
            return self.profile
        return ChronicProfile.preset(self.profile)

    def env_config(self, episode_length: Optional[int] = None) -> EnvConfig:
        return EnvConfig(
            episode_length=episode_length or self.sub_episode_length,
            reward_floor=self.reward_floor,
            rho_soft=self.rho_soft,
            loss_coefficient=self.loss_coefficient,
            overload=self.overload,
        )


class RunSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    budget: int = 10_000
    eval_period: int = 100
    eval_split: Literal["test", "validation"] = "test"
    workers: int = Field(default=1, ge=1)
    output_dir: Optional[Path] = None
    name: Optional[str] = None
    progress: bool = True


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    env: EnvSection = Field(default_factory=EnvSection)
    hierarchy: HierarchyConfig = Field(default_factory=HierarchyConfig)
    algo: Dict[str, Any] = Field(default_factory=dict)
    run: RunSection = Field(default_factory=RunSection)

    def check_schedule(self) -> None:
        if not self.run.seeds:
            raise SeedBudgetError("the seed list is empty")
        if len(set(self.run.seeds)) != len(self.run.seeds):
            raise SeedBudgetError(f"duplicate seeds in {self.run.seeds}")
        if self.run.budget <= 0:
            raise SeedBudgetError(f"interaction budget must be positive, got {self.run.budget}")
        if self.run.eval_period <= 0 or self.run.budget % self.run.eval_period:
            raise SeedBudgetError(
                f"eval period {self.run.eval_period} must divide the interaction budget {self.run.budget}"
            )

    def hyperparams(self) -> HyperParams:
        """The ``[algo]`` preset (default: the strategy's own) with explicit keys on top."""
        overrides = dict(self.algo)
        preset = overrides.pop("preset", None) or self.hierarchy.strategy.default_preset
        rho_thresh = overrides.setdefault("rho_thresh", self.hierarchy.rho_thresh)
        if rho_thresh != self.hierarchy.rho_thresh:
            raise ConfigError(
                f"[algo] rho_thresh {rho_thresh} disagrees with [hierarchy] rho_thresh {self.hierarchy.rho_thresh}"
            )
        try:
            return HyperParams.from_preset(preset, **overrides)
        except ValidationError as e:
            raise ConfigError(f"invalid [algo] section: {e}") from e

    @property
    def run_name(self) -> str:
        return self.run.name or f"{self.hierarchy.strategy.value}_{self.hierarchy.mid_policy}"

    def output_dir(self) -> Path:
        return self.run.output_dir or settings.output_root / self.run_name

    def grid_file(self) -> Optional[Path]:
        return self.env.grid_file or settings.grid_file


def parse_override(item: str) -> Dict[str, Any]:
    """``section.key=value`` into a nested dict; the value is read as a TOML literal."""
    key, sep, raw = item.partition("=")
    if not sep or "." not in key:
        raise ConfigError(f"override {item!r} must look like section.key=value")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    nested: Dict[str, Any] = {}
    cursor = nested
    parts = key.split(".")
    for part in parts[:-1]:
        cursor = cursor.setdefault(part, {})
    cursor[parts[-1]] = value
    return nested


def merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def build_experiment_config(document: Dict[str, Any], overrides: Sequence[str] = ()) -> ExperimentConfig:
    for item in overrides:
        document = merge(document, parse_override(item))
    unknown = set(document) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}; expected {list(SECTIONS)}")
    try:
        config = ExperimentConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError(f"invalid experiment config: {e}") from e
    config.hyperparams()
    config.check_schedule()
    return config


def load_experiment_config(path: Optional[Union[str, Path]] = None, overrides: Sequence[str] = ()) -> ExperimentConfig:
    document: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file {path} does not exist")
        try:
            document = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path} is not valid TOML: {e}") from e
    return build_experiment_config(document, overrides)
