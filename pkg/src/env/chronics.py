"""
Synthetic chronics: load and generation time series driving episodes.

Loads follow a daily sinusoid with AR(1) noise and occasional smooth demand
spikes; generation tracks total demand with a slowly swinging dispatch split.
A chronic of length T holds T + 1 rows (states 0..T), so a sub-episode
window [offset, offset + L] spans exactly L steps.
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src import seeding
from src.exceptions import ChronicProfileError, ConfigError
from src.grid.model import GridSpec
from src.grid.topology import Injections
from src.monitoring.logger import get_logger

logger = get_logger(__name__)

EPISODE_SET_SCHEMA_VERSION = 1
FULL_EPISODE_LENGTH = 2016
SUB_EPISODE_LENGTH = 864
SUB_EPISODES_PER_CHRONIC = 5
STEP_MINUTES = 5
STEPS_PER_DAY = 24 * 60 // STEP_MINUTES

SPLITS = ("train", "test", "validation")


class ChronicProfile(BaseModel):
    """Parameters of the synthetic load/generation generator."""

    model_config = ConfigDict(extra="forbid")

    base_total_mw: float = Field(default=150.0, gt=0)
    load_weights: Optional[List[float]] = Field(default=None, description="relative base demand per load")
    daily_amplitude: float = Field(default=0.2, ge=0, lt=1)
    level_jitter: float = Field(default=0.05, ge=0, lt=1, description="per-chronic demand level spread")
    noise_scale: float = Field(default=0.015, ge=0)
    noise_persistence: float = Field(default=0.95, ge=0, lt=1)
    stress_event_rate: float = Field(default=0.0, ge=0, description="expected spikes per load per day")
    stress_magnitude: float = Field(default=0.6, ge=0, description="peak relative demand increase of a spike")
    stress_duration_steps: int = Field(default=48, gt=0)
    dispatch_swing: float = Field(default=0.08, ge=0, lt=1)
    max_loss_fraction: float = Field(default=0.05, ge=0, lt=1, description="allowed shortfall of generation below demand")
    capacity_margin: float = Field(default=0.95, gt=0, le=1, description="cap on total demand / total p_max")

    @model_validator(mode="after")
    def validate_weights(self) -> "ChronicProfile":
        if self.load_weights is not None and any(w < 0 for w in self.load_weights):
            raise ValueError("load_weights must be non-negative")
        return self

    @classmethod
    def calm(cls, **overrides: Any) -> "ChronicProfile":
        return cls(**{"stress_event_rate": 0.0, **overrides})

    @classmethod
    def stressed(cls, **overrides: Any) -> "ChronicProfile":
        return cls(**{"stress_event_rate": 0.6, **overrides})

    @classmethod
    def preset(cls, name: str) -> "ChronicProfile":
        presets = {"calm": cls.calm, "stressed": cls.stressed}
        if name not in presets:
            raise ChronicProfileError(f"Unknown chronic profile preset: {name}")
        return presets[name]()


@dataclass(frozen=True)
class Chronic:
    id: str
    load_mw: np.ndarray
    gen_mw: np.ndarray
    step_minutes: int = STEP_MINUTES

    @property
    def length(self) -> int:
        """Number of steps T; the chronic stores T + 1 states."""
        return self.load_mw.shape[0] - 1

    def check_supply(self, max_loss_fraction: float) -> None:
        """Demand is non-negative and every step generates at least demand * (1 - max_loss_fraction)."""
        if np.any(self.load_mw < 0):
            raise ChronicProfileError(f"chronic {self.id}: negative demand")
        demand = self.load_mw.sum(axis=1)
        short = np.flatnonzero(self.gen_mw.sum(axis=1) < demand * (1.0 - max_loss_fraction) - 1e-9)
        if short.size:
            raise ChronicProfileError(
                f"chronic {self.id}: generation below demand * (1 - {max_loss_fraction}) at step {int(short[0])}"
            )

    def injections_at(self, t: int) -> Injections:
        return Injections(generation_mw=self.gen_mw[t], demand_mw=self.load_mw[t])

    def to_frame(self) -> pd.DataFrame:
        columns: Dict[str, Any] = {"timestep": np.arange(self.load_mw.shape[0])}
        for i in range(self.load_mw.shape[1]):
            columns[f"load_{i}_mw"] = self.load_mw[:, i]
        for g in range(self.gen_mw.shape[1]):
            columns[f"gen_{g}_mw"] = self.gen_mw[:, g]
        return pd.DataFrame(columns)

    @classmethod
    def from_frame(cls, chronic_id: str, frame: pd.DataFrame, n_loads: int, n_gens: int) -> "Chronic":
        expected = ["timestep"] + [f"load_{i}_mw" for i in range(n_loads)] + [f"gen_{g}_mw" for g in range(n_gens)]
        if list(frame.columns) != expected:
            raise ConfigError(f"chronic {chronic_id}: columns {list(frame.columns)} != {expected}")
        if not np.array_equal(frame["timestep"].to_numpy(), np.arange(len(frame))):
            raise ConfigError(f"chronic {chronic_id}: timestep column must be 0..{len(frame) - 1}")
        return cls(
            id=chronic_id,
            load_mw=frame[expected[1:1 + n_loads]].to_numpy(dtype=np.float64),
            gen_mw=frame[expected[1 + n_loads:]].to_numpy(dtype=np.float64),
        )


@dataclass
class EpisodeSet:
    chronics: Dict[str, Chronic]
    splits: Dict[str, List[str]]
    offsets: Dict[str, List[int]]
    sub_episode_length: int = SUB_EPISODE_LENGTH
    seed: Optional[int] = None
    profile: Optional[ChronicProfile] = None

    def chronics_in(self, split: str) -> List[Chronic]:
        return [self.chronics[cid] for cid in self.splits[split]]

    def sub_episodes(self, split: str) -> List[Tuple[Chronic, int]]:
        """(chronic, offset) pairs for every window of every chronic in ``split``."""
        return [(chronic, offset) for chronic in self.chronics_in(split) for offset in self.offsets[chronic.id]]


def sub_episode_offsets(length: int, window: int, count: int) -> List[int]:
    """Evenly spaced, overlapping window starts covering [0, length]."""
    if window > length:
        raise ChronicProfileError(f"sub-episode length {window} exceeds chronic length {length}")
    if count == 1:
        return [0]
    return [int(round(x)) for x in np.linspace(0, length - window, count)]


def _coerce_profile(profile: Union[ChronicProfile, Dict[str, Any], None]) -> ChronicProfile:
    if profile is None:
        return ChronicProfile()
    if isinstance(profile, ChronicProfile):
        return profile
    try:
        return ChronicProfile(**profile)
    except ValidationError as e:
        raise ChronicProfileError(f"invalid chronic profile: {e}") from e


def _dispatch(total: np.ndarray, p_max: np.ndarray, steps: np.ndarray, swing: float) -> np.ndarray:
    n_gens = len(p_max)
    phase = 2 * np.pi * steps[:, None] / STEPS_PER_DAY + 2 * np.pi * np.arange(n_gens)[None, :] / max(n_gens, 1)
    weights = p_max[None, :] * (1.0 + swing * np.sin(phase + 1.0))
    gen = total[:, None] * weights / weights.sum(axis=1, keepdims=True)
    for _ in range(n_gens):
        excess = np.clip(gen - p_max[None, :], 0.0, None).sum(axis=1)
        if not np.any(excess > 0):
            break
        gen = np.minimum(gen, p_max[None, :])
        headroom = p_max[None, :] - gen
        gen += headroom * (excess / np.maximum(headroom.sum(axis=1), 1e-12))[:, None]
    return gen


def generate_chronic(
    spec: GridSpec,
    chronic_id: str,
    rng: np.random.Generator,
    length: int = FULL_EPISODE_LENGTH,
    profile: Optional[ChronicProfile] = None,
) -> Chronic:
    profile = profile or ChronicProfile()
    n_loads = len(spec.loads)
    weights = np.asarray(profile.load_weights if profile.load_weights is not None else np.ones(n_loads), dtype=np.float64)
    if len(weights) != n_loads:
        raise ChronicProfileError(f"load_weights has {len(weights)} entries, grid has {n_loads} loads")
    base = profile.base_total_mw * weights / weights.sum()

    steps = np.arange(length + 1)
    level = 1.0 + profile.level_jitter * rng.uniform(-1.0, 1.0)
    start_phase = rng.uniform(0.0, 2 * np.pi)
    load_phase = start_phase + 0.3 * np.arange(n_loads)
    cycle = 1.0 + profile.daily_amplitude * np.sin(2 * np.pi * steps[:, None] / STEPS_PER_DAY + load_phase[None, :])
    load = level * base[None, :] * cycle

    if profile.noise_scale > 0:
        shocks = rng.normal(0.0, profile.noise_scale, size=(length + 1, n_loads))
        noise = np.zeros_like(shocks)
        for t in range(1, length + 1):
            noise[t] = profile.noise_persistence * noise[t - 1] + shocks[t]
        load *= 1.0 + noise

    if profile.stress_event_rate > 0 and profile.stress_magnitude > 0:
        days = length / STEPS_PER_DAY
        duration = profile.stress_duration_steps
        bump = np.sin(np.pi * np.arange(duration) / duration)
        for i in range(n_loads):
            for _ in range(rng.poisson(profile.stress_event_rate * days)):
                start = int(rng.integers(0, length + 1))
                height = profile.stress_magnitude * rng.uniform(0.5, 1.0)
                stop = min(start + duration, length + 1)
                load[start:stop, i] *= 1.0 + height * bump[: stop - start]

    load = np.clip(load, 0.0, None)
    capacity = profile.capacity_margin * spec.p_max.sum()
    total = load.sum(axis=1)
    over = total > capacity
    load[over] *= (capacity / total[over])[:, None]
    total = load.sum(axis=1)

    gen = _dispatch(total, spec.p_max, steps, profile.dispatch_swing)
    chronic = Chronic(id=chronic_id, load_mw=load, gen_mw=gen)
    chronic.check_supply(profile.max_loss_fraction)
    return chronic


def generate_chronics(
    spec: GridSpec,
    seed: int,
    count: int = 20,
    length: int = FULL_EPISODE_LENGTH,
    profile: Union[ChronicProfile, Dict[str, Any], None] = None,
    sub_episode_length: int = SUB_EPISODE_LENGTH,
    sub_episodes_per_chronic: int = SUB_EPISODES_PER_CHRONIC,
) -> EpisodeSet:
    """Deterministic (in seed) episode set: count - 2 train, 1 test, 1 validation."""
    profile = _coerce_profile(profile)
    if count < 3:
        raise ChronicProfileError(f"need at least 3 chronics for a train/test/validation split, got {count}")

    chronics: Dict[str, Chronic] = {}
    for index in range(count):
        chronic_id = f"chronic_{index:02d}"
        rng = seeding.stream(seed, seeding.CHRONICS, index)
        chronics[chronic_id] = generate_chronic(spec, chronic_id, rng, length, profile)

    ids = list(chronics)
    offsets = sub_episode_offsets(length, sub_episode_length, sub_episodes_per_chronic)
    episode_set = EpisodeSet(
        chronics=chronics,
        splits={"train": ids[:-2], "test": [ids[-2]], "validation": [ids[-1]]},
        offsets={cid: list(offsets) for cid in ids},
        sub_episode_length=sub_episode_length,
        seed=seed,
        profile=profile,
    )
    logger.info(
        "chronics_generated",
        seed=seed,
        count=count,
        length=length,
        stress_event_rate=profile.stress_event_rate,
    )
    return episode_set


class ChronicEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    file: str
    split: Literal["train", "test", "validation"]
    offsets: List[int]


class EpisodeSetManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = EPISODE_SET_SCHEMA_VERSION
    seed: Optional[int] = None
    sub_episode_length: int = Field(gt=0)
    profile: Optional[ChronicProfile] = None
    chronics: List[ChronicEntry]


def write_episode_set(episode_set: EpisodeSet, directory: Union[str, Path]) -> Path:
    """Write one CSV per chronic plus ``manifest.json``; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    split_of = {cid: split for split, ids in episode_set.splits.items() for cid in ids}
    entries = []
    for cid, chronic in episode_set.chronics.items():
        filename = f"{cid}.csv"
        chronic.to_frame().to_csv(directory / filename, index=False, float_format="%.17g")
        entries.append(ChronicEntry(id=cid, file=filename, split=split_of[cid], offsets=episode_set.offsets[cid]))
    manifest = EpisodeSetManifest(
        seed=episode_set.seed,
        sub_episode_length=episode_set.sub_episode_length,
        profile=episode_set.profile,
        chronics=entries,
    )
    manifest_path = directory / "manifest.json"
    manifest_path.write_text(json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("episode_set_written", directory=str(directory), chronics=len(entries))
    return manifest_path


def read_episode_set(directory: Union[str, Path], spec: GridSpec) -> EpisodeSet:
    directory = Path(directory)
    manifest_path = directory / "manifest.json" if directory.is_dir() else directory
    try:
        manifest = EpisodeSetManifest.model_validate_json(manifest_path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise ConfigError(f"invalid episode set manifest {manifest_path}: {e}") from e

    chronics: Dict[str, Chronic] = {}
    splits: Dict[str, List[str]] = {split: [] for split in SPLITS}
    max_loss = (manifest.profile or ChronicProfile()).max_loss_fraction
    offsets: Dict[str, List[int]] = {}
    for entry in manifest.chronics:
        frame = pd.read_csv(manifest_path.parent / entry.file, header=0, float_precision="round_trip")
        chronic = Chronic.from_frame(entry.id, frame, len(spec.loads), len(spec.generators))
        try:
            chronic.check_supply(max_loss)
        except ChronicProfileError as e:
            raise ConfigError(str(e)) from e
        for offset in entry.offsets:
            if offset < 0 or offset + manifest.sub_episode_length > chronic.length:
                raise ConfigError(f"chronic {entry.id}: window at {offset} exceeds [0, {chronic.length}]")
        chronics[entry.id] = chronic
        splits[entry.split].append(entry.id)
        offsets[entry.id] = list(entry.offsets)
    return EpisodeSet(
        chronics=chronics,
        splits=splits,
        offsets=offsets,
        sub_episode_length=manifest.sub_episode_length,
        seed=manifest.seed,
        profile=manifest.profile,
    )
