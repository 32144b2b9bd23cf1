"""
Greedy evaluation of a team and trajectory storage.
"""
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd

from src.env.baseline import BaselineCache
from src.env.chronics import EpisodeSet
from src.env.scoring import episode_cost
from src.exceptions import BaselineMissingError, ConfigError, EmptyTrajectoryError
from src.marl.hierarchy import HierarchicalController
from src.monitoring.logger import get_logger
from src.monitoring.metrics import track_evaluation

logger = get_logger(__name__)

TRAJECTORY_COLUMNS = ["chronic_id", "offset", "length", "survived", "cost", "cause", "interactions"]


@dataclass(frozen=True)
class EpisodeTrajectory:
    chronic_id: str
    offset: int
    length: int
    survived: int
    cost: float
    cause: str = ""
    interactions: int = 0


@dataclass
class EvaluationResult:
    trajectories: List[EpisodeTrajectory]
    scores: List[float]

    @property
    def mean_score(self) -> float:
        return float(np.mean(self.scores)) if self.scores else float("nan")


def evaluate_team(
    controller: HierarchicalController,
    episode_set: EpisodeSet,
    split: str,
    baseline: BaselineCache,
    strategy: str = "",
    seed: int = 0,
) -> EvaluationResult:
    """Play every sub-episode of ``split`` greedily and score it against the baseline."""
    started = time.perf_counter()
    team = controller.team
    was_training = getattr(team, "training", False)
    if hasattr(team, "set_training"):
        team.set_training(False)
    trajectories, scores = [], []
    try:
        for chronic, offset in episode_set.sub_episodes(split):
            result = controller.run_episode(
                chronic, offset, length=episode_set.sub_episode_length, training=False, greedy=True
            )
            trajectory = EpisodeTrajectory(
                chronic_id=chronic.id,
                offset=offset,
                length=result.length,
                survived=result.survived,
                cost=episode_cost(result.rewards),
                cause=result.cause.value if result.cause is not None else "",
                interactions=result.interactions,
            )
            trajectories.append(trajectory)
            scores.append(
                baseline.score(trajectory.chronic_id, offset, trajectory.survived, trajectory.cost, trajectory.length)
            )
    finally:
        if hasattr(team, "set_training"):
            team.set_training(was_training)

    evaluation = EvaluationResult(trajectories, scores)
    track_evaluation(strategy, seed, evaluation.mean_score, time.perf_counter() - started)
    return evaluation


def write_trajectories(trajectories: List[EpisodeTrajectory], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([asdict(t) for t in trajectories], columns=TRAJECTORY_COLUMNS)
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


def read_trajectories(path: Union[str, Path]) -> List[EpisodeTrajectory]:
    frame = pd.read_csv(
        path, keep_default_na=False, dtype={"chronic_id": str, "cause": str}, float_precision="round_trip"
    )
    missing = set(TRAJECTORY_COLUMNS) - set(frame.columns)
    if missing:
        raise ConfigError(f"trajectory file {path} lacks columns {sorted(missing)}")
    return [
        EpisodeTrajectory(
            chronic_id=row.chronic_id,
            offset=int(row.offset),
            length=int(row.length),
            survived=int(row.survived),
            cost=float(row.cost),
            cause=str(row.cause),
            interactions=int(row.interactions),
        )
        for row in frame.itertuples(index=False)
    ]


def score_trajectories(directory: Union[str, Path], baseline: Optional[BaselineCache]) -> pd.DataFrame:
    """Score every stored trajectory under ``directory``; one row per sub-episode."""
    if baseline is None:
        raise BaselineMissingError("scoring needs a do-nothing baseline cache")
    directory = Path(directory)
    files = sorted(directory.glob("*.csv")) if directory.is_dir() else []
    rows = []
    for path in files:
        for t in read_trajectories(path):
            rows.append(
                {
                    "file": path.name,
                    "chronic_id": t.chronic_id,
                    "offset": t.offset,
                    "survived": t.survived,
                    "length": t.length,
                    "score": baseline.score(t.chronic_id, t.offset, t.survived, t.cost, t.length),
                }
            )
    if not rows:
        raise EmptyTrajectoryError(f"no trajectories found under {directory}")
    logger.info("trajectories_scored", directory=str(directory), episodes=len(rows))
    return pd.DataFrame(rows)
