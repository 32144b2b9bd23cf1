"""
Aggregation of per-seed score logs into mean and standard-error curves,
and side-by-side stability summaries of finished runs.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Union

import numpy as np
import pandas as pd

from src.exceptions import MisalignedLogsError

CURVES_FILE = "curves.csv"
METADATA_FILE = "run_metadata.json"
COMPARISON_FILE = "comparison.csv"

# Interactions at the end of a run over which score variance is measured.
FINAL_WINDOW = 2000

COMPARISON_COLUMNS = [
    "run",
    "strategy",
    "mid_policy",
    "preset",
    "seeds",
    "interactions",
    "final_mean_score",
    "final_stderr",
    "final_window_variance",
    "eval_std",
    "seeds_positive",
]


def _sample_spread(values: np.ndarray, variance: bool) -> float:
    if len(values) < 2:
        return 0.0
    return float(values.var(ddof=1) if variance else values.std(ddof=1))


def score_stability(per_seed: pd.DataFrame, window: int = FINAL_WINDOW) -> Dict[str, Any]:
    """
    Stability of a run's learning curves. ``per_seed`` is indexed by
    interaction with one column per seed.

    final_window_variance: sample variance of each seed's score over the
    evaluation points later than ``last - window``, averaged over seeds.
    eval_std: sample standard deviation of each seed's score across all
    evaluation points, averaged over seeds.
    seeds_positive: seeds whose score at the last evaluation point is above 0.
    """
    if per_seed.empty:
        raise MisalignedLogsError("no evaluation points to summarize")
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    interactions = per_seed.index.to_numpy()
    values = per_seed.to_numpy(dtype=np.float64)
    tail = interactions > interactions[-1] - window
    return {
        "window": int(window),
        "final_window_points": int(tail.sum()),
        "final_window_variance": float(np.mean([_sample_spread(values[tail, j], True) for j in range(values.shape[1])])),
        "eval_std": float(np.mean([_sample_spread(values[:, j], False) for j in range(values.shape[1])])),
        "seeds_positive": int((values[-1] > 0).sum()),
    }


@dataclass
class RunReport:
    strategy: str
    seeds: List[int]
    interactions: np.ndarray
    per_seed: pd.DataFrame
    mean: np.ndarray
    stderr: np.ndarray
    checkpoint_paths: Dict[int, List[str]] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def curves_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            {
                "interaction": self.interactions,
                "mean_score": self.mean,
                "stderr": self.stderr,
                "min_score": self.per_seed.min(axis=1).to_numpy(),
                "max_score": self.per_seed.max(axis=1).to_numpy(),
            }
        )
        for seed in self.seeds:
            frame[f"seed_{seed}"] = self.per_seed[seed].to_numpy()
        frame["strategy"] = self.strategy
        return frame

    def stability(self, window: int = FINAL_WINDOW) -> Dict[str, Any]:
        return score_stability(self.per_seed, window)

    def write(self, directory: Union[str, Path]) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.curves_frame().to_csv(directory / CURVES_FILE, index=False, float_format="%.17g")
        document = {
            "strategy": self.strategy,
            "seeds": self.seeds,
            "checkpoints": {str(seed): paths for seed, paths in self.checkpoint_paths.items()},
            "final_mean_score": float(self.mean[-1]) if len(self.mean) else None,
            "stability": self.stability() if len(self.mean) else None,
            **self.metadata,
        }
        path = directory / METADATA_FILE
        path.write_text(json.dumps(document, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
        return path


def read_score_log(path: Union[str, Path]) -> pd.DataFrame:
    frame = pd.read_csv(path, float_precision="round_trip")
    if "interaction" not in frame.columns or "mean_score" not in frame.columns:
        raise MisalignedLogsError(f"{path} is not a score log (needs interaction and mean_score columns)")
    return frame


def aggregate_report(logs: Mapping[int, pd.DataFrame], strategy: str = "") -> RunReport:
    """
    Mean and standard error sigma / sqrt(n) of the mean score at every
    evaluation point. sigma is the sample standard deviation over seeds;
    a single seed has zero standard error.
    """
    if not logs:
        raise MisalignedLogsError("no seed logs to aggregate")
    seeds = list(logs)
    reference = logs[seeds[0]]["interaction"].to_numpy()
    columns = {}
    for seed in seeds:
        points = logs[seed]["interaction"].to_numpy()
        if points.shape != reference.shape or not np.array_equal(points, reference):
            raise MisalignedLogsError(
                f"seed {seed} evaluated at {len(points)} points that differ from seed {seeds[0]} ({len(reference)})"
            )
        columns[seed] = logs[seed]["mean_score"].to_numpy(dtype=np.float64)

    per_seed = pd.DataFrame(columns, index=reference)
    values = per_seed.to_numpy()
    n = len(seeds)
    mean = values.mean(axis=1)
    if n > 1:
        stderr = values.std(axis=1, ddof=1) / np.sqrt(n)
    else:
        stderr = np.zeros(len(reference))
    return RunReport(
        strategy=strategy,
        seeds=seeds,
        interactions=reference,
        per_seed=per_seed,
        mean=mean,
        stderr=stderr,
    )


def summarize_run(directory: Union[str, Path], window: int = FINAL_WINDOW) -> Dict[str, Any]:
    """One comparison row from a run directory written by ``RunReport.write``."""
    directory = Path(directory)
    curves_path = directory / CURVES_FILE
    if not curves_path.exists():
        raise FileNotFoundError(f"{curves_path} does not exist")
    curves = read_score_log(curves_path)
    seed_columns = [c for c in curves.columns if c.startswith("seed_")]
    if not seed_columns or curves.empty:
        raise MisalignedLogsError(f"{curves_path} has no per-seed score columns")

    metadata_path = directory / METADATA_FILE
    metadata = json.loads(metadata_path.read_text(encoding="utf-8")) if metadata_path.exists() else {}
    hierarchy = metadata.get("config", {}).get("hierarchy", {})
    per_seed = curves.set_index("interaction")[seed_columns]
    stability = score_stability(per_seed, window)
    return {
        "run": directory.name,
        "strategy": metadata.get("strategy") or hierarchy.get("strategy", ""),
        "mid_policy": hierarchy.get("mid_policy", ""),
        "preset": metadata.get("hyperparams", {}).get("preset", ""),
        "seeds": len(seed_columns),
        "interactions": int(curves["interaction"].iloc[-1]),
        "final_mean_score": float(curves["mean_score"].iloc[-1]),
        "final_stderr": float(curves["stderr"].iloc[-1]) if "stderr" in curves.columns else 0.0,
        "final_window_variance": stability["final_window_variance"],
        "eval_std": stability["eval_std"],
        "seeds_positive": stability["seeds_positive"],
    }


def compare_runs(directories: Iterable[Union[str, Path]], window: int = FINAL_WINDOW) -> pd.DataFrame:
    """
    Side-by-side stability of several runs, one row per run directory in the
    order given. Runs may differ in strategy, mid-level ordering or preset.
    """
    rows = [summarize_run(directory, window) for directory in directories]
    if not rows:
        raise MisalignedLogsError("no runs to compare")
    return pd.DataFrame(rows, columns=COMPARISON_COLUMNS)
