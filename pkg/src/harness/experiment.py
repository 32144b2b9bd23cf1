"""
Experiment orchestration: inputs, one training run per seed, aggregation.

Seeds share nothing at runtime, so with ``[run] workers > 1`` they run in a
process pool. Counter and gauge changes made in a pool process are merged
back into this process; histograms are not. Every output of a seed lives
under ``<output>/seed_<n>/``.
"""
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import pandas as pd

from src.env.baseline import BaselineCache, run_baseline
from src.env.chronics import EpisodeSet, generate_chronics, read_episode_set
from src.grid.model import BUNDLED_CASE5, GridSpec, load_grid
from src.harness.config import ExperimentConfig
from src.harness.report import RunReport, aggregate_report
from src.marl.training import run_marl_training
from src.monitoring.logger import get_logger, log_error
from src.monitoring.metrics import get_metrics, merge_metrics, metrics_delta, metrics_snapshot

logger = get_logger(__name__)

BASELINE_FILE = "baseline.json"
METRICS_FILE = "metrics.prom"


@dataclass
class SeedResult:
    seed: int
    interactions: int
    completed: bool
    scores: pd.DataFrame
    checkpoint_paths: List[str] = field(default_factory=list)
    duration_s: float = 0.0


def load_inputs(config: ExperimentConfig) -> Tuple[GridSpec, EpisodeSet]:
    spec = load_grid(config.grid_file() or BUNDLED_CASE5)
    chronics_dir = config.env.chronics_dir
    if chronics_dir is not None and (Path(chronics_dir) / "manifest.json").exists():
        episode_set = read_episode_set(chronics_dir, spec)
    else:
        episode_set = generate_chronics(
            spec,
            config.env.chronic_seed,
            count=config.env.chronic_count,
            length=config.env.chronic_length,
            profile=config.env.chronic_profile(),
            sub_episode_length=config.env.sub_episode_length,
        )
    return spec, episode_set


def load_or_run_baseline(
    config: ExperimentConfig, spec: GridSpec, episode_set: EpisodeSet, output_dir: Path
) -> BaselineCache:
    path = config.env.baseline_file
    if path is not None and Path(path).exists():
        return BaselineCache.load(path)
    cache = run_baseline(spec, episode_set, env_config=config.env.env_config(episode_set.sub_episode_length))
    cache.save(path or output_dir / BASELINE_FILE)
    return cache


def train_seed(
    config: ExperimentConfig,
    spec: GridSpec,
    episode_set: EpisodeSet,
    baseline: BaselineCache,
    seed: int,
    output_dir: Path,
) -> SeedResult:
    started = time.perf_counter()
    run = run_marl_training(
        spec,
        episode_set,
        baseline,
        config.hierarchy,
        config.hyperparams(),
        seed,
        budget=config.run.budget,
        eval_period=config.run.eval_period,
        env_config=config.env.env_config(episode_set.sub_episode_length),
        output_dir=output_dir / f"seed_{seed}",
        eval_split=config.run.eval_split,
        progress=config.run.progress and config.run.workers == 1,
    )
    return SeedResult(
        seed=seed,
        interactions=run.interactions,
        completed=run.completed,
        scores=run.score_frame(),
        checkpoint_paths=[str(p) for p in run.checkpoint_paths],
        duration_s=time.perf_counter() - started,
    )


def train_seed_in_worker(*args) -> Tuple[SeedResult, Dict]:
    """train_seed inside a pool process; also returns the metric changes it made there."""
    before = metrics_snapshot()
    result = train_seed(*args)
    return result, metrics_delta(before, metrics_snapshot())


def run_experiment(config: ExperimentConfig, output_dir: Optional[Path] = None) -> Tuple[RunReport, List[SeedResult]]:
    output_dir = Path(output_dir or config.output_dir())
    output_dir.mkdir(parents=True, exist_ok=True)
    config.check_schedule()
    hp = config.hyperparams()

    spec, episode_set = load_inputs(config)
    baseline = load_or_run_baseline(config, spec, episode_set, output_dir)
    logger.info(
        "experiment_started",
        strategy=config.hierarchy.strategy.value,
        seeds=config.run.seeds,
        workers=config.run.workers,
        output_dir=str(output_dir),
    )

    started = time.perf_counter()
    results: Dict[int, SeedResult] = {}
    if config.run.workers > 1:
        with ProcessPoolExecutor(max_workers=config.run.workers) as pool:
            futures = {
                seed: pool.submit(train_seed_in_worker, config, spec, episode_set, baseline, seed, output_dir)
                for seed in config.run.seeds
            }
            for seed, future in futures.items():
                try:
                    results[seed], delta = future.result()
                    merge_metrics(delta)
                except Exception as e:
                    logger.error("seed_failed", **log_error(e, seed=seed))
                    raise
    else:
        for seed in config.run.seeds:
            results[seed] = train_seed(config, spec, episode_set, baseline, seed, output_dir)

    ordered = [results[seed] for seed in config.run.seeds]
    report = aggregate_report({r.seed: r.scores for r in ordered}, strategy=config.hierarchy.strategy.value)
    report.checkpoint_paths = {r.seed: r.checkpoint_paths for r in ordered}
    report.metadata = {
        "hyperparams": hp.model_dump(mode="json"),
        "config": config.model_dump(mode="json"),
        "interactions": {str(r.seed): r.interactions for r in ordered},
        "completed": all(r.completed for r in ordered),
        "wall_clock_s": {"total": time.perf_counter() - started, **{str(r.seed): r.duration_s for r in ordered}},
        "python": platform.python_version(),
    }
    report.write(output_dir)
    (output_dir / METRICS_FILE).write_bytes(get_metrics())
    logger.info(
        "experiment_finished",
        strategy=report.strategy,
        completed=report.metadata["completed"],
        final_mean_score=float(report.mean[-1]) if len(report.mean) else None,
    )
    return report, ordered
