"""
Command-line entry point.

    python -m src.harness gen-chronics --config exp.toml --out data/chronics
    python -m src.harness baseline     --config exp.toml --out data/baseline.json
    python -m src.harness train        --config exp.toml [--set run.budget=2000]
    python -m src.harness eval         --config exp.toml --checkpoint runs/x/seed_0/checkpoint
    python -m src.harness score        --trajectories runs/x/seed_0/trajectories --baseline data/baseline.json
    python -m src.harness compare      runs/dsacd_capa runs/isacd_capa --out runs/comparison.csv

Exit codes: 0 success, 1 unexpected error or incomplete seeds, 2 usage,
3 missing input file, 4 schema violation, 5 seed/budget mismatch,
6 baseline cache missing, 7 no trajectories to score.
"""
import argparse
import sys
from pathlib import Path
from typing import Callable, List, Optional

from pydantic import ValidationError

from src.env.baseline import BaselineCache, run_baseline
from src.env.chronics import write_episode_set
from src.exceptions import (
    BaselineMissingError,
    CheckpointError,
    ChronicProfileError,
    ConfigError,
    EmptyTrajectoryError,
    GridSpecError,
    MisalignedLogsError,
    SeedBudgetError,
)
from src.harness.config import ExperimentConfig, load_experiment_config
from src.harness.experiment import load_inputs, run_experiment
from src.harness.report import FINAL_WINDOW, compare_runs
from src.marl.evaluation import evaluate_team, score_trajectories, write_trajectories
from src.marl.training import build_controller, build_team
from src.monitoring.logger import get_logger, log_error, setup_logging

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_SCHEMA = 4
EXIT_SEED_BUDGET = 5
EXIT_BASELINE_MISSING = 6
EXIT_EMPTY_TRAJECTORIES = 7

# Checked in order: SeedBudgetError must precede its base ConfigError.
EXIT_CODES = (
    (FileNotFoundError, EXIT_MISSING_FILE),
    (SeedBudgetError, EXIT_SEED_BUDGET),
    (BaselineMissingError, EXIT_BASELINE_MISSING),
    (EmptyTrajectoryError, EXIT_EMPTY_TRAJECTORIES),
    (ConfigError, EXIT_SCHEMA),
    (GridSpecError, EXIT_SCHEMA),
    (ChronicProfileError, EXIT_SCHEMA),
    (CheckpointError, EXIT_SCHEMA),
    (MisalignedLogsError, EXIT_SCHEMA),
    (ValidationError, EXIT_SCHEMA),
)


def exit_code_for(error: BaseException) -> int:
    for error_type, code in EXIT_CODES:
        if isinstance(error, error_type):
            return code
    return EXIT_ERROR


def _config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = list(args.set or [])
    if getattr(args, "seeds", None):
        overrides.append(f"run.seeds=[{', '.join(str(s) for s in args.seeds)}]")
    if getattr(args, "workers", None):
        overrides.append(f"run.workers={args.workers}")
    return load_experiment_config(args.config, overrides)


def cmd_gen_chronics(args: argparse.Namespace) -> int:
    config = _config(args)
    _, episode_set = load_inputs(config.model_copy(update={"env": config.env.model_copy(update={"chronics_dir": None})}))
    out = args.out or config.env.chronics_dir
    if out is None:
        raise ConfigError("gen-chronics needs --out or [env] chronics_dir")
    manifest = write_episode_set(episode_set, out)
    print(manifest)
    return EXIT_OK


def cmd_baseline(args: argparse.Namespace) -> int:
    config = _config(args)
    spec, episode_set = load_inputs(config)
    cache = run_baseline(
        spec, episode_set, splits=args.splits, env_config=config.env.env_config(episode_set.sub_episode_length)
    )
    out = args.out or config.env.baseline_file or config.output_dir() / "baseline.json"
    print(cache.save(out))
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = _config(args)
    _, results = run_experiment(config, args.output)
    incomplete = [r.seed for r in results if not r.completed]
    if incomplete:
        logger.error("seeds_incomplete", seeds=incomplete, budget=config.run.budget)
        return EXIT_ERROR
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    config = _config(args)
    checkpoint = Path(args.checkpoint)
    if not checkpoint.is_dir():
        raise FileNotFoundError(f"checkpoint directory {checkpoint} does not exist")
    baseline_path = args.baseline or config.env.baseline_file
    if baseline_path is None:
        raise BaselineMissingError("eval needs --baseline or [env] baseline_file")
    baseline = BaselineCache.load(baseline_path)

    spec, episode_set = load_inputs(config)
    team = build_team(spec, config.hierarchy, config.hyperparams(), args.seed)
    team.load(checkpoint)
    team.set_training(False)
    controller = build_controller(
        spec, team, config.hierarchy, args.seed, config.env.env_config(episode_set.sub_episode_length), phase="eval", stream_key=1
    )
    evaluation = evaluate_team(controller, episode_set, args.split, baseline, config.hierarchy.strategy.value, args.seed)
    if args.out is not None:
        write_trajectories(evaluation.trajectories, Path(args.out) / f"{args.split}.csv")
    logger.info("evaluation_finished", split=args.split, mean_score=evaluation.mean_score, episodes=len(evaluation.scores))
    print(f"{evaluation.mean_score:.6f}")
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    baseline = BaselineCache.load(args.baseline)
    scores = score_trajectories(args.trajectories, baseline)
    if args.out is not None:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        scores.to_csv(args.out, index=False, float_format="%.17g")
    print(scores.to_string(index=False))
    print(f"mean {scores['score'].mean():.6f}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    frame = compare_runs(args.runs, window=args.window)
    if args.out is not None:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(args.out, index=False, float_format="%.17g")
    print(frame.to_string(index=False))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m src.harness", description="Hierarchical multi-agent grid topology control")
    parser.add_argument("--log-level", default=None, help="override LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p: argparse.ArgumentParser) -> argparse.ArgumentParser:
        p.add_argument("--config", type=Path, default=None, help="experiment TOML file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config value")
        return p

    p = with_config(sub.add_parser("gen-chronics", help="generate and write an episode set"))
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(handler=cmd_gen_chronics)

    p = with_config(sub.add_parser("baseline", help="run and cache the do-nothing agent"))
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--splits", nargs="+", default=["test", "validation"], choices=["train", "test", "validation"])
    p.set_defaults(handler=cmd_baseline)

    p = with_config(sub.add_parser("train", help="train one strategy over the configured seeds"))
    p.add_argument("--seeds", type=int, nargs="+", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output", type=Path, default=None)
    p.set_defaults(handler=cmd_train)

    p = with_config(sub.add_parser("eval", help="score a checkpoint on test or validation sub-episodes"))
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--baseline", type=Path, default=None)
    p.add_argument("--split", choices=["test", "validation"], default="test")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None, help="directory for the trajectory file")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("score", help="recompute scores from stored trajectories")
    p.add_argument("--trajectories", type=Path, required=True)
    p.add_argument("--baseline", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(handler=cmd_score)

    p = sub.add_parser("compare", help="stability of finished runs side by side")
    p.add_argument("runs", type=Path, nargs="+", help="run directories holding curves.csv")
    p.add_argument("--window", type=int, default=FINAL_WINDOW, help="final interactions the variance is taken over")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(handler=cmd_compare)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    setup_logging(args.log_level)
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except Exception as e:
        code = exit_code_for(e)
        logger.error("command_failed", **log_error(e, command=args.command, exit_code=code))
        return code


if __name__ == "__main__":
    sys.exit(main())
