"""
Training loop over counted low-level interactions.

Training sub-episodes are replayed in a seeded order until the interaction
budget is spent exactly. Every ``eval_period`` interactions the team is
evaluated greedily on the test sub-episodes with a separate environment, so
evaluation never disturbs the training episode in flight.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
from tqdm import tqdm

from src import seeding
from src.agents.hyperparams import HyperParams
from src.env.baseline import BaselineCache
from src.env.chronics import EpisodeSet
from src.env.environment import EnvConfig, GridEnvironment
from src.exceptions import SeedBudgetError
from src.grid.model import GridSpec
from src.marl.actions import SubstationAgentSpec, build_agent_specs, union_agent_spec
from src.marl.evaluation import EvaluationResult, evaluate_team, write_trajectories
from src.marl.gating import MidPolicyFactory
from src.marl.hierarchy import HierarchicalController, HierarchyConfig
from src.marl.team import AgentTeam
from src.monitoring.logger import get_logger, log_run
from src.monitoring.metrics import track_interaction
from src.monitoring.training_log import UpdateMetricsLog
from src.nn.graph import feature_width

logger = get_logger(__name__)

DEFAULT_BUDGET = 10_000
DEFAULT_EVAL_PERIOD = 100

SCORES_FILE = "scores.csv"
UPDATES_FILE = "updates.csv"
CHECKPOINT_DIR = "checkpoint"
TRAJECTORY_DIR = "trajectories"


@dataclass
class TrainingRun:
    team: AgentTeam
    strategy: str
    seed: int
    budget: int
    interactions: int = 0
    score_rows: List[Dict[str, float]] = field(default_factory=list)
    final_evaluation: Optional[EvaluationResult] = None
    checkpoint_paths: List[Path] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.interactions == self.budget

    def score_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.score_rows)


def team_agent_specs(spec: GridSpec, config: HierarchyConfig) -> List[SubstationAgentSpec]:
    agents = build_agent_specs(spec, config.min_substation_size)
    if config.strategy.is_single_agent:
        return [union_agent_spec(agents)]
    return agents


def build_team(
    spec: GridSpec,
    config: HierarchyConfig,
    hp: HyperParams,
    seed: int,
    forced_identity: bool = False,
) -> AgentTeam:
    return AgentTeam(
        config.strategy,
        team_agent_specs(spec, config),
        feature_width(spec),
        hp,
        seed,
        laplace_prior=config.laplace_prior,
        forced_identity=forced_identity,
    )


def build_controller(
    spec: GridSpec,
    team: AgentTeam,
    config: HierarchyConfig,
    seed: int,
    env_config: Optional[EnvConfig] = None,
    phase: str = "train",
    stream_key: int = 0,
) -> HierarchicalController:
    """Controller with its own env; ``stream_key`` separates the random streams of training and evaluation."""
    env = GridEnvironment(spec, env_config, phase=phase)
    mid_policy = MidPolicyFactory.create_policy(
        config.mid_policy,
        spec,
        team.agent_specs,
        rng=seeding.stream(seed, seeding.MID_POLICY, stream_key),
    )
    return HierarchicalController(
        env,
        team.agent_specs,
        mid_policy,
        team,
        config,
        seeding.stream(seed, seeding.ACTION_SAMPLING, stream_key),
    )


def check_schedule(budget: int, eval_period: int) -> None:
    if budget <= 0:
        raise SeedBudgetError(f"interaction budget must be positive, got {budget}")
    if eval_period <= 0 or budget % eval_period:
        raise SeedBudgetError(f"eval period {eval_period} must divide the interaction budget {budget}")


def score_row(interaction: int, evaluation: EvaluationResult, strategy: str, seed: int) -> Dict[str, float]:
    row = {"interaction": interaction, "mean_score": evaluation.mean_score}
    row.update({f"score_{i}": score for i, score in enumerate(evaluation.scores)})
    row.update({"strategy": strategy, "seed": seed})
    return row


def run_marl_training(
    spec: GridSpec,
    episode_set: EpisodeSet,
    baseline: BaselineCache,
    config: HierarchyConfig,
    hp: HyperParams,
    seed: int,
    budget: int = DEFAULT_BUDGET,
    eval_period: int = DEFAULT_EVAL_PERIOD,
    env_config: Optional[EnvConfig] = None,
    output_dir: Optional[Path] = None,
    forced_identity: bool = False,
    eval_split: str = "test",
    progress: bool = True,
) -> TrainingRun:
    check_schedule(budget, eval_period)
    strategy = config.strategy.value
    context = log_run(strategy, seed, budget=budget, mid_policy=config.mid_policy, preset=hp.preset)
    logger.info("training_started", **context)

    team = build_team(spec, config, hp, seed, forced_identity)
    trainer = build_controller(spec, team, config, seed, env_config, phase="train", stream_key=0)
    evaluator = build_controller(spec, team, config, seed, env_config, phase="eval", stream_key=1)
    run = TrainingRun(team=team, strategy=strategy, seed=seed, budget=budget)

    output_dir = Path(output_dir) if output_dir is not None else None
    updates = UpdateMetricsLog(output_dir / UPDATES_FILE if output_dir is not None else None)
    episodes: Sequence = episode_set.sub_episodes("train")
    order_rng = seeding.stream(seed, seeding.EPISODES)
    bar = tqdm(total=budget, desc=f"{strategy} seed {seed}", unit="int", disable=not progress)

    def after_interaction(agent_id: int, _episode_interactions: int) -> bool:
        run.interactions += 1
        track_interaction(strategy)
        team.after_interaction(agent_id, run.interactions)
        for updated_id, metrics in team.drain_metrics():
            agent = team.agents[updated_id]
            updates.append(run.interactions, agent.name, agent.algorithm.value, metrics)
        bar.update(1)
        if run.interactions % eval_period == 0:
            evaluation = evaluate_team(evaluator, episode_set, eval_split, baseline, strategy, seed)
            run.score_rows.append(score_row(run.interactions, evaluation, strategy, seed))
            run.final_evaluation = evaluation
            bar.set_postfix(score=f"{evaluation.mean_score:.1f}")
        return run.interactions >= budget

    try:
        while run.interactions < budget:
            pass_interactions = run.interactions
            for index in order_rng.permutation(len(episodes)):
                chronic, offset = episodes[index]
                result = trainer.run_episode(
                    chronic,
                    offset,
                    length=episode_set.sub_episode_length,
                    training=True,
                    after_interaction=after_interaction,
                )
                logger.debug(
                    "episode_finished",
                    chronic=chronic.id,
                    offset=offset,
                    survived=result.survived,
                    cause=result.cause.value if result.cause is not None else None,
                    interactions=run.interactions,
                )
                if run.interactions >= budget:
                    break
            if run.interactions == pass_interactions:
                logger.warning("no_interactions_in_pass", episodes=len(episodes), **context)
                break
    finally:
        bar.close()
        updates.flush()

    if output_dir is not None:
        output_dir.mkdir(parents=True, exist_ok=True)
        run.score_frame().to_csv(output_dir / SCORES_FILE, index=False, float_format="%.17g")
        run.checkpoint_paths = team.save(
            output_dir / CHECKPOINT_DIR,
            {"seed": seed, "interactions": run.interactions, "hyperparams": hp.model_dump(mode="json")},
        )
        if run.final_evaluation is not None:
            write_trajectories(run.final_evaluation.trajectories, output_dir / TRAJECTORY_DIR / f"{eval_split}.csv")

    logger.info(
        "training_finished",
        interactions=run.interactions,
        evaluations=len(run.score_rows),
        final_score=run.score_rows[-1]["mean_score"] if run.score_rows else None,
        **context,
    )
    return run
