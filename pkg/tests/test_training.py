"""
Tests for team construction, greedy evaluation and the training loop.
"""
from unittest.mock import patch

import numpy as np
import pytest

from src.agents.buffers import Transition, TransitionBatch
from src.agents.sacd import SACDAgent
from src.agents.update import update_cycle
from src.env.baseline import run_baseline
from src.exceptions import BaselineMissingError, CheckpointError, EmptyTrajectoryError, SeedBudgetError
from src.marl.dependent import dependent_td_residual
from src.marl.evaluation import (
    EpisodeTrajectory,
    evaluate_team,
    read_trajectories,
    score_trajectories,
    write_trajectories,
)
from src.marl.hierarchy import HierarchyConfig, Strategy
from src.marl.training import (
    CHECKPOINT_DIR,
    SCORES_FILE,
    TRAJECTORY_DIR,
    UPDATES_FILE,
    build_controller,
    build_team,
    check_schedule,
    run_marl_training,
)
from src.monitoring.training_log import UpdateMetricsLog


def team_state(team):
    return {
        (agent.name, set_name, name): tensor.data.copy()
        for agent in team.agents
        for set_name, params in agent.parameter_sets().items()
        for name, tensor in params.items()
    }


def assert_same_state(left, right):
    assert left.keys() == right.keys()
    for key in left:
        assert np.array_equal(left[key], right[key]), key


@pytest.fixture
def scoring_baseline(case5, small_episode_set, no_trip_config):
    return run_baseline(case5, small_episode_set, splits=("test",), env_config=no_trip_config)


@pytest.fixture
def unsafe_sacd_hp(tiny_sacd_hp):
    return tiny_sacd_hp.model_copy(update={"rho_thresh": 0.01})


def train(case5, episode_set, baseline, hp, env_config, strategy=Strategy.DSACD, **kwargs):
    return run_marl_training(
        case5,
        episode_set,
        baseline,
        HierarchyConfig(rho_thresh=0.01, strategy=strategy),
        hp,
        seed=kwargs.pop("seed", 3),
        budget=kwargs.pop("budget", 8),
        eval_period=kwargs.pop("eval_period", 4),
        env_config=env_config,
        progress=False,
        **kwargs,
    )


class TestUpdateCycle:
    """Test repeated update cycles on a fixed batch."""

    def test_overfits_one_batch(self, tiny_sacd_hp, observation_graph):
        """Test the critic loss on one pinned batch falls over 50 update cycles."""
        hp = tiny_sacd_hp.model_copy(update={"learning_rate": 1e-2})
        in_dim = observation_graph.features.shape[1]
        agent = SACDAgent("sub_0", in_dim, 4, hp, np.random.default_rng(0), np.random.default_rng(1))
        transitions = [
            Transition(state=observation_graph, action=a, reward=r, next_state=observation_graph, done=True, agent_id=0)
            for a, r in enumerate([1.0, -0.5, 0.3, 0.8])
        ]
        for transition in transitions:
            agent.buffer.add(transition)
        batch = TransitionBatch.collate(transitions)

        losses = []
        with patch.object(agent.buffer, "sample", return_value=batch):
            for _ in range(50):
                metrics = update_cycle(agent, interactions=1, next_values_fn=lambda b: np.zeros(b.size))
                losses.append(metrics["critic_loss"])

        assert agent.updates == 50
        assert losses[-1] < 0.5 * losses[0]
        assert np.mean(losses[-10:]) < np.mean(losses[:10])


class TestTeam:
    """Test agent construction and checkpoints."""

    def test_one_learner_per_substation(self, case5, tiny_sacd_hp):
        """Test the multi-agent strategies build one named agent per substation."""
        team = build_team(case5, HierarchyConfig(strategy=Strategy.ISACD), tiny_sacd_hp, seed=0)
        assert [a.name for a in team.agents] == ["sub_0", "sub_2", "sub_3"]

    def test_single_agent_over_union(self, case5, tiny_sacd_hp):
        """Test the single-agent strategies build one learner over 46 actions."""
        team = build_team(case5, HierarchyConfig(strategy=Strategy.SACD), tiny_sacd_hp, seed=0)
        assert team.n_agents == 1
        assert team.agents[0].n_actions == 46

    def test_ppo_strategies(self, case5, tiny_ppo_hp):
        """Test the PPO strategies build PPO learners."""
        team = build_team(case5, HierarchyConfig(strategy=Strategy.DPPO), tiny_ppo_hp, seed=0)
        assert {a.algorithm.value for a in team.agents} == {"ppo"}

    def test_equal_seeds_equal_weights(self, case5, tiny_sacd_hp):
        """Test initialization depends on the seed only."""
        config = HierarchyConfig(strategy=Strategy.ISACD)
        assert_same_state(
            team_state(build_team(case5, config, tiny_sacd_hp, seed=5)),
            team_state(build_team(case5, config, tiny_sacd_hp, seed=5)),
        )

    def test_save_and_load(self, case5, tiny_sacd_hp, tmp_path):
        """Test a fresh team takes over saved weights and mid-level counts."""
        config = HierarchyConfig(strategy=Strategy.DSACD)
        saved = build_team(case5, config, tiny_sacd_hp, seed=1)
        saved.estimate.update(0, 2).update(1, 0)
        paths = saved.save(tmp_path / "ckpt", {"seed": 1})

        loaded = build_team(case5, config, tiny_sacd_hp, seed=2)
        loaded.load(tmp_path / "ckpt")

        assert [p.name for p in paths] == ["sub_0", "sub_2", "sub_3"]
        assert_same_state(team_state(saved), team_state(loaded))
        assert np.array_equal(loaded.estimate.counts, saved.estimate.counts)

    def test_load_wrong_shape(self, case5, tiny_sacd_hp, tmp_path):
        """Test weights of a different width raise CheckpointError."""
        config = HierarchyConfig(strategy=Strategy.ISACD)
        build_team(case5, config, tiny_sacd_hp, seed=1).save(tmp_path / "ckpt")
        wider = build_team(case5, config, tiny_sacd_hp.model_copy(update={"hidden_dim": 16}), seed=1)
        with pytest.raises(CheckpointError):
            wider.load(tmp_path / "ckpt")

    def test_load_wrong_algorithm(self, case5, tiny_sacd_hp, tiny_ppo_hp, tmp_path):
        """Test SACD weights cannot be loaded into a PPO team."""
        build_team(case5, HierarchyConfig(strategy=Strategy.ISACD), tiny_sacd_hp, seed=1).save(tmp_path / "ckpt")
        ppo = build_team(case5, HierarchyConfig(strategy=Strategy.IPPO), tiny_ppo_hp, seed=1)
        with pytest.raises(CheckpointError):
            ppo.load(tmp_path / "ckpt")


class TestEvaluation:
    """Test greedy evaluation and trajectory scoring."""

    @pytest.fixture
    def idle_evaluation(self, roomy_case5, small_episode_set, no_trip_config, tiny_sacd_hp):
        config = HierarchyConfig(rho_thresh=1.0, strategy=Strategy.ISACD)
        team = build_team(roomy_case5, config, tiny_sacd_hp, seed=0)
        controller = build_controller(roomy_case5, team, config, 0, no_trip_config, phase="eval", stream_key=1)
        baseline = run_baseline(roomy_case5, small_episode_set, splits=("test",), env_config=no_trip_config)
        return team, baseline, evaluate_team(controller, small_episode_set, "test", baseline, "isacd", 0)

    def test_matching_do_nothing_scores_80(self, idle_evaluation):
        """Test a team that never acts on a safe grid ties the baseline on every window."""
        _, _, evaluation = idle_evaluation
        assert evaluation.scores == [80.0, 80.0]
        assert evaluation.mean_score == 80.0
        assert [t.offset for t in evaluation.trajectories] == [0, 20]
        assert all(t.survived == 20 and t.interactions == 0 for t in evaluation.trajectories)

    def test_training_mode_restored(self, idle_evaluation):
        """Test evaluation freezes the team only while it runs."""
        team, _, _ = idle_evaluation
        assert team.training
        assert not team.estimate.frozen

    def test_score_stored_trajectories(self, idle_evaluation, tmp_path):
        """Test trajectories written to disk score the same as in memory."""
        _, baseline, evaluation = idle_evaluation
        write_trajectories(evaluation.trajectories, tmp_path / "test.csv")

        assert read_trajectories(tmp_path / "test.csv") == evaluation.trajectories
        frame = score_trajectories(tmp_path, baseline)
        assert frame["score"].tolist() == [80.0, 80.0]

    def test_costs_read_back_exactly(self, tmp_path):
        """Test full-precision costs survive the trajectory file unchanged."""
        trajectories = [
            EpisodeTrajectory("chronic_02", 0, 20, 20, 0.1 + 0.2, "", 3),
            EpisodeTrajectory("chronic_02", 20, 20, 7, 1234.5678901234567 / 3.0, "network-split", 5),
        ]
        write_trajectories(trajectories, tmp_path / "test.csv")
        assert read_trajectories(tmp_path / "test.csv") == trajectories

    def test_scoring_needs_baseline(self, tmp_path):
        """Test scoring without a baseline raises BaselineMissingError."""
        with pytest.raises(BaselineMissingError):
            score_trajectories(tmp_path, None)

    def test_scoring_empty_directory(self, idle_evaluation, tmp_path):
        """Test a directory without trajectories raises EmptyTrajectoryError."""
        _, baseline, _ = idle_evaluation
        with pytest.raises(EmptyTrajectoryError):
            score_trajectories(tmp_path, baseline)

    def test_unknown_window(self, roomy_case5, small_episode_set, no_trip_config, tiny_sacd_hp):
        """Test evaluating a split the baseline never ran raises BaselineMissingError."""
        config = HierarchyConfig(rho_thresh=1.0, strategy=Strategy.ISACD)
        team = build_team(roomy_case5, config, tiny_sacd_hp, seed=0)
        controller = build_controller(roomy_case5, team, config, 0, no_trip_config, phase="eval", stream_key=1)
        baseline = run_baseline(roomy_case5, small_episode_set, splits=("test",), env_config=no_trip_config)
        with pytest.raises(BaselineMissingError):
            evaluate_team(controller, small_episode_set, "validation", baseline)


class TestTraining:
    """Test the interaction-budgeted training loop."""

    def test_schedule(self):
        """Test the budget must be positive and divisible by the eval period."""
        check_schedule(8, 4)
        for budget, period in ((0, 1), (10, 3), (10, 0)):
            with pytest.raises(SeedBudgetError):
                check_schedule(budget, period)

    def test_budget_spent_exactly(
        self, case5, small_episode_set, scoring_baseline, unsafe_sacd_hp, no_trip_config, tmp_path
    ):
        """Test training stops at the budget and evaluates on schedule."""
        run = train(case5, small_episode_set, scoring_baseline, unsafe_sacd_hp, no_trip_config, output_dir=tmp_path)

        assert run.completed
        assert run.interactions == 8
        frame = run.score_frame()
        assert frame["interaction"].tolist() == [4, 8]
        assert {"mean_score", "score_0", "score_1"} <= set(frame.columns)
        assert (tmp_path / SCORES_FILE).exists()
        assert sorted(p.name for p in (tmp_path / CHECKPOINT_DIR).iterdir() if p.is_dir()) == ["sub_0", "sub_2", "sub_3"]
        assert len(read_trajectories(tmp_path / TRAJECTORY_DIR / "test.csv")) == 2

    def test_updates_logged(
        self, case5, small_episode_set, scoring_baseline, unsafe_sacd_hp, no_trip_config, tmp_path
    ):
        """Test at most one update per interaction, each written to the update log."""
        run = train(case5, small_episode_set, scoring_baseline, unsafe_sacd_hp, no_trip_config, output_dir=tmp_path)

        updates = sum(agent.updates for agent in run.team.agents)
        assert 0 < updates <= 8
        frame = UpdateMetricsLog(tmp_path / UPDATES_FILE).read()
        assert len(frame) == updates
        assert set(frame["status"]) == {"updated"}

    def test_deterministic(self, case5, small_episode_set, scoring_baseline, unsafe_sacd_hp, no_trip_config, tmp_path):
        """Test equal seeds give equal scores and byte-identical checkpoints."""
        first = train(case5, small_episode_set, scoring_baseline, unsafe_sacd_hp, no_trip_config, output_dir=tmp_path / "a")
        second = train(case5, small_episode_set, scoring_baseline, unsafe_sacd_hp, no_trip_config, output_dir=tmp_path / "b")

        assert (tmp_path / "a" / SCORES_FILE).read_bytes() == (tmp_path / "b" / SCORES_FILE).read_bytes()
        for path in sorted((tmp_path / "a" / CHECKPOINT_DIR).rglob("*")):
            if path.is_file():
                twin = tmp_path / "b" / path.relative_to(tmp_path / "a")
                assert path.read_bytes() == twin.read_bytes(), path.name
        assert_same_state(team_state(first.team), team_state(second.team))

    def test_forced_identity_reduces_to_independent(
        self, case5, small_episode_set, scoring_baseline, unsafe_sacd_hp, no_trip_config
    ):
        """Test dependent SACD with an identity transition matrix trains exactly like independent SACD."""
        dependent = train(
            case5, small_episode_set, scoring_baseline, unsafe_sacd_hp, no_trip_config, forced_identity=True
        )
        independent = train(
            case5, small_episode_set, scoring_baseline, unsafe_sacd_hp, no_trip_config, strategy=Strategy.ISACD
        )

        assert_same_state(team_state(dependent.team), team_state(independent.team))
        assert dependent.score_rows[-1]["mean_score"] == independent.score_rows[-1]["mean_score"]

    def test_ppo_training(self, case5, small_episode_set, scoring_baseline, tiny_ppo_hp, no_trip_config):
        """Test dependent PPO runs to the budget."""
        run = train(
            case5, small_episode_set, scoring_baseline, tiny_ppo_hp, no_trip_config, strategy=Strategy.DPPO, budget=16, eval_period=16
        )
        assert run.interactions == 16
        assert len(run.score_rows) == 1

    def test_dependent_ppo_uses_dependent_residuals(
        self, case5, small_episode_set, scoring_baseline, tiny_ppo_hp, no_trip_config
    ):
        """Test every dependent PPO update computes its residuals through the mixed TD residual."""
        with patch("src.marl.team.dependent_td_residual", wraps=dependent_td_residual) as residual:
            run = train(
                case5, small_episode_set, scoring_baseline, tiny_ppo_hp, no_trip_config, strategy=Strategy.DPPO, budget=48, eval_period=48
            )
        assert residual.call_count == sum(agent.updates for agent in run.team.agents)
        assert residual.call_count > 0

    def test_forced_identity_ppo_reduces_to_independent(
        self, case5, small_episode_set, scoring_baseline, tiny_ppo_hp, no_trip_config
    ):
        """Test dependent PPO with an identity transition matrix trains exactly like independent PPO."""
        kwargs = {"budget": 48, "eval_period": 48}
        dependent = train(
            case5, small_episode_set, scoring_baseline, tiny_ppo_hp, no_trip_config,
            strategy=Strategy.DPPO, forced_identity=True, **kwargs
        )
        independent = train(
            case5, small_episode_set, scoring_baseline, tiny_ppo_hp, no_trip_config, strategy=Strategy.IPPO, **kwargs
        )
        assert_same_state(team_state(dependent.team), team_state(independent.team))

    def test_bad_schedule_rejected_before_work(self, case5, small_episode_set, scoring_baseline, unsafe_sacd_hp):
        """Test an indivisible schedule fails before any agent is built."""
        with pytest.raises(SeedBudgetError):
            train(case5, small_episode_set, scoring_baseline, unsafe_sacd_hp, None, budget=10, eval_period=3)
