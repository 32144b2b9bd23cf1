"""
Tests for PPO losses, advantage estimation and the PPO agent.
"""
import numpy as np
import pytest

from src.agents.buffers import Transition
from src.agents.ppo import (
    PPOAgent,
    compute_gae,
    normalize,
    policy_entropy,
    ppo_clip_loss,
    ppo_combined_loss,
    ppo_value_loss,
    td_residuals,
)
from src.agents.update import update_cycle
from src.exceptions import ShapeMismatchError
from src.nn.tensor import Tensor, parameter


def make_agent(hp, n_actions=3):
    return PPOAgent("sub_2", 10, n_actions, hp, np.random.default_rng(0), np.random.default_rng(1))


def collect(agent, graph, count, rng):
    for i in range(count):
        action, log_prob, value = agent.act(graph, rng)
        agent.rollout.add(
            Transition(
                state=graph,
                action=action,
                reward=0.5,
                next_state=graph,
                done=i == count - 1,
                agent_id=0,
                log_prob=log_prob,
                value=value,
            )
        )


class TestAdvantages:
    """Test TD residuals and GAE."""

    def test_td_residuals(self):
        """Test delta = r + gamma V' - V with no bootstrap at terminals."""
        deltas = td_residuals(
            np.array([1.0, 1.0]), np.array([0.5, 2.0]), np.array([1.0, 9.0]), np.array([False, True]), gamma=0.9
        )
        assert np.allclose(deltas, [1.4, -1.0])

    def test_lambda_zero_is_one_step_td(self, rng):
        """Test GAE with lambda 0 equals the TD residuals."""
        rewards, values, next_values = rng.normal(size=(3, 6))
        dones = np.array([False, False, True, False, False, False])
        advantages, targets = compute_gae(rewards, values, next_values, dones, gamma=0.99, lam=0.0)
        deltas = td_residuals(rewards, values, next_values, dones, 0.99)
        assert np.allclose(advantages, deltas)
        assert np.allclose(targets, deltas + values)

    def test_discounted_sum(self):
        """Test lambda 1 accumulates discounted future residuals."""
        advantages, _ = compute_gae(np.ones(3), np.zeros(3), np.zeros(3), np.zeros(3, dtype=bool), gamma=0.9, lam=1.0)
        assert np.allclose(advantages, [2.71, 1.9, 1.0])

    def test_terminal_resets_accumulation(self):
        """Test a terminal step does not receive advantages from the next episode."""
        advantages, _ = compute_gae(
            np.ones(3), np.zeros(3), np.zeros(3), np.array([False, True, False]), gamma=0.9, lam=1.0
        )
        assert np.allclose(advantages, [1.9, 1.0, 1.0])

    def test_normalize(self, rng):
        """Test normalized advantages have zero mean and unit spread."""
        normalized = normalize(rng.normal(3.0, 2.0, size=50))
        assert normalized.mean() == pytest.approx(0.0, abs=1e-12)
        assert normalized.std() == pytest.approx(1.0, rel=1e-6)


class TestLosses:
    """Test the clipped surrogate and the combined loss."""

    def test_clip_caps_positive_advantage(self):
        """Test a ratio above 1 + eps earns no more and passes no gradient."""
        log_probs = parameter([np.log(2.0)])
        objective = ppo_clip_loss(log_probs, np.array([0.0]), np.array([1.0]), eps=0.2)
        objective.backward()
        assert objective.item() == pytest.approx(1.2)
        assert log_probs.grad[0] == pytest.approx(0.0)

    def test_unclipped_when_pessimistic(self):
        """Test the unclipped term is kept when it is the smaller one."""
        log_probs = parameter([np.log(0.5), np.log(2.0)])
        objective = ppo_clip_loss(log_probs, np.zeros(2), np.array([1.0, -1.0]), eps=0.2)
        objective.backward()
        assert objective.item() == pytest.approx((0.5 - 2.0) / 2)
        assert np.allclose(log_probs.grad, [0.25, -1.0])

    def test_old_log_probs_required(self):
        """Test the objective needs the log-probabilities from collection time."""
        with pytest.raises(ValueError):
            ppo_clip_loss(parameter([0.0]), None, np.array([1.0]), eps=0.2)

    def test_shape_mismatch(self):
        """Test old log-probabilities must match the batch."""
        with pytest.raises(ShapeMismatchError):
            ppo_clip_loss(parameter([0.0, 0.0]), np.zeros(3), np.ones(2), eps=0.2)

    def test_value_loss(self):
        """Test the mean squared value error."""
        assert ppo_value_loss(Tensor([1.0, 3.0]), np.array([0.0, 1.0])).item() == pytest.approx(2.5)

    def test_entropy_of_uniform_policy(self):
        """Test equal logits have entropy log |A|."""
        assert policy_entropy(Tensor(np.zeros((2, 5)))).item() == pytest.approx(np.log(5))

    def test_combined_loss(self):
        """Test L = -L_clip + c1 L_vf - c2 S."""
        assert ppo_combined_loss(0.4, 2.0, 1.5, c1=0.5, c2=0.01) == pytest.approx(-0.4 + 1.0 - 0.015)


class TestPPOAgent:
    """Test action selection and the rollout update."""

    def test_act_reports_value(self, tiny_ppo_hp, observation_graph, rng):
        """Test act returns the log-probability and critic value of the state."""
        agent = make_agent(tiny_ppo_hp)
        action, log_prob, value = agent.act(observation_graph, rng)
        assert log_prob == pytest.approx(np.log(agent.policy(observation_graph)[0, action]))
        assert value == pytest.approx(agent.value(observation_graph)[0])

    def test_waits_for_full_rollout(self, tiny_ppo_hp, observation_graph, rng):
        """Test nothing is updated before the horizon is reached."""
        agent = make_agent(tiny_ppo_hp)
        collect(agent, observation_graph, tiny_ppo_hp.horizon - 1, rng)
        assert update_cycle(agent) == {"status": "waiting"}
        assert agent.updates == 0

    def test_full_rollout_updates_and_clears(self, tiny_ppo_hp, observation_graph, rng):
        """Test a full rollout triggers one update and an empty, open rollout."""
        agent = make_agent(tiny_ppo_hp)
        actor_before = agent.actor.state()
        collect(agent, observation_graph, tiny_ppo_hp.horizon, rng)

        metrics = update_cycle(agent)

        assert metrics["status"] == "updated"
        assert all(np.isfinite(metrics[key]) for key in ("clip_objective", "value_loss", "entropy", "total_loss"))
        assert agent.updates == 1
        assert len(agent.rollout) == 0 and not agent.rollout.sealed
        assert any(not np.array_equal(agent.actor[n].data, actor_before[n]) for n in actor_before)

    def test_dependent_bootstrap(self, tiny_ppo_hp, observation_graph, rng):
        """Test a supplied bootstrap function replaces the agent's own V(s')."""
        agent = make_agent(tiny_ppo_hp)
        collect(agent, observation_graph, tiny_ppo_hp.horizon, rng)
        seen = []

        def next_values(batch):
            seen.append(batch.size)
            return np.zeros(batch.size)

        update_cycle(agent, next_values_fn=next_values)
        assert seen == [tiny_ppo_hp.horizon]

    def test_residual_function_replaces_deltas(self, tiny_ppo_hp, observation_graph, rng):
        """Test supplied TD residuals drive the advantages without asking for V(s')."""
        agent = make_agent(tiny_ppo_hp)
        collect(agent, observation_graph, tiny_ppo_hp.horizon, rng)
        seen = []

        def residuals(batch):
            seen.append(batch.size)
            return np.ones(batch.size)

        def never(batch):
            raise AssertionError("bootstrap values requested")

        metrics = update_cycle(agent, next_values_fn=never, residual_fn=residuals)
        assert seen == [tiny_ppo_hp.horizon]
        assert metrics["status"] == "updated"

    def test_gae_needs_values_or_deltas(self):
        """Test compute_gae refuses to run without a bootstrap or residuals."""
        with pytest.raises(ValueError):
            compute_gae(np.ones(2), np.zeros(2), None, np.zeros(2, dtype=bool), gamma=0.9, lam=0.9)


SEEDS = range(10)


class TestLossGradients:
    """Test each loss's backward pass against central differences."""

    @pytest.mark.parametrize("seed", SEEDS)
    def test_clip_objective(self, seed, gradient_check):
        """Test the clipped surrogate gradient with respect to the log-probabilities."""
        rng = np.random.default_rng(seed)
        log_probs = rng.normal(-1.0, 0.5, size=8)
        old_log_probs = log_probs + rng.normal(0.0, 0.3, size=8)
        advantages = rng.normal(size=8)
        gradient_check(lambda lp: ppo_clip_loss(lp, old_log_probs, advantages, eps=0.2), log_probs)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_value_loss(self, seed, gradient_check):
        """Test the value loss gradient with respect to V(s)."""
        rng = np.random.default_rng(seed)
        targets = rng.normal(size=8)
        gradient_check(lambda values: ppo_value_loss(values, targets), rng.normal(size=8))

    @pytest.mark.parametrize("seed", SEEDS)
    def test_combined_loss(self, seed, gradient_check):
        """Test the combined loss gradient with respect to both the logits and V(s)."""
        rng = np.random.default_rng(seed)
        actions = rng.integers(0, 3, size=8)
        old_log_probs = rng.normal(-1.1, 0.3, size=8)
        advantages = rng.normal(size=8)
        targets = rng.normal(size=8)

        def loss(logits, values):
            clip = ppo_clip_loss(logits.log_softmax(axis=-1).pick(actions), old_log_probs, advantages, eps=0.2)
            return ppo_combined_loss(clip, ppo_value_loss(values, targets), policy_entropy(logits), c1=0.5, c2=0.01)

        gradient_check(loss, rng.normal(size=(8, 3)), rng.normal(size=8))
