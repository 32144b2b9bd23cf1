"""
Tests for discrete soft actor-critic.
"""
import numpy as np
import pytest

from src.agents.buffers import Transition
from src.agents.sacd import (
    SACDAgent,
    sacd_actor_loss,
    sacd_critic_loss,
    sacd_soft_state_value,
    sacd_targets,
    sacd_temperature_loss,
    target_entropy,
)
from src.agents.update import update_cycle
from src.exceptions import EmptyBatchError, ShapeMismatchError
from src.nn.tensor import Tensor, parameter


def make_agent(hp, n_actions=4):
    return SACDAgent("sub_0", 10, n_actions, hp, np.random.default_rng(0), np.random.default_rng(1))


def fill(agent, graph, count=6):
    for i in range(count):
        agent.buffer.add(
            Transition(
                state=graph,
                action=i % agent.n_actions,
                reward=0.1 * i,
                next_state=graph,
                done=i == count - 1,
                agent_id=0,
            )
        )


class TestSoftValue:
    """Test V(s) = pi . (Q - alpha log pi)."""

    def test_uniform_policy(self):
        """Test the entropy bonus on a uniform two-action policy."""
        value = sacd_soft_state_value(np.array([[0.5, 0.5]]), np.array([[1.0, 3.0]]), alpha=0.1)
        assert value[0] == pytest.approx(2.0 + 0.1 * np.log(2.0))

    def test_zero_probability_actions_ignored(self):
        """Test actions the policy never takes contribute nothing."""
        value = sacd_soft_state_value(np.array([[1.0, 0.0]]), np.array([[1.0, 100.0]]), alpha=0.5)
        assert value[0] == pytest.approx(1.0)

    def test_zero_temperature(self):
        """Test alpha = 0 reduces to the expected Q value."""
        value = sacd_soft_state_value(np.array([[0.2, 0.8]]), np.array([[5.0, 0.0]]), alpha=0.0)
        assert value[0] == pytest.approx(1.0)

    def test_shape_mismatch(self):
        """Test probabilities and Q tables must agree in shape."""
        with pytest.raises(ShapeMismatchError):
            sacd_soft_state_value(np.ones((1, 2)) / 2, np.ones((1, 3)), alpha=0.1)


class TestLosses:
    """Test targets and the three SACD losses."""

    def test_targets_drop_bootstrap_at_terminals(self):
        """Test y = r + gamma V on ordinary steps and y = r on terminal ones."""
        targets = sacd_targets(np.array([1.0, -1.0]), np.array([False, True]), np.array([2.0, 5.0]), gamma=0.9)
        assert np.allclose(targets, [2.8, -1.0])

    def test_critic_loss_value_and_gradient(self):
        """Test the halved squared TD error and its gradient on the taken action."""
        q = parameter([[1.0, 2.0], [3.0, 4.0]])
        loss = sacd_critic_loss(q, np.array([1, 0]), np.array([0.0, 0.0]))
        loss.backward()
        assert loss.item() == pytest.approx(3.25)
        assert np.allclose(q.grad, [[0.0, 1.0], [1.5, 0.0]])

    def test_actor_loss_gradient(self, rng):
        """Test the actor loss gradient against finite differences."""
        logits = rng.normal(size=(3, 4))
        q = rng.normal(size=(3, 4))
        leaf = parameter(logits.copy())
        sacd_actor_loss(leaf, q, alpha=0.2).backward()

        numeric = np.zeros_like(logits)
        for index in np.ndindex(logits.shape):
            up, down = logits.copy(), logits.copy()
            up[index] += 1e-6
            down[index] -= 1e-6
            numeric[index] = (
                sacd_actor_loss(Tensor(up), q, 0.2).item() - sacd_actor_loss(Tensor(down), q, 0.2).item()
            ) / 2e-6
        assert np.allclose(leaf.grad, numeric, atol=1e-6)

    def test_temperature_rises_when_entropy_low(self):
        """Test a deterministic policy pushes log alpha up."""
        log_alpha = parameter([0.0])
        sacd_temperature_loss(log_alpha, np.array([[1.0, 0.0]]), target_entropy=0.5).backward()
        assert log_alpha.grad[0] == pytest.approx(-0.5)

    def test_target_entropy(self):
        """Test the entropy target scales log |A| and is zero for one action."""
        assert target_entropy(4, 0.98) == pytest.approx(0.98 * np.log(4))
        assert target_entropy(1, 0.98) == 0.0

    def test_empty_batches(self):
        """Test losses over zero rows raise EmptyBatchError."""
        with pytest.raises(EmptyBatchError):
            sacd_critic_loss(parameter(np.zeros((0, 2))), np.zeros(0, dtype=np.int64), np.zeros(0))
        with pytest.raises(EmptyBatchError):
            sacd_actor_loss(parameter(np.zeros((0, 2))), np.zeros((0, 2)), 0.1)


class TestSACDAgent:
    """Test action selection and the update cycle."""

    def test_policy_is_a_distribution(self, tiny_sacd_hp, observation_graph):
        """Test the actor outputs one probability row per graph."""
        probs = make_agent(tiny_sacd_hp).policy(observation_graph)
        assert probs.shape == (1, 4)
        assert probs.sum() == pytest.approx(1.0)

    def test_sampling_draws_one_uniform(self, tiny_sacd_hp, observation_graph):
        """Test a stochastic action consumes exactly one uniform draw."""
        agent = make_agent(tiny_sacd_hp)
        used, reference = np.random.default_rng(5), np.random.default_rng(5)
        action, log_prob, value = agent.act(observation_graph, used)
        reference.random()

        assert 0 <= action < 4
        assert log_prob == pytest.approx(np.log(agent.policy(observation_graph)[0, action]))
        assert value == 0.0
        assert used.random() == reference.random()

    def test_greedy_takes_argmax(self, tiny_sacd_hp, observation_graph, rng):
        """Test greedy selection picks the most likely action."""
        agent = make_agent(tiny_sacd_hp)
        action, _, _ = agent.act(observation_graph, rng, greedy=True)
        assert action == int(np.argmax(agent.policy(observation_graph)[0]))

    def test_waits_for_update_start(self, tiny_sacd_hp, observation_graph):
        """Test no update happens before the start threshold or with an empty buffer."""
        agent = make_agent(tiny_sacd_hp.model_copy(update={"update_start": 1.0}))
        fill(agent, observation_graph)
        assert update_cycle(agent, interactions=999) == {"status": "waiting"}
        assert not make_agent(tiny_sacd_hp).ready(10)

    def test_update_moves_nets_and_targets(self, tiny_sacd_hp, observation_graph):
        """Test one cycle updates every online set and Polyak-averages the targets."""
        agent = make_agent(tiny_sacd_hp)
        fill(agent, observation_graph)
        trunk_before = agent.trunk.state()
        actor_before = agent.actor.state()
        target_before = agent.target_critic.state()

        metrics = update_cycle(agent, interactions=1)

        assert metrics["status"] == "updated"
        assert all(np.isfinite(metrics[key]) for key in ("critic_loss", "actor_loss", "alpha_loss", "alpha"))
        assert agent.updates == 1
        assert any(not np.array_equal(agent.trunk[n].data, trunk_before[n]) for n in trunk_before)
        assert any(not np.array_equal(agent.actor[n].data, actor_before[n]) for n in actor_before)
        tau = tiny_sacd_hp.tau
        for name, old in target_before.items():
            assert np.allclose(agent.target_critic[name].data, tau * agent.critic[name].data + (1 - tau) * old)

    def test_next_value_override(self, tiny_sacd_hp, observation_graph):
        """Test a supplied bootstrap function sees the sampled batch."""
        agent = make_agent(tiny_sacd_hp)
        fill(agent, observation_graph)
        seen = []

        def next_values(batch):
            seen.append(batch.size)
            return np.zeros(batch.size)

        update_cycle(agent, interactions=1, next_values_fn=next_values)
        assert seen == [tiny_sacd_hp.batch_size]

    def test_soft_value_shape(self, tiny_sacd_hp, observation_graph):
        """Test V(s) has one entry per graph."""
        assert make_agent(tiny_sacd_hp).soft_value(observation_graph).shape == (1,)


SEEDS = range(10)


class TestLossGradients:
    """Test each loss's backward pass against central differences."""

    @pytest.mark.parametrize("seed", SEEDS)
    def test_critic_loss(self, seed, gradient_check):
        """Test the critic loss gradient with respect to Q."""
        rng = np.random.default_rng(seed)
        actions = rng.integers(0, 4, size=6)
        targets = rng.normal(size=6)
        gradient_check(lambda q: sacd_critic_loss(q, actions, targets), rng.normal(size=(6, 4)))

    @pytest.mark.parametrize("seed", SEEDS)
    def test_actor_loss(self, seed, gradient_check):
        """Test the actor loss gradient with respect to the logits."""
        rng = np.random.default_rng(seed)
        q_values = rng.normal(size=(6, 4))
        alpha = float(rng.uniform(0.01, 1.0))
        gradient_check(lambda logits: sacd_actor_loss(logits, q_values, alpha), rng.normal(size=(6, 4)))

    @pytest.mark.parametrize("seed", SEEDS)
    def test_temperature_loss(self, seed, gradient_check):
        """Test the temperature loss gradient with respect to log alpha."""
        rng = np.random.default_rng(seed)
        logits = rng.normal(size=(6, 4))
        probs = np.exp(logits) / np.exp(logits).sum(axis=-1, keepdims=True)
        entropy_target = target_entropy(4, float(rng.uniform(0.1, 1.0)))
        gradient_check(lambda log_alpha: sacd_temperature_loss(log_alpha, probs, entropy_target), rng.normal(size=1))
