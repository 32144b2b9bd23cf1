"""
Tests for substation action spaces and agent construction.
"""
from itertools import product

import pytest

from src.env.action import DO_NOTHING
from src.exceptions import InvalidActionError
from src.marl.actions import agent_substations, build_agent_specs, enumerate_actions, union_agent_spec


def brute_force_configs(spec, substation):
    """All 2^n assignments, mirrored pairs merged, isolating ones dropped."""
    slots = spec.elements_at(substation)
    kept = set()
    for buses in product((1, 2), repeat=len(slots)):
        canonical = buses if buses[0] == 1 else tuple(3 - b for b in buses)
        safe = True
        for bus in (1, 2):
            kinds = [slot.kind for slot, b in zip(slots, canonical) if b == bus]
            if any(not k.is_line for k in kinds) and not any(k.is_line for k in kinds):
                safe = False
        if safe:
            kept.add(canonical)
    return kept


class TestEnumerateActions:
    """Test the per-substation configuration lists."""

    @pytest.mark.parametrize("substation", range(5))
    def test_matches_brute_force(self, case5, substation):
        """Test enumeration against an exhaustive search with symmetry and isolation filtering."""
        actions = enumerate_actions(case5, substation)
        configs = [a.buses for a in actions]

        assert set(configs) == brute_force_configs(case5, substation)
        assert len(configs) == len(set(configs))
        assert configs == sorted(configs)
        assert all(a.substation == substation for a in actions)

    def test_identity_first(self, case5):
        """Test the unchanged reference configuration is action 0."""
        assert enumerate_actions(case5, 0)[0].buses == (1, 1, 1, 1, 1)

    def test_five_element_substations(self, case5):
        """Test 16 canonical splits minus the one stranding the injection."""
        assert len(enumerate_actions(case5, 0)) == 15
        assert len(enumerate_actions(case5, 2)) == 15

    def test_too_small_to_split(self, case5):
        """Test a substation with fewer than two elements has no actions."""
        from src.grid.model import GridSpec

        tiny = GridSpec(
            substations=[{"id": 0}, {"id": 1}],
            lines=[{"id": 0, "from_substation": 0, "to_substation": 1, "reactance": 0.1, "limit_mw": 10}],
            generators=[],
            loads=[],
        )
        with pytest.raises(InvalidActionError):
            enumerate_actions(tiny, 0)


class TestAgentSpecs:
    """Test agent placement."""

    def test_three_agents_on_case5(self, case5):
        """Test substations with at least four elements each get an agent."""
        specs = build_agent_specs(case5)
        assert agent_substations(case5) == [0, 2, 3]
        assert [s.agent_id for s in specs] == [0, 1, 2]
        assert [s.n_actions for s in specs] == [15, 15, 15]

    def test_lower_threshold(self, case5):
        """Test a lower size threshold covers every substation."""
        assert agent_substations(case5, min_size=3) == [0, 1, 2, 3, 4]

    def test_union_space(self, case5):
        """Test the single-agent space is do-nothing plus every substation action."""
        union = union_agent_spec(build_agent_specs(case5))
        assert union.n_actions == 46
        assert union.actions[0] == DO_NOTHING
        assert union.substation == -1
