"""
Tests for monitoring and observability modules.
"""
from unittest.mock import patch

import pandas as pd
from prometheus_client import REGISTRY

from src.monitoring.logger import get_logger, log_error, log_run, setup_logging
from src.monitoring.metrics import (
    get_metrics,
    measure_time,
    merge_metrics,
    metrics_delta,
    metrics_snapshot,
    track_agent_update,
    track_env_step,
    track_evaluation,
    track_game_over,
    track_interaction,
    track_replay_size,
)
from src.monitoring.training_log import BASE_COLUMNS, METRIC_COLUMNS, UpdateMetricsLog


def sample(name, labels):
    return REGISTRY.get_sample_value(name, labels) or 0.0


class TestStructuredLogging:
    """Test structured logging functionality."""

    def test_setup_logging_configures_structlog(self):
        """Test that setup_logging configures a usable logger."""
        setup_logging("ERROR")
        logger = get_logger("test")
        logger.info("ignored_event", value=1)
        assert logger is not None

    def test_get_logger_returns_bound_logger(self):
        """Test get_logger returns a properly configured logger."""
        logger = get_logger("test_module")
        assert hasattr(logger, 'info')
        assert hasattr(logger, 'error')
        assert hasattr(logger, 'debug')

    def test_log_run_creates_context(self):
        """Test log_run carries strategy, seed and extra keys."""
        context = log_run("dsacd", 3, budget=100)
        assert context == {"strategy": "dsacd", "seed": 3, "budget": 100}

    def test_log_error_creates_error_context(self):
        """Test log_error creates proper error context."""
        context = log_error(ValueError("Test error"), run_id="run-1", command="train")

        assert context["error_type"] == "ValueError"
        assert context["error_message"] == "Test error"
        assert context["run_id"] == "run-1"
        assert context["command"] == "train"

    def test_log_error_without_run_id(self):
        """Test log_error omits run_id when none is given."""
        assert "run_id" not in log_error(RuntimeError("x"))


class TestMetrics:
    """Test metrics functionality."""

    def test_metrics_registered(self):
        """Test that the training metrics are registered."""
        names = [metric.name for metric in REGISTRY.collect()]
        assert any("hmarl_interactions" in name for name in names)
        assert any("hmarl_env_steps" in name for name in names)
        assert any("hmarl_agent_updates" in name for name in names)

    def test_track_interaction_increments(self):
        """Test track_interaction increments the per-strategy counter."""
        before = sample("hmarl_interactions_total", {"strategy": "unit-test"})
        track_interaction("unit-test")
        track_interaction("unit-test")
        assert sample("hmarl_interactions_total", {"strategy": "unit-test"}) == before + 2

    def test_track_env_step_and_game_over(self):
        """Test env step and game-over counters by label."""
        steps = sample("hmarl_env_steps_total", {"phase": "unit"})
        overs = sample("hmarl_game_over_total", {"cause": "network-split"})
        track_env_step("unit")
        track_game_over("network-split")
        assert sample("hmarl_env_steps_total", {"phase": "unit"}) == steps + 1
        assert sample("hmarl_game_over_total", {"cause": "network-split"}) == overs + 1

    def test_track_agent_update_observes_duration(self):
        """Test update counter and histogram."""
        count = sample("hmarl_agent_update_duration_seconds_count", {"algorithm": "unit"})
        track_agent_update("unit", 0.25)
        assert sample("hmarl_agent_update_duration_seconds_count", {"algorithm": "unit"}) == count + 1
        assert sample("hmarl_agent_updates_total", {"algorithm": "unit"}) >= 1

    def test_track_evaluation_sets_gauge(self):
        """Test the latest evaluation gauge holds the last score."""
        track_evaluation("unit", 9, 42.5, 0.1)
        assert sample("hmarl_latest_eval_score", {"strategy": "unit", "seed": "9"}) == 42.5

    def test_track_replay_size_sets_gauge(self):
        """Test the replay gauge follows the buffer length per agent."""
        track_replay_size("sub_unit", 3)
        track_replay_size("sub_unit", 4)
        assert sample("hmarl_replay_buffer_size", {"agent": "sub_unit"}) == 4.0

    def test_metrics_disabled(self):
        """Test that disabled metrics leave counters untouched."""
        before = sample("hmarl_interactions_total", {"strategy": "disabled"})
        with patch("src.monitoring.metrics.settings") as mock_settings:
            mock_settings.enable_metrics = False
            track_interaction("disabled")
        assert sample("hmarl_interactions_total", {"strategy": "disabled"}) == before

    def test_measure_time_decorator(self):
        """Test measure_time reports a duration and passes the result through."""
        seen = []

        @measure_time(lambda duration: seen.append(duration))
        def work(x):
            return x * 2

        assert work(21) == 42
        assert len(seen) == 1 and seen[0] >= 0

    def test_delta_holds_counter_increments_and_changed_gauges(self):
        """Test a delta carries counter increments and the latest value of changed gauges only."""
        track_replay_size("sub_steady", 2)
        before = metrics_snapshot()
        track_interaction("delta-test")
        track_interaction("delta-test")
        track_replay_size("sub_delta", 7)
        delta = metrics_delta(before, metrics_snapshot())

        assert delta[("hmarl_interactions_total", (("strategy", "delta-test"),))] == 2.0
        assert delta[("hmarl_replay_buffer_size", (("agent", "sub_delta"),))] == 7.0
        assert ("hmarl_replay_buffer_size", (("agent", "sub_steady"),)) not in delta

    def test_merge_applies_delta(self):
        """Test a merged delta adds to counters and overwrites gauges."""
        before = sample("hmarl_env_steps_total", {"phase": "merged"})
        merge_metrics(
            {
                ("hmarl_env_steps_total", (("phase", "merged"),)): 5.0,
                ("hmarl_latest_eval_score", (("seed", "4"), ("strategy", "merged"))): 61.0,
            }
        )
        assert sample("hmarl_env_steps_total", {"phase": "merged"}) == before + 5
        assert sample("hmarl_latest_eval_score", {"strategy": "merged", "seed": "4"}) == 61.0

    def test_get_metrics_exposition(self):
        """Test the text exposition contains our metric names."""
        assert b"hmarl_env_steps_total" in get_metrics()


class TestUpdateMetricsLog:
    """Test the comma-separated update metrics stream."""

    def test_append_and_read(self, tmp_path):
        """Test rows round through the CSV with the fixed column set."""
        log = UpdateMetricsLog(tmp_path / "updates.csv", flush_every=10)
        log.append(5, "sub_0", "sacd", {"status": "updated", "critic_loss": 1.5, "alpha": 0.9})
        log.append(6, "sub_2", "ppo", {"status": "updated", "clip_objective": 0.1})
        frame = log.read()

        assert list(frame.columns) == BASE_COLUMNS + METRIC_COLUMNS
        assert frame["step"].tolist() == [5, 6]
        assert frame.loc[0, "critic_loss"] == 1.5
        assert pd.isna(frame.loc[1, "critic_loss"])

    def test_flush_every_writes_in_batches(self, tmp_path):
        """Test rows are written once the pending batch is full."""
        path = tmp_path / "updates.csv"
        log = UpdateMetricsLog(path, flush_every=2)
        log.append(1, "a", "sacd", {})
        assert not path.exists()
        log.append(2, "a", "sacd", {})
        assert path.exists()
        assert log.rows_written == 2

    def test_in_memory_log_discards(self):
        """Test a log without a path drops rows on flush."""
        log = UpdateMetricsLog(None)
        log.append(1, "a", "sacd", {})
        log.flush()
        assert log.read().empty
