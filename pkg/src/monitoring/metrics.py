from prometheus_client import Counter, Histogram, Gauge, generate_latest
import time
from functools import wraps
from typing import Dict, Tuple
from src.config import settings


# Define metrics
interaction_count = Counter(
    'hmarl_interactions_total',
    'Counted low-level agent interactions with the environment',
    ['strategy']
)

env_step_count = Counter(
    'hmarl_env_steps_total',
    'Environment steps, including top-level do-nothing steps',
    ['phase']
)

game_over_count = Counter(
    'hmarl_game_over_total',
    'Episodes terminated by a failure',
    ['cause']
)

agent_update_count = Counter(
    'hmarl_agent_updates_total',
    'Gradient update cycles applied',
    ['algorithm']
)

agent_update_duration = Histogram(
    'hmarl_agent_update_duration_seconds',
    'Duration of one agent update cycle',
    ['algorithm']
)

evaluation_duration = Histogram(
    'hmarl_evaluation_duration_seconds',
    'Duration of one evaluation pass over the test sub-episodes'
)

latest_eval_score = Gauge(
    'hmarl_latest_eval_score',
    'Mean score of the most recent evaluation',
    ['strategy', 'seed']
)

replay_buffer_size = Gauge(
    'hmarl_replay_buffer_size',
    'Transitions stored per low-level agent',
    ['agent']
)

baseline_duration = Histogram(
    'hmarl_baseline_duration_seconds',
    'Time to play the do-nothing baseline over all requested splits'
)


def track_interaction(strategy: str):
    """Track one counted interaction."""
    if settings.enable_metrics:
        interaction_count.labels(strategy=strategy).inc()


def track_env_step(phase: str):
    """Track one environment step (train / eval / baseline)."""
    if settings.enable_metrics:
        env_step_count.labels(phase=phase).inc()


def track_game_over(cause: str):
    """Track a failed episode."""
    if settings.enable_metrics:
        game_over_count.labels(cause=cause).inc()


def track_agent_update(algorithm: str, duration: float):
    """Track an update cycle and its duration."""
    if settings.enable_metrics:
        agent_update_count.labels(algorithm=algorithm).inc()
        agent_update_duration.labels(algorithm=algorithm).observe(duration)


def track_evaluation(strategy: str, seed: int, score: float, duration: float):
    """Track an evaluation pass."""
    if settings.enable_metrics:
        latest_eval_score.labels(strategy=strategy, seed=str(seed)).set(score)
        evaluation_duration.observe(duration)


def track_replay_size(agent: str, size: int):
    """Track the fill level of an agent's replay buffer."""
    if settings.enable_metrics:
        replay_buffer_size.labels(agent=agent).set(size)


def track_baseline(duration: float):
    if settings.enable_metrics:
        baseline_duration.observe(duration)


def measure_time(metric_func):
    """Decorator to measure function execution time."""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                metric_func(duration=time.perf_counter() - start_time)
        return wrapper
    return decorator


# Counter and gauge series that a worker process hands back to its parent.
# Histograms stay with the process that observed them.
_MERGED_COUNTERS = {
    "hmarl_interactions_total": interaction_count,
    "hmarl_env_steps_total": env_step_count,
    "hmarl_game_over_total": game_over_count,
    "hmarl_agent_updates_total": agent_update_count,
}
_MERGED_GAUGES = {
    "hmarl_latest_eval_score": latest_eval_score,
    "hmarl_replay_buffer_size": replay_buffer_size,
}

SeriesKey = Tuple[str, Tuple[Tuple[str, str], ...]]


def metrics_snapshot() -> Dict[SeriesKey, float]:
    """Current value of every merged counter and gauge series, keyed by (sample name, labels)."""
    snapshot: Dict[SeriesKey, float] = {}
    for name, metric in {**_MERGED_COUNTERS, **_MERGED_GAUGES}.items():
        for family in metric.collect():
            for sample in family.samples:
                if sample.name == name:
                    snapshot[(name, tuple(sorted(sample.labels.items())))] = sample.value
    return snapshot


def metrics_delta(before: Dict[SeriesKey, float], after: Dict[SeriesKey, float]) -> Dict[SeriesKey, float]:
    """Counter increments and latest gauge values between two snapshots."""
    delta: Dict[SeriesKey, float] = {}
    for key, value in after.items():
        if key[0] in _MERGED_COUNTERS:
            if value > before.get(key, 0.0):
                delta[key] = value - before.get(key, 0.0)
        elif key not in before or before[key] != value:
            delta[key] = value
    return delta


def merge_metrics(delta: Dict[SeriesKey, float]):
    """Apply a delta from another process: counters are incremented, gauges set."""
    if not settings.enable_metrics:
        return
    for (name, labels), value in delta.items():
        if name in _MERGED_COUNTERS:
            _MERGED_COUNTERS[name].labels(**dict(labels)).inc(value)
        else:
            _MERGED_GAUGES[name].labels(**dict(labels)).set(value)


def get_metrics() -> bytes:
    """Generate Prometheus metrics."""
    return generate_latest()
