"""
Comma-separated metrics stream for agent updates.

One row per update cycle: step, agent, algorithm and the loss components
reported by the cycle. Rows are buffered and appended with pandas.
"""
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from src.monitoring.logger import get_logger

logger = get_logger(__name__)

BASE_COLUMNS = ["step", "agent", "algorithm"]
METRIC_COLUMNS = [
    "status",
    "critic_loss",
    "actor_loss",
    "alpha_loss",
    "alpha",
    "entropy",
    "clip_objective",
    "value_loss",
    "total_loss",
]


class UpdateMetricsLog:
    """Append-only CSV log of update metrics."""

    def __init__(self, path: Optional[Path] = None, flush_every: int = 200):
        self.path = Path(path) if path is not None else None
        self.flush_every = flush_every
        self._pending: List[Dict[str, Any]] = []
        self.rows_written = 0

    def append(self, step: int, agent: str, algorithm: str, metrics: Dict[str, Any]) -> None:
        row = {"step": step, "agent": agent, "algorithm": algorithm}
        row.update({column: metrics.get(column) for column in METRIC_COLUMNS})
        self._pending.append(row)
        if len(self._pending) >= self.flush_every:
            self.flush()

    def flush(self) -> None:
        if not self._pending:
            return
        if self.path is None:
            self._pending.clear()
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(self._pending, columns=BASE_COLUMNS + METRIC_COLUMNS)
        write_header = not self.path.exists() or self.path.stat().st_size == 0
        frame.to_csv(self.path, mode="a", header=write_header, index=False, float_format="%.17g")
        self.rows_written += len(frame)
        logger.debug("update_metrics_flushed", rows=len(frame), path=str(self.path))
        self._pending.clear()

    def read(self) -> pd.DataFrame:
        self.flush()
        if self.path is None or not self.path.exists():
            return pd.DataFrame(columns=BASE_COLUMNS + METRIC_COLUMNS)
        return pd.read_csv(self.path, float_precision="round_trip")
