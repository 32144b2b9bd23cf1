"""
Exception hierarchy shared by the grid, learning and harness packages.

Value-type failures also derive from ``ValueError`` so that callers which only
know the builtin can still catch them.
"""
from typing import Sequence


class HMARLError(Exception):
    """Base class for every error raised by this package."""


class GridSpecError(HMARLError, ValueError):
    """Invalid grid description (ids, references, connectivity, schema)."""


class ChronicProfileError(HMARLError, ValueError):
    """Invalid chronic generation parameters."""


class EnvironmentConstructionError(HMARLError, RuntimeError):
    """The grid cannot be brought into a feasible initial state."""


class EnvironmentDoneError(HMARLError, RuntimeError):
    """step() was called on an environment whose episode has ended."""


class InvalidActionError(HMARLError, ValueError):
    """Malformed or illegal bus configuration."""


class UndefinedRatioError(HMARLError, ValueError):
    """Efficiency ratio requested with zero generation."""


class ShapeMismatchError(HMARLError, ValueError):
    """Two operands have incompatible shapes."""

    def __init__(self, op: str, left: Sequence[int], right: Sequence[int]):
        self.op = op
        self.left = tuple(left)
        self.right = tuple(right)
        super().__init__(f"{op}: incompatible shapes {self.left} and {self.right}")


class BackwardError(HMARLError, RuntimeError):
    """backward() called on a tensor that carries no forward trace."""


class MissingGradientError(HMARLError, RuntimeError):
    """An optimizer step was requested before gradients were populated."""


class StructureMismatchError(HMARLError, ValueError):
    """Two parameter sets do not share names and shapes."""


class EmptyBatchError(HMARLError, ValueError):
    """A loss was requested over an empty batch."""


class UnsealedRolloutError(HMARLError, RuntimeError):
    """Advantages were requested from a rollout that is still open."""


class CheckpointError(HMARLError, ValueError):
    """Corrupt or incompatible checkpoint archive."""


class ConfigError(HMARLError, ValueError):
    """Experiment configuration violates its schema."""


class SeedBudgetError(ConfigError):
    """Seed list or interaction budget is inconsistent with the eval schedule."""


class MisalignedLogsError(HMARLError, ValueError):
    """Per-seed score logs do not share evaluation points."""


class BaselineMissingError(HMARLError, RuntimeError):
    """Scoring was requested without a do-nothing baseline cache."""


class EmptyTrajectoryError(HMARLError, ValueError):
    """No stored trajectories were found to score."""
