from enum import Enum
from typing import Dict, Iterator, List, Mapping, Tuple

import numpy as np

from src.exceptions import StructureMismatchError
from src.nn.tensor import Tensor, parameter


class Role(str, Enum):
    ACTOR = "actor"
    CRITIC = "critic"
    TARGET_CRITIC = "target-critic"
    SHARED = "shared"
    TEMPERATURE = "temperature"


class ParameterSet(Mapping[str, Tensor]):
    """Named, ordered tensors of one network with a role tag."""

    def __init__(self, role: Role, tensors: Mapping[str, Tensor] = None):
        self.role = Role(role)
        self._tensors: Dict[str, Tensor] = {}
        for name, tensor in (tensors or {}).items():
            self.add(name, tensor)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def __repr__(self) -> str:
        return f"ParameterSet(role={self.role.value}, tensors={len(self)}, size={self.n_values})"

    def add(self, name: str, value) -> Tensor:
        if name in self._tensors:
            raise StructureMismatchError(f"duplicate parameter name {name!r}")
        tensor = value if isinstance(value, Tensor) else parameter(value)
        tensor.requires_grad = True
        tensor.name = name
        self._tensors[name] = tensor
        return tensor

    @property
    def n_values(self) -> int:
        return int(sum(t.size for t in self._tensors.values()))

    def structure(self) -> List[Tuple[str, Tuple[int, ...]]]:
        return [(name, t.shape) for name, t in self._tensors.items()]

    def zero_grad(self) -> None:
        for tensor in self._tensors.values():
            tensor.zero_grad()

    def copy(self, role: Role = None) -> "ParameterSet":
        """Deep copy of values (no gradients), optionally under another role."""
        return ParameterSet(
            role or self.role,
            {name: parameter(t.data.copy()) for name, t in self._tensors.items()},
        )

    def state(self) -> Dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._tensors.items()}

    def load_state(self, state: Mapping[str, np.ndarray]) -> None:
        expected = self.structure()
        found = [(name, tuple(np.shape(value))) for name, value in state.items()]
        if sorted(expected) != sorted(found):
            raise StructureMismatchError(f"state {found} does not match parameters {expected}")
        for name, value in state.items():
            self._tensors[name].data = np.array(value, dtype=np.float64)


def check_same_structure(source: ParameterSet, target: ParameterSet) -> None:
    if source.structure() != target.structure():
        raise StructureMismatchError(
            f"{source.role.value} set {source.structure()} differs from {target.role.value} set {target.structure()}"
        )


def soft_update_target(source: ParameterSet, target: ParameterSet, tau: float) -> ParameterSet:
    """Polyak averaging in place: target <- tau * source + (1 - tau) * target."""
    check_same_structure(source, target)
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    for name, tensor in target.items():
        tensor.data = tau * source[name].data + (1.0 - tau) * tensor.data
    return target


def orthogonal(rng: np.random.Generator, fan_in: int, fan_out: int, gain: float = 1.0) -> np.ndarray:
    """
    Semi-orthogonal (fan_in x fan_out) matrix with entry scale 1/sqrt(fan_in).

    A square orthogonal matrix already has that scale; rectangular ones are
    rescaled by sqrt(max(fan_in, fan_out) / fan_in).
    """
    rows, cols = max(fan_in, fan_out), min(fan_in, fan_out)
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    q *= np.sign(np.diag(r))
    weight = q if fan_in >= fan_out else q.T
    return gain * weight * np.sqrt(rows / fan_in)
