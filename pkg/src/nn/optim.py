from typing import Dict

import numpy as np

from src.exceptions import MissingGradientError
from src.nn.params import ParameterSet


class Adam:
    """Adam with bias correction; moment buffers persist across steps."""

    def __init__(self, params: ParameterSet, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr < 0:
            raise ValueError(f"learning rate must be non-negative, got {lr}")
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: Dict[str, np.ndarray] = {name: np.zeros(t.shape) for name, t in params.items()}
        self._v: Dict[str, np.ndarray] = {name: np.zeros(t.shape) for name, t in params.items()}

    def zero_grad(self) -> None:
        self.params.zero_grad()

    def step(self) -> None:
        """
        Apply one update from the populated gradients.

        Tensors the loss did not reach (grad is None) are left untouched;
        a step where no tensor has a gradient is an error.
        """
        if all(t.grad is None for t in self.params.values()):
            raise MissingGradientError(f"no gradients populated in {self.params.role.value} parameters")
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for name, tensor in self.params.items():
            if tensor.grad is None:
                continue
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * tensor.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * tensor.grad ** 2
            tensor.data = tensor.data - self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)

    def state(self) -> Dict[str, np.ndarray]:
        out = {"t": np.array([float(self.t)])}
        for name in self._m:
            out[f"m.{name}"] = self._m[name].copy()
            out[f"v.{name}"] = self._v[name].copy()
        return out


def adam_step(optimizer: Adam) -> ParameterSet:
    optimizer.step()
    return optimizer.params
