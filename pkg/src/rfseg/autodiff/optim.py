"""Named parameters and the Adam optimizer."""

from __future__ import annotations

import numpy as np

from ..errors import RFSegError, ValidationError
from .tensor import GridTensor

__all__ = ["Parameter", "adam_step", "Adam"]

ADAM_LR = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class Parameter:
    """A named trainable tensor with per-parameter Adam state."""

    def __init__(self, name: str, values: np.ndarray):
        self.name = name
        self.tensor = GridTensor(np.asarray(values, dtype=np.float32), requires_grad=True)
        self.m = np.zeros(self.tensor.shape, dtype=np.float64)
        self.v = np.zeros(self.tensor.shape, dtype=np.float64)
        self.step_count = 0

    @property
    def values(self) -> np.ndarray:
        return self.tensor.values

    @values.setter
    def values(self, arr: np.ndarray) -> None:
        if arr.shape != self.tensor.shape:
            raise ValidationError(
                f"parameter {self.name}: shape {arr.shape} != {self.tensor.shape}"
            )
        self.tensor.values = np.asarray(arr, dtype=np.float32)

    @property
    def grad(self):
        return self.tensor.grad

    def zero_grad(self) -> None:
        self.tensor.grad = None

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.tensor.shape})"


def adam_step(params: list[Parameter], lr: float = ADAM_LR,
              beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
              eps: float = ADAM_EPS) -> None:
    """One bias-corrected Adam update; gradients must be populated."""
    if not params:
        raise ValidationError("adam_step on an empty parameter list")
    for p in params:
        if p.grad is None:
            raise RFSegError(f"parameter {p.name} has no gradient; run backward first")
    for p in params:
        g = p.grad
        p.step_count += 1
        p.m = beta1 * p.m + (1.0 - beta1) * g
        p.v = beta2 * p.v + (1.0 - beta2) * (g * g)
        m_hat = p.m / (1.0 - beta1 ** p.step_count)
        v_hat = p.v / (1.0 - beta2 ** p.step_count)
        update = lr * m_hat / (np.sqrt(v_hat) + eps)
        p.values = (p.values.astype(np.float64) - update).astype(np.float32)


class Adam:
    """Thin stateful wrapper so training loops read naturally."""

    def __init__(self, params: list[Parameter], lr: float = ADAM_LR,
                 beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
                 eps: float = ADAM_EPS):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def step(self) -> None:
        adam_step(self.params, self.lr, self.beta1, self.beta2, self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
