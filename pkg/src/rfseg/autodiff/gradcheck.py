"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .tensor import GridTensor, Tape

__all__ = ["GradCheckReport", "grad_check"]


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_input: int
    worst_coord: tuple
    n_checked: int

    def ok(self, tol: float) -> bool:
        return self.max_rel_error <= tol


def grad_check(f, inputs: list[GridTensor], h: float = 1e-3,
               rng: np.random.Generator | None = None,
               n_coords: int = 20) -> GradCheckReport:
    """Compare analytic gradients of a scalar function against central
    differences at sampled coordinates.

    Inputs should hold float64 values; h is the central-difference step.
    The relative error denominator is max(|analytic|, |fd|, 1e-8).
    """
    if h <= 0:
        raise ValidationError("finite-difference step must be > 0")
    rng = rng or np.random.default_rng(0)

    for t in inputs:
        t.requires_grad = True
        t.zero_grad()
    with Tape() as tape:
        out = f(*inputs)
    if out.values.size != 1:
        raise ValidationError("grad_check needs a scalar-valued function")
    tape.backward(out)

    worst = 0.0
    worst_input = -1
    worst_coord = ()
    checked = 0
    for i, t in enumerate(inputs):
        grad = t.grad if t.grad is not None else np.zeros(t.shape, dtype=np.float64)
        n = t.values.size
        coords = np.arange(n) if n <= n_coords else rng.choice(n, size=n_coords, replace=False)
        flat = t.values.reshape(-1)
        for c in np.sort(coords):
            orig = flat[c]
            flat[c] = orig + h
            f_plus = f(*inputs).item()
            flat[c] = orig - h
            f_minus = f(*inputs).item()
            flat[c] = orig
            fd = (f_plus - f_minus) / (2.0 * h)
            an = float(grad.reshape(-1)[c])
            rel = abs(an - fd) / max(abs(an), abs(fd), 1e-8)
            checked += 1
            if rel > worst:
                worst = rel
                worst_input = i
                worst_coord = np.unravel_index(int(c), t.shape)
    return GradCheckReport(max_rel_error=worst, worst_input=worst_input,
                           worst_coord=worst_coord, n_checked=checked)
