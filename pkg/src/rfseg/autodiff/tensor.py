"""Reverse-mode autodiff core: grid tensors and the recording tape.

Values are stored in float32 by default (float64 is used by the gradient
checker); gradients always accumulate in float64. Ops record onto the
innermost active tape; outside any tape they only compute values, which is
the inference path.
"""

from __future__ import annotations

import itertools

import numpy as np

from ..errors import RFSegError, ValidationError

__all__ = ["GridTensor", "Tape", "active_tape", "set_debug_finite"]

_ids = itertools.count()
_TAPE_STACK: list["Tape"] = []

# optional post-op finiteness assertion (slow); flipped on in tests
_DEBUG_FINITE = False


def set_debug_finite(enabled: bool) -> None:
    global _DEBUG_FINITE
    _DEBUG_FINITE = bool(enabled)


def debug_finite_enabled() -> bool:
    return _DEBUG_FINITE


class GridTensor:
    """Dense N-dimensional value participating in the autodiff graph."""

    __slots__ = ("values", "requires_grad", "grad", "node_id")

    def __init__(self, values, requires_grad: bool = False, dtype=None):
        arr = np.asarray(values, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        if arr.ndim > 5:
            raise ValidationError(f"tensors support at most 5 axes, got {arr.ndim}")
        self.values = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.node_id = next(_ids)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        if self.values.size != 1:
            raise ValidationError(f"item() on tensor of shape {self.shape}")
        return float(self.values.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "GridTensor":
        return GridTensor(self.values, requires_grad=False)

    def __repr__(self):
        return (
            f"GridTensor(shape={self.shape}, dtype={self.values.dtype}, "
            f"requires_grad={self.requires_grad})"
        )


class _Entry:
    __slots__ = ("out_id", "pairs")

    def __init__(self, out_id, pairs):
        self.out_id = out_id
        self.pairs = pairs  # [(input tensor, backward fn), ...]


class Tape:
    """Ordered op record; recording order is already topological."""

    def __init__(self):
        self.entries: list[_Entry] = []
        self._consumed = False

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self

    def record(self, out: GridTensor, pairs) -> None:
        live = [(t, fn) for t, fn in pairs if t.requires_grad]
        if live:
            self.entries.append(_Entry(out.node_id, live))

    def backward(self, loss: GridTensor) -> None:
        """Accumulate f64 gradients of a scalar loss onto requires-grad leaves."""
        if loss.values.size != 1:
            raise ValidationError(f"backward needs a scalar loss, got shape {loss.shape}")
        if self._consumed:
            raise RFSegError("backward already ran on this tape; record a fresh tape")
        self._consumed = True

        grads: dict[int, np.ndarray] = {
            loss.node_id: np.ones_like(loss.values, dtype=np.float64)
        }
        touched: dict[int, GridTensor] = {loss.node_id: loss}
        for entry in reversed(self.entries):
            g_out = grads.pop(entry.out_id, None)
            touched.pop(entry.out_id, None)
            if g_out is None:
                continue
            for tensor, fn in entry.pairs:
                contrib = fn(g_out)
                prev = grads.get(tensor.node_id)
                if prev is None:
                    grads[tensor.node_id] = np.asarray(contrib, dtype=np.float64)
                    touched[tensor.node_id] = tensor
                else:
                    # never mutate in place: backward fns may alias g_out
                    grads[tensor.node_id] = prev + contrib

        for node_id, tensor in touched.items():
            if tensor.requires_grad:
                g = grads[node_id]
                tensor.grad = g if tensor.grad is None else tensor.grad + g


def active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None
