"""Differentiable operations over grid tensors.

Every op computes its forward value in the inputs' dtype, records a tape
entry when a tape is active, and supplies an exact analytic backward that
emits float64 gradients.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError, ValidationError
from .tensor import GridTensor, active_tape, debug_finite_enabled

__all__ = [
    "as_tensor", "constant",
    "add", "sub", "mul", "scale", "neg",
    "relu", "sigmoid", "softmax", "layer_norm",
    "conv3d", "nearest_upsample2x", "concat",
    "matmul", "reshape", "transpose",
    "gather", "scatter_add",
    "tensor_sum", "tensor_mean", "weighted_sum",
    "bce_with_logits",
]


def as_tensor(x, dtype=None) -> GridTensor:
    if isinstance(x, GridTensor):
        return x
    return GridTensor(np.asarray(x), dtype=dtype)


def constant(x, like: GridTensor | None = None) -> GridTensor:
    """Non-differentiable tensor, dtype matched to a reference tensor."""
    dtype = like.dtype if like is not None else np.float32
    return GridTensor(np.asarray(x, dtype=dtype))


def _result(values, pairs, op_name: str) -> GridTensor:
    if debug_finite_enabled() and not np.all(np.isfinite(values)):
        raise FloatingPointError(f"{op_name} produced non-finite values")
    out = GridTensor(values)
    tape = active_tape()
    needs = any(t.requires_grad for t, _ in pairs)
    out.requires_grad = needs and tape is not None
    if out.requires_grad:
        tape.record(out, pairs)
    return out


def _same_shape(op: str, a: GridTensor, b: GridTensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def add(a: GridTensor, b: GridTensor) -> GridTensor:
    _same_shape("add", a, b)
    return _result(a.values + b.values, [(a, lambda g: g), (b, lambda g: g)], "add")


def sub(a: GridTensor, b: GridTensor) -> GridTensor:
    _same_shape("sub", a, b)
    return _result(a.values - b.values, [(a, lambda g: g), (b, lambda g: -g)], "sub")


def mul(a: GridTensor, b: GridTensor) -> GridTensor:
    _same_shape("mul", a, b)
    av, bv = a.values, b.values
    return _result(av * bv, [(a, lambda g: g * bv), (b, lambda g: g * av)], "mul")


def scale(a: GridTensor, c: float) -> GridTensor:
    c = float(c)
    return _result(a.values * a.dtype.type(c), [(a, lambda g: g * c)], "scale")


def neg(a: GridTensor) -> GridTensor:
    return scale(a, -1.0)


def relu(a: GridTensor) -> GridTensor:
    mask = a.values > 0
    return _result(np.where(mask, a.values, 0), [(a, lambda g: g * mask)], "relu")


def sigmoid(a: GridTensor) -> GridTensor:
    v = _sigmoid_np(a.values)
    return _result(v, [(a, lambda g: g * (v * (1.0 - v)))], "sigmoid")


def _sigmoid_np(x: np.ndarray) -> np.ndarray:
    # evaluated through exp(-|x|) so neither branch overflows
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def softmax(a: GridTensor, axis: int = -1) -> GridTensor:
    x = a.values
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    s = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        dot = (g * s).sum(axis=axis, keepdims=True)
        return s * (g - dot)

    return _result(s, [(a, back)], "softmax")


def layer_norm(x: GridTensor, gamma: GridTensor, beta: GridTensor,
               eps: float = 1e-5) -> GridTensor:
    """Normalize the last axis, then apply per-channel gain and bias."""
    C = x.shape[-1]
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeError(f"layer_norm: gain/bias must have shape ({C},)")
    xv = x.values
    mu = xv.mean(axis=-1, keepdims=True)
    var = ((xv - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xv - mu) * inv
    out = xhat * gamma.values + beta.values

    def back_x(g):
        dxhat = g * gamma.values.astype(np.float64)
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        return (dxhat - m1 - xhat * m2) * inv

    def back_gamma(g):
        return (g * xhat).reshape(-1, C).sum(axis=0)

    def back_beta(g):
        return g.reshape(-1, C).sum(axis=0)

    return _result(out, [(x, back_x), (gamma, back_gamma), (beta, back_beta)], "layer_norm")


def conv3d(x: GridTensor, weight: GridTensor, bias: GridTensor | None = None,
           stride: int = 1, padding: int = 0) -> GridTensor:
    """3D convolution: x (C_in, X, Y, D), weight (C_out, C_in, k, k, k).

    Implemented as one GEMM per kernel offset so BLAS carries the load.
    """
    if x.values.ndim != 4:
        raise ShapeError(f"conv3d: input must be (C, X, Y, D), got {x.shape}")
    if weight.values.ndim != 5 or weight.shape[1] != x.shape[0]:
        raise ShapeError(
            f"conv3d: weight {weight.shape} incompatible with input {x.shape}"
        )
    c_out, c_in, k, k2, k3 = weight.shape
    if not (k == k2 == k3):
        raise ShapeError(f"conv3d: kernel must be cubic, got {weight.shape[2:]}")
    if bias is not None and bias.shape != (c_out,):
        raise ShapeError(f"conv3d: bias must have shape ({c_out},)")

    p, s = int(padding), int(stride)
    X, Y, D = x.shape[1:]
    Xo = (X + 2 * p - k) // s + 1
    Yo = (Y + 2 * p - k) // s + 1
    Do = (D + 2 * p - k) // s + 1
    if min(Xo, Yo, Do) < 1:
        raise ShapeError(f"conv3d: kernel {k} too large for input {x.shape} with padding {p}")

    xp = np.pad(x.values, ((0, 0), (p, p), (p, p), (p, p)))
    wv = weight.values
    out = np.zeros((c_out, Xo, Yo, Do), dtype=x.dtype)
    for dx in range(k):
        for dy in range(k):
            for dz in range(k):
                v = xp[:, dx:dx + s * Xo:s, dy:dy + s * Yo:s, dz:dz + s * Do:s]
                out += np.tensordot(wv[:, :, dx, dy, dz], v, axes=(1, 0))
    if bias is not None:
        out += bias.values[:, None, None, None]

    def back_x(g):
        gq = g.astype(wv.dtype, copy=False)  # GEMM at storage precision
        gxp = np.zeros(xp.shape, dtype=wv.dtype)
        for dx in range(k):
            for dy in range(k):
                for dz in range(k):
                    gxp[:, dx:dx + s * Xo:s, dy:dy + s * Yo:s, dz:dz + s * Do:s] += (
                        np.tensordot(wv[:, :, dx, dy, dz], gq, axes=(0, 0))
                    )
        if p == 0:
            return gxp
        return gxp[:, p:p + X, p:p + Y, p:p + D]

    def back_w(g):
        gq = g.astype(xp.dtype, copy=False)
        gw = np.zeros(weight.shape, dtype=xp.dtype)
        for dx in range(k):
            for dy in range(k):
                for dz in range(k):
                    v = xp[:, dx:dx + s * Xo:s, dy:dy + s * Yo:s, dz:dz + s * Do:s]
                    gw[:, :, dx, dy, dz] = np.tensordot(
                        g, v, axes=([1, 2, 3], [1, 2, 3])
                    ) if xp.dtype == np.float64 else np.tensordot(
                        gq, v, axes=([1, 2, 3], [1, 2, 3])
                    )
        return gw

    pairs = [(x, back_x), (weight, back_w)]
    if bias is not None:
        pairs.append((bias, lambda g: g.sum(axis=(1, 2, 3))))
    return _result(out, pairs, "conv3d")


def nearest_upsample2x(x: GridTensor) -> GridTensor:
    """Repeat each cell 2x along the last three (spatial) axes."""
    if x.values.ndim < 3:
        raise ShapeError(f"nearest_upsample2x: need >= 3 axes, got {x.shape}")
    v = x.values
    lead = v.shape[:-3]
    X, Y, D = v.shape[-3:]
    expanded = np.broadcast_to(
        v[..., :, None, :, None, :, None],
        lead + (X, 2, Y, 2, D, 2),
    )
    out = expanded.reshape(lead + (2 * X, 2 * Y, 2 * D))

    def back(g):
        return g.reshape(lead + (X, 2, Y, 2, D, 2)).sum(axis=(-5, -3, -1))

    return _result(np.ascontiguousarray(out), [(x, back)], "nearest_upsample2x")


def concat(tensors: list[GridTensor], axis: int = 0) -> GridTensor:
    if not tensors:
        raise ValidationError("concat of nothing")
    out = np.concatenate([t.values for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def make_back(i):
        sl = [slice(None)] * out.ndim
        sl[axis] = slice(int(bounds[i]), int(bounds[i + 1]))
        sl = tuple(sl)
        return lambda g: g[sl]

    return _result(out, [(t, make_back(i)) for i, t in enumerate(tensors)], "concat")


def matmul(a: GridTensor, b: GridTensor) -> GridTensor:
    av, bv = a.values, b.values
    if av.ndim < 2 or bv.ndim < 2 or av.ndim != bv.ndim or av.shape[:-2] != bv.shape[:-2] \
            or av.shape[-1] != bv.shape[-2]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} incompatible")
    out = av @ bv

    def back_a(g):
        return g.astype(bv.dtype, copy=False) @ bv.swapaxes(-1, -2)

    def back_b(g):
        return av.swapaxes(-1, -2) @ g.astype(av.dtype, copy=False)

    return _result(out, [(a, back_a), (b, back_b)], "matmul")


def reshape(x: GridTensor, shape) -> GridTensor:
    old = x.shape
    out = x.values.reshape(shape)
    return _result(out, [(x, lambda g: g.reshape(old))], "reshape")


def transpose(x: GridTensor, axes) -> GridTensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _result(x.values.transpose(axes), [(x, lambda g: g.transpose(inv))], "transpose")


def gather(x: GridTensor, indices, axis: int = 0) -> GridTensor:
    """Take rows along ``axis``; adjoint of :func:`scatter_add`."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError("gather: indices must be 1-D (flatten first)")
    n = x.shape[axis]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValidationError(f"gather: index out of range for axis size {n}")
    out = np.take(x.values, idx, axis=axis)
    xshape = x.shape

    def back(g):
        gx = np.zeros(xshape, dtype=np.float64)
        if axis == 0 and gx.ndim == 1:
            return np.bincount(idx, weights=g, minlength=n)
        gxm = np.moveaxis(gx, axis, 0)
        np.add.at(gxm, idx, np.moveaxis(g, axis, 0))
        return gx

    return _result(out, [(x, back)], "gather")


def scatter_add(x: GridTensor, indices, size: int) -> GridTensor:
    """Sum rows of x into an output of leading dimension ``size``.

    ``x`` has shape (M, ...) and ``indices`` shape (M,); duplicate indices
    accumulate. Adjoint of :func:`gather` along axis 0.
    """
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1 or idx.shape[0] != x.shape[0]:
        raise ShapeError(f"scatter_add: indices {idx.shape} do not match input {x.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= size):
        raise ValidationError(f"scatter_add: index out of range for size {size}")
    if x.values.ndim == 1:
        out = np.bincount(idx, weights=x.values.astype(np.float64),
                          minlength=size).astype(x.dtype)
    else:
        out = np.zeros((size,) + x.shape[1:], dtype=x.dtype)
        np.add.at(out, idx, x.values)

    def back(g):
        return np.take(g, idx, axis=0)

    return _result(out, [(x, back)], "scatter_add")


def tensor_sum(x: GridTensor, axis=None, keepdims: bool = False) -> GridTensor:
    out = x.values.sum(axis=axis, keepdims=keepdims)
    xshape = x.shape

    def back(g):
        if axis is None:
            return np.broadcast_to(g.reshape((1,) * len(xshape)), xshape).copy()
        g2 = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(g2, xshape).copy()

    return _result(np.asarray(out, dtype=x.dtype), [(x, back)], "sum")


def tensor_mean(x: GridTensor, axis=None) -> GridTensor:
    count = x.size if axis is None else x.shape[axis]
    return scale(tensor_sum(x, axis=axis), 1.0 / count)


def weighted_sum(values: GridTensor, weights: GridTensor, axis: int = -1) -> GridTensor:
    """Compositing primitive: sum(values * weights) along one axis."""
    _same_shape("weighted_sum", values, weights)
    vv, wv = values.values, weights.values
    out = (vv * wv).sum(axis=axis)

    def back_v(g):
        return np.expand_dims(g, axis) * wv

    def back_w(g):
        return np.expand_dims(g, axis) * vv

    return _result(out, [(values, back_v), (weights, back_w)], "weighted_sum")


def linear(x: GridTensor, weight: GridTensor, bias: GridTensor | None = None) -> GridTensor:
    """Affine map on the last axis: x @ weight + bias."""
    if x.values.ndim != 2 or weight.values.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeError(f"linear: shapes {x.shape} and {weight.shape} incompatible")
    out = x.values @ weight.values
    if bias is not None:
        if bias.shape != (weight.shape[1],):
            raise ShapeError(f"linear: bias must have shape ({weight.shape[1]},)")
        out = out + bias.values
    xv, wv = x.values, weight.values
    pairs = [
        (x, lambda g: g.astype(wv.dtype, copy=False) @ wv.T),
        (weight, lambda g: xv.T @ g.astype(xv.dtype, copy=False)),
    ]
    if bias is not None:
        pairs.append((bias, lambda g: g.sum(axis=0)))
    return _result(out, pairs, "linear")


def pad3d(x: GridTensor, pads: tuple[int, int, int]) -> GridTensor:
    """Zero-pad the last three axes by (0, pad) each (right-side padding)."""
    px, py, pz = pads
    spec = [(0, 0)] * (x.values.ndim - 3) + [(0, px), (0, py), (0, pz)]
    out = np.pad(x.values, spec)
    X, Y, D = x.shape[-3:]

    def back(g):
        return g[..., :X, :Y, :D]

    return _result(out, [(x, back)], "pad3d")


def crop3d(x: GridTensor, sizes: tuple[int, int, int]) -> GridTensor:
    """Keep the leading ``sizes`` cells of the last three axes."""
    sx, sy, sz = sizes
    out = x.values[..., :sx, :sy, :sz]
    X, Y, D = x.shape[-3:]
    lead = x.shape[:-3]

    def back(g):
        gx = np.zeros(lead + (X, Y, D), dtype=np.float64)
        gx[..., :sx, :sy, :sz] = g
        return gx

    return _result(np.ascontiguousarray(out), [(x, back)], "crop3d")


def bce_with_logits(logits: GridTensor, targets: GridTensor) -> GridTensor:
    """Element-wise binary cross-entropy on logits, stable form.

    loss = max(l, 0) - l*y + log(1 + exp(-|l|)); backward is sigmoid(l) - y.
    """
    _same_shape("bce_with_logits", logits, targets)
    l = logits.values
    y = targets.values
    out = np.maximum(l, 0) - l * y + np.log1p(np.exp(-np.abs(l)))

    def back_l(g):
        return g * (_sigmoid_np(l.astype(np.float64)) - y)

    def back_y(g):
        return g * (-l.astype(np.float64))

    return _result(out, [(logits, back_l), (targets, back_y)], "bce_with_logits")
