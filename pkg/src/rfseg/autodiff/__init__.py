"""Minimal reverse-mode autodiff over dense grid tensors."""

from .gradcheck import GradCheckReport, grad_check
from .optim import Adam, Parameter, adam_step
from .ops import (
    add,
    as_tensor,
    bce_with_logits,
    concat,
    constant,
    conv3d,
    gather,
    layer_norm,
    linear,
    pad3d,
    crop3d,
    matmul,
    mul,
    nearest_upsample2x,
    neg,
    relu,
    reshape,
    scale,
    scatter_add,
    sigmoid,
    softmax,
    sub,
    tensor_mean,
    tensor_sum,
    transpose,
    weighted_sum,
)
from .tensor import GridTensor, Tape, active_tape, set_debug_finite

__all__ = [
    "GridTensor", "Tape", "active_tape", "set_debug_finite",
    "Parameter", "Adam", "adam_step",
    "GradCheckReport", "grad_check",
    "as_tensor", "constant",
    "add", "sub", "mul", "scale", "neg",
    "relu", "sigmoid", "softmax", "layer_norm", "linear", "pad3d", "crop3d",
    "conv3d", "nearest_upsample2x", "concat",
    "matmul", "reshape", "transpose",
    "gather", "scatter_add",
    "tensor_sum", "tensor_mean", "weighted_sum",
    "bce_with_logits",
]
