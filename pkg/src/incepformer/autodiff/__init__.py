"""Minimal float64 tensor engine with reverse-mode autodiff and the kernels the network needs."""

from .layers import (
    batchnorm1d,
    conv1d,
    cross_entropy_loss,
    dense,
    dropout,
    elu,
    l2_penalty,
    layernorm,
    log_softmax,
    maxpool1d,
    multi_head_attention,
    scaled_dot_attention,
    softmax,
)
from .optim import AdamState, adam_step
from .tensor import Tape, Tensor, add, backward, concat, matmul, mul, reshape, sub, transpose

__all__ = [
    "AdamState",
    "Tape",
    "Tensor",
    "adam_step",
    "add",
    "backward",
    "batchnorm1d",
    "concat",
    "conv1d",
    "cross_entropy_loss",
    "dense",
    "dropout",
    "elu",
    "l2_penalty",
    "layernorm",
    "log_softmax",
    "matmul",
    "maxpool1d",
    "mul",
    "multi_head_attention",
    "scaled_dot_attention",
    "reshape",
    "softmax",
    "sub",
    "transpose",
]
