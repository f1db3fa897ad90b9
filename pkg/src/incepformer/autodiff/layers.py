"""Differentiable layer kernels used by the network.

All kernels take and return :class:`Tensor` objects and record a single tape
node each, except :func:`multi_head_attention`, which is composed from
projections, reshapes and the fused :func:`scaled_dot_attention` node.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError, DimensionError, NumericalError
from .tensor import Tensor, as_tensor, record, reshape, transpose


def _same_pads(length: int, size: int, stride: int) -> tuple[int, int]:
    out_len = -(-length // stride)
    total = max((out_len - 1) * stride + size - length, 0)
    return total // 2, total - total // 2


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None, padding: str = "same", stride: int = 1) -> Tensor:
    """1-D cross-correlation of ``x`` [batch, ch_in, time] with ``weight`` [ch_out, ch_in, k].

    ``padding="same"`` zero-pads so the time axis is preserved (stride 1 only);
    for even kernels the extra pad goes on the right.
    """
    if x.ndim != 3 or weight.ndim != 3:
        raise DimensionError(f"conv1d expects 3-D input and weight, got {x.shape} and {weight.shape}")
    batch, ch_in, length = x.shape
    ch_out, w_in, k = weight.shape
    if w_in != ch_in:
        raise DimensionError(f"conv1d weight expects {w_in} input channels, input has {ch_in}")
    if k < 1 or stride < 1:
        raise ConfigError("kernel size and stride must be positive")
    if padding == "same":
        if stride != 1:
            raise ConfigError("same padding requires stride 1")
        left, right = (k - 1) // 2, k - 1 - (k - 1) // 2
    elif padding == "valid":
        left = right = 0
    else:
        raise ConfigError(f"unknown padding {padding!r}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (left, right))) if left or right else x.data
    if xp.shape[2] < k:
        raise DimensionError(f"input length {length} shorter than kernel {k} with valid padding")
    windows = sliding_window_view(xp, k, axis=2)[:, :, ::stride, :]
    out_len = windows.shape[2]
    cols = windows.transpose(0, 2, 1, 3).reshape(batch * out_len, ch_in * k)
    wmat = weight.data.reshape(ch_out, ch_in * k)
    y = (cols @ wmat.T).reshape(batch, out_len, ch_out).transpose(0, 2, 1)
    if bias is not None:
        y = y + bias.data[None, :, None]
    out = Tensor(np.ascontiguousarray(y))

    def back(g):
        g2 = g.transpose(0, 2, 1).reshape(batch * out_len, ch_out)
        gw = (g2.T @ cols).reshape(weight.shape)
        if stride == 1:
            # Input gradient is a full correlation of g with the flipped kernel,
            # evaluated only at the unpadded positions.
            gpad = np.pad(g, ((0, 0), (0, 0), (k - 1, k - 1)))
            gwin = sliding_window_view(gpad, k, axis=2)[:, :, left:left + length, :]
            gcols = gwin.transpose(0, 2, 1, 3).reshape(batch * length, ch_out * k)
            wflip = weight.data[:, :, ::-1].transpose(0, 2, 1).reshape(ch_out * k, ch_in)
            gx = (gcols @ wflip).reshape(batch, length, ch_in).transpose(0, 2, 1)
        else:
            gcols = (g2 @ wmat).reshape(batch, out_len, ch_in, k)
            gxp = np.zeros(xp.shape)
            span = stride * (out_len - 1) + 1
            for j in range(k):
                gxp[:, :, j:j + span:stride] += gcols[:, :, :, j].transpose(0, 2, 1)
            gx = gxp[:, :, left:left + length]
        gb = g.sum(axis=(0, 2)) if bias is not None else None
        return gx, gw, gb

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return record(out, inputs, lambda g: back(g)[: len(inputs)])


def maxpool1d(x: Tensor, pool_size: int, stride: int = 1, padding: str = "same") -> Tensor:
    """Max over sliding windows along time; pads with -inf."""
    if pool_size < 1 or stride < 1:
        raise ConfigError("pool_size and stride must be positive")
    if x.ndim != 3:
        raise DimensionError(f"maxpool1d expects [batch, ch, time], got {x.shape}")
    length = x.shape[2]
    if padding == "same":
        left, right = _same_pads(length, pool_size, stride)
    elif padding == "valid":
        left = right = 0
    else:
        raise ConfigError(f"unknown padding {padding!r}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (left, right)), constant_values=-np.inf)
    windows = sliding_window_view(xp, pool_size, axis=2)[:, :, ::stride, :]
    idx = windows.argmax(axis=-1)
    out = Tensor(np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0])
    out_len = out.shape[2]

    def back(g):
        gxp = np.zeros(xp.shape)
        span = stride * (out_len - 1) + 1
        for j in range(pool_size):
            gxp[:, :, j:j + span:stride] += np.where(idx == j, g, 0.0)
        return (gxp[:, :, left:left + length],)

    return record(out, (x,), back)


def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map over the last axis: ``x @ weight.T + bias`` with weight [out, in]."""
    if x.shape[-1] != weight.shape[1]:
        raise DimensionError(f"dense weight expects {weight.shape[1]} features, input has {x.shape[-1]}")
    y = x.data @ weight.data.T
    if bias is not None:
        if bias.shape != (weight.shape[0],):
            raise DimensionError(f"dense bias shape {bias.shape} does not match {weight.shape[0]} outputs")
        y = y + bias.data
    out = Tensor(y)

    def back(g):
        gx = g @ weight.data
        g2 = g.reshape(-1, weight.shape[0])
        gw = g2.T @ x.data.reshape(-1, weight.shape[1])
        gb = g2.sum(axis=0) if bias is not None else None
        return gx, gw, gb

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return record(out, inputs, lambda g: back(g)[: len(inputs)])


def batchnorm1d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    train: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel normalization of [batch, ch, time] input.

    In train mode the batch statistics over (batch, time) are used and the
    running buffers are updated in place (unbiased variance, as in PyTorch).
    """
    if x.ndim != 3 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise DimensionError(f"batchnorm1d shape mismatch: input {x.shape}, gamma {gamma.shape}")
    g_ = gamma.data[None, :, None]
    if train:
        n = x.shape[0] * x.shape[2]
        if n < 2:
            raise NumericalError("batchnorm1d in train mode needs more than one value per channel")
        mean = x.data.mean(axis=(0, 2), keepdims=True)
        centered = x.data - mean
        var = (centered**2).mean(axis=(0, 2), keepdims=True)
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = centered * inv_std
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean.ravel()
        running_var *= 1.0 - momentum
        running_var += momentum * var.ravel() * n / (n - 1)
    else:
        inv_std = 1.0 / np.sqrt(running_var + eps)[None, :, None]
        xhat = (x.data - running_mean[None, :, None]) * inv_std
    out = Tensor(xhat * g_ + beta.data[None, :, None])

    def back(g):
        gxhat = g * g_
        if train:
            n = x.shape[0] * x.shape[2]
            gx = (inv_std / n) * (
                n * gxhat
                - gxhat.sum(axis=(0, 2), keepdims=True)
                - xhat * (gxhat * xhat).sum(axis=(0, 2), keepdims=True)
            )
        else:
            gx = gxhat * inv_std
        return gx, (g * xhat).sum(axis=(0, 2)), g.sum(axis=(0, 2))

    return record(out, (x, gamma, beta), back)


def layernorm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each position over the last axis."""
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError(f"layernorm parameters must have shape ({d},)")
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = Tensor(xhat * gamma.data + beta.data)

    def back(g):
        gxhat = g * gamma.data
        gx = (inv_std / d) * (
            d * gxhat - gxhat.sum(axis=-1, keepdims=True) - xhat * (gxhat * xhat).sum(axis=-1, keepdims=True)
        )
        lead = tuple(range(x.ndim - 1))
        return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return record(out, (x, gamma, beta), back)


def elu(x: Tensor, alpha: float = 1.0) -> Tensor:
    neg = alpha * np.expm1(np.minimum(x.data, 0.0))
    positive = x.data > 0
    out = Tensor(np.where(positive, x.data, neg))
    return record(out, (x,), lambda g: (g * np.where(positive, 1.0, neg + alpha),))


def dropout(x: Tensor, p: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; the identity in eval mode or when ``p == 0``."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must lie in [0, 1), got {p}")
    if not train or p == 0.0:
        return x
    if rng is None:
        raise ConfigError("train-mode dropout needs a random generator")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    out = Tensor(x.data * mask)
    return record(out, (x,), lambda g: (g * mask,))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s)
    return record(out, (x,), lambda g: (s * (g - (g * s).sum(axis=axis, keepdims=True)),))


def multi_head_attention(
    x: Tensor,
    w_q: Tensor,
    w_k: Tensor,
    w_v: Tensor,
    w_o: Tensor,
    n_heads: int,
    return_weights: bool = False,
):
    """Scaled dot-product self-attention over [batch, seq, d_model].

    The projection matrices are [d_model, d_model]; head ``h`` uses rows
    ``h*d_k:(h+1)*d_k`` of each of ``w_q``, ``w_k`` and ``w_v``.
    """
    batch, seq, d_model = x.shape
    if n_heads < 1 or d_model % n_heads:
        raise ConfigError(f"d_model={d_model} is not divisible by n_heads={n_heads}")
    d_k = d_model // n_heads

    def heads(w):
        return transpose(reshape(dense(x, w), (batch, seq, n_heads, d_k)), (0, 2, 1, 3))

    attended, weights = scaled_dot_attention(heads(w_q), heads(w_k), heads(w_v))
    context = reshape(transpose(attended, (0, 2, 1, 3)), (batch, seq, d_model))
    out = dense(context, w_o)
    return (out, weights) if return_weights else out


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor) -> tuple[Tensor, np.ndarray]:
    """``softmax(q k^T / sqrt(d_k)) v`` as one tape node; also returns the weights.

    Fusing the score, softmax and mixing steps avoids keeping several
    [..., seq, seq] intermediates alive for the backward pass.
    """
    if q.shape[-1] != k.shape[-1] or k.shape[:-1] != v.shape[:-1]:
        raise DimensionError(f"attention shapes disagree: q {q.shape}, k {k.shape}, v {v.shape}")
    scale = 1.0 / math.sqrt(q.shape[-1])
    scores = q.data @ np.swapaxes(k.data, -1, -2)
    scores *= scale
    scores -= scores.max(axis=-1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= scores.sum(axis=-1, keepdims=True)
    p = scores
    out = Tensor(p @ v.data)

    def back(g):
        gv = np.swapaxes(p, -1, -2) @ g
        gp = g @ np.swapaxes(v.data, -1, -2)
        gp -= (gp * p).sum(axis=-1, keepdims=True)
        gp *= p
        gp *= scale
        return gp @ k.data, np.swapaxes(gp, -1, -2) @ q.data, gv

    return record(out, (q, k, v), back), p


def cross_entropy_loss(
    logits: Tensor,
    labels,
    l2_weights: Sequence[Tensor] = (),
    l2_coeff: float = 0.0,
) -> Tensor:
    """Mean negative log-likelihood of ``labels`` plus ``l2_coeff * sum(||W||^2)``."""
    labels = np.asarray(labels, dtype=np.int64)
    batch, n_class = logits.shape
    if labels.shape != (batch,):
        raise DimensionError(f"expected {batch} labels, got shape {labels.shape}")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= n_class:
        raise DimensionError(f"labels must lie in [0, {n_class})")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    rows = np.arange(batch)
    nll = Tensor(-log_p[rows, labels].mean())

    def back(g):
        grad = np.exp(log_p)
        grad[rows, labels] -= 1.0
        return (g * grad / batch,)

    loss = record(nll, (logits,), back)
    if l2_coeff and l2_weights:
        loss = loss + l2_penalty(l2_weights, l2_coeff)
    return loss


def l2_penalty(weights: Sequence[Tensor], coeff: float) -> Tensor:
    weights = [as_tensor(w) for w in weights]
    out = Tensor(coeff * sum(float(np.sum(w.data**2)) for w in weights))
    return record(out, weights, lambda g: [2.0 * coeff * g * w.data for w in weights])


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
