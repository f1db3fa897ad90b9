"""IncepFormerNet: channel fusion, multi-scale temporal module, encoder, classifier."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import (
    Tensor,
    batchnorm1d,
    concat,
    conv1d,
    dense,
    dropout,
    elu,
    layernorm,
    log_softmax,
    matmul,
    maxpool1d,
    multi_head_attention,
    reshape,
    transpose,
)
from ..errors import ConfigError, DimensionError
from .config import ModelConfig


@dataclass
class ModelParams:
    """Named learnable tensors plus non-learnable BatchNorm buffers."""

    config: ModelConfig
    params: dict[str, Tensor] = field(default_factory=dict)
    buffers: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def l2_weights(self) -> list[Tensor]:
        """Convolution and dense weight matrices; biases, norms and embeddings excluded."""
        return [p for name, p in self.params.items() if name.rsplit(".", 1)[-1] in _L2_SUFFIXES]

    def n_parameters(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.config,
            {k: Tensor(v.data.copy(), requires_grad=v.requires_grad, name=k) for k, v in self.params.items()},
            {k: v.copy() for k, v in self.buffers.items()},
        )

    def expected_shapes(self) -> dict[str, tuple[int, ...]]:
        return dict(_parameter_shapes(self.config))


_L2_SUFFIXES = {"w", "wq", "wk", "wv", "wo"}


def _block_name(kind: str, j: int) -> str:
    return f"{kind}{j}"


def _parameter_shapes(cfg: ModelConfig):
    """Yield (name, shape) for every learnable tensor, in checkpoint order."""
    f = cfg.filters_per_block
    yield "fusion.w", (cfg.n_bands, cfg.n_channels, cfg.n_channels)
    for j, k in enumerate(cfg.block_kernels(), start=1):
        if j == 1 and not cfg.uses_x1():
            continue
        name = _block_name("scale", j)
        yield f"{name}.conv.w", (f, cfg.fused_channels, k)
        yield f"{name}.bn.gamma", (f,)
        yield f"{name}.bn.beta", (f,)
    for j, k in enumerate(cfg.chain_kernels(), start=1):
        name = _block_name("fuse", j)
        yield f"{name}.conv.w", (f, f if j == 1 else 2 * f, k)
        yield f"{name}.bn.gamma", (f,)
        yield f"{name}.bn.beta", (f,)
    d, h = cfg.d_model, cfg.ffn_hidden
    yield "former.proj.w", (d, cfg.temporal_channels)
    yield "former.proj.b", (d,)
    yield "former.pos", (cfg.positional_capacity, d)
    for layer in range(1, cfg.n_encoder_layers + 1):
        p = f"enc{layer}"
        for m in ("wq", "wk", "wv", "wo"):
            yield f"{p}.attn.{m}", (d, d)
        yield f"{p}.ln1.gamma", (d,)
        yield f"{p}.ln1.beta", (d,)
        yield f"{p}.ffn1.w", (h, d)
        yield f"{p}.ffn1.b", (h,)
        yield f"{p}.ffn2.w", (d, h)
        yield f"{p}.ffn2.b", (d,)
        yield f"{p}.ln2.gamma", (d,)
        yield f"{p}.ln2.beta", (d,)
    yield "cls.w", (cfg.n_classes, cfg.n_samples * d)
    yield "cls.b", (cfg.n_classes,)


def _fans(name: str, shape: tuple[int, ...]) -> tuple[int, int]:
    if name == "fusion.w":
        return shape[2], shape[1]
    if len(shape) == 3:
        return shape[1] * shape[2], shape[0] * shape[2]
    return shape[1], shape[0]


def init_params(config: ModelConfig, rng: np.random.Generator) -> ModelParams:
    """Glorot-uniform weights, zero biases, unit/zero norm affine, N(0, 0.02) positions."""
    params: dict[str, Tensor] = {}
    buffers: dict[str, np.ndarray] = {}
    for name, shape in _parameter_shapes(config):
        leaf = name.rsplit(".", 1)[-1]
        if leaf in _L2_SUFFIXES:
            fan_in, fan_out = _fans(name, shape)
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            value = rng.uniform(-limit, limit, size=shape)
        elif leaf == "gamma":
            value = np.ones(shape)
        elif name == "former.pos":
            value = rng.normal(0.0, 0.02, size=shape)
        else:
            value = np.zeros(shape)
        params[name] = Tensor(value, requires_grad=True, name=name)
        if name.endswith(".bn.gamma"):
            stem = name[: -len(".gamma")]
            buffers[f"{stem}.mean"] = np.zeros(shape)
            buffers[f"{stem}.var"] = np.ones(shape)
    return ModelParams(config, params, buffers)


@dataclass
class ForwardContext:
    train: bool
    rng: np.random.Generator | None = None
    attention: list[np.ndarray] = field(default_factory=list)


def channel_fusion_forward(x: Tensor, model: ModelParams) -> Tensor:
    """Per-band learned spatial mix: [batch, bands, ch, time] -> [batch, bands*ch, time]."""
    cfg = model.config
    if x.ndim != 4 or x.shape[1] != cfg.n_bands or x.shape[2] != cfg.n_channels:
        raise DimensionError(
            f"expected input [batch, {cfg.n_bands}, {cfg.n_channels}, time], got {list(x.shape)}"
        )
    mixed = matmul(model["fusion.w"], x)
    return reshape(mixed, (x.shape[0], cfg.fused_channels, x.shape[3]))


def scale_block_forward(x: Tensor, name: str, model: ModelParams, ctx: ForwardContext) -> Tensor:
    """Conv1D(same) -> BatchNorm -> ELU -> Dropout."""
    y = conv1d(x, model[f"{name}.conv.w"], None, padding="same")
    y = batchnorm1d(
        y,
        model[f"{name}.bn.gamma"],
        model[f"{name}.bn.beta"],
        model.buffers[f"{name}.bn.mean"],
        model.buffers[f"{name}.bn.var"],
        train=ctx.train,
        momentum=model.config.bn_momentum,
    )
    return dropout(elu(y), model.config.dropout, ctx.train, ctx.rng)


def temporal_module_forward(x_fused: Tensor, model: ModelParams, ctx: ForwardContext) -> Tensor:
    """Parallel scale blocks, cascaded fusion blocks and two pooling branches, concatenated on channels.

    With the default four blocks: x2_2 = F1(x2), x3_3 = F2([x2_2, x3]),
    x4_4 = F3([x3_3, x4]), output [x2, x2_2, x3_3, x4_4, pool, pool].
    """
    cfg = model.config
    k = cfg.n_scale_blocks
    branches = {}
    for j in range(1, k + 1):
        if j == 1 and not cfg.uses_x1():
            continue
        branches[j] = scale_block_forward(x_fused, _block_name("scale", j), model, ctx)
    pooled = maxpool1d(x_fused, cfg.pool_size, stride=1, padding="same")
    pool_pair = [pooled, maxpool1d(x_fused, cfg.pool_size, stride=1, padding="same")]

    if k == 1:
        parts = [branches[1]]
    else:
        chain = scale_block_forward(branches[2], _block_name("fuse", 1), model, ctx)
        parts = [branches[2], chain]
        for j in range(3, k + 1):
            chain = scale_block_forward(concat([chain, branches[j]], axis=1), _block_name("fuse", j - 1), model, ctx)
            parts.append(chain)
        if cfg.include_x1_in_concat:
            parts.insert(0, branches[1])
    parts.extend(pool_pair)
    length = x_fused.shape[2]
    if any(p.shape[2] != length for p in parts):
        raise AssertionError("temporal branches disagree on time length")
    return concat(parts, axis=1)


def former_module_forward(x: Tensor, model: ModelParams, ctx: ForwardContext) -> Tensor:
    """[batch, ch_cat, time] -> [batch, time, d_model] through the encoder stack."""
    cfg = model.config
    length = x.shape[2]
    if length > cfg.positional_capacity:
        raise ConfigError(f"input has {length} time steps but positional capacity is {cfg.positional_capacity}")
    h = dense(transpose(x, (0, 2, 1)), model["former.proj.w"], model["former.proj.b"])
    h = h + model["former.pos"][:length]
    for layer in range(1, cfg.n_encoder_layers + 1):
        p = f"enc{layer}"
        attn = multi_head_attention(
            h, model[f"{p}.attn.wq"], model[f"{p}.attn.wk"], model[f"{p}.attn.wv"], model[f"{p}.attn.wo"],
            cfg.n_heads, return_weights=True,
        )
        ctx.attention.append(attn[1])
        h = layernorm(h + attn[0], model[f"{p}.ln1.gamma"], model[f"{p}.ln1.beta"])
        ff = elu(dense(h, model[f"{p}.ffn1.w"], model[f"{p}.ffn1.b"]))
        ff = dense(dropout(ff, cfg.ffn_dropout, ctx.train, ctx.rng), model[f"{p}.ffn2.w"], model[f"{p}.ffn2.b"])
        h = layernorm(h + ff, model[f"{p}.ln2.gamma"], model[f"{p}.ln2.beta"])
    return h


def flatten_features(x: Tensor) -> Tensor:
    return reshape(x, (x.shape[0], x.shape[1] * x.shape[2]))


def classifier_forward(x: Tensor, model: ModelParams) -> Tensor:
    """Flatten [batch, time, d_model] and map to class logits."""
    flat = flatten_features(x)
    if flat.shape[1] != model["cls.w"].shape[1]:
        raise ConfigError(
            f"classifier expects {model['cls.w'].shape[1]} features ({model.config.n_samples} samples), "
            f"got {flat.shape[1]}"
        )
    return dense(flat, model["cls.w"], model["cls.b"])


def model_forward(
    x,
    model: ModelParams,
    train: bool = False,
    rng: np.random.Generator | None = None,
    ctx: ForwardContext | None = None,
    return_features: bool = False,
):
    """Logits for a batch of sub-band epochs [batch, bands, channels, time].

    Train mode draws dropout masks from ``rng`` and updates BatchNorm running
    statistics; eval mode is a pure function of (params, input).
    """
    ctx = ctx or ForwardContext(train=train, rng=rng)
    x = x if isinstance(x, Tensor) else Tensor(x)
    fused = channel_fusion_forward(x, model)
    temporal = temporal_module_forward(fused, model, ctx)
    encoded = former_module_forward(temporal, model, ctx)
    logits = classifier_forward(encoded, model)
    if return_features:
        return logits, flatten_features(encoded).data
    return logits


def predict_logits(model: ModelParams, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Eval-mode logits, computed in batches without recording a tape."""
    out = [model_forward(x[i:i + batch_size], model).data for i in range(0, len(x), batch_size)]
    return np.concatenate(out, axis=0) if out else np.zeros((0, model.config.n_classes))


def predict_proba(model: ModelParams, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
    return np.exp(log_softmax(predict_logits(model, x, batch_size)))


def extract_features(model: ModelParams, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Flattened encoder output (the classifier's input) per trial, eval mode."""
    feats = [model_forward(x[i:i + batch_size], model, return_features=True)[1] for i in range(0, len(x), batch_size)]
    return np.concatenate(feats, axis=0)
