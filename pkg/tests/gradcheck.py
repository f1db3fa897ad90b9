"""Central finite-difference oracle, independent of the tape machinery."""

import numpy as np

from incepformer.autodiff import (
    Tape,
    Tensor,
    backward,
    batchnorm1d,
    concat,
    conv1d,
    cross_entropy_loss,
    dense,
    dropout,
    elu,
    layernorm,
    maxpool1d,
    multi_head_attention,
    scaled_dot_attention,
    softmax,
)
from incepformer.model import ModelConfig, init_params, model_forward


def numeric_grad(fn, arrays, index, h=1e-5):
    """d fn / d arrays[index] by central differences; fn maps ndarrays to a float."""
    base = [a.copy() for a in arrays]
    target = base[index]
    grad = np.zeros_like(target)
    it = np.nditer(target, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = target[i]
        target[i] = orig + h
        plus = fn(base)
        target[i] = orig - h
        minus = fn(base)
        target[i] = orig
        grad[i] = (plus - minus) / (2 * h)
    return grad


def analytic_grads(build, arrays):
    """Run ``build`` (Tensors -> scalar Tensor) on a tape and return input grads."""
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    with Tape() as tape:
        loss = build(tensors)
    return backward(tape, loss, tensors)


def relative_error(a, b):
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


def check_gradients(build, arrays, h=1e-5):
    """Largest relative error between analytic and numeric gradients over all inputs."""
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]

    def scalar(arrs):
        return float(build([Tensor(a) for a in arrs]).data)

    grads = analytic_grads(build, arrays)
    return max(relative_error(g, numeric_grad(scalar, arrays, i, h)) for i, g in enumerate(grads))


def projected(out, seed=0):
    """Fixed random linear functional of ``out`` so every output entry matters."""
    weights = np.random.default_rng(seed).normal(size=out.shape)
    return (out * Tensor(weights)).sum()


GRAD_SEEDS = range(20)


def _conv_case(rng):
    k = int(rng.integers(1, 9))
    arrays = [rng.normal(size=(2, 3, 12)), rng.normal(size=(4, 3, k)), rng.normal(size=4)]
    return arrays, lambda ts: projected(conv1d(*ts))


def _pool_case(rng):
    return [rng.normal(size=(2, 3, 9))], lambda ts: projected(maxpool1d(ts[0], 2))


def _dense_case(rng):
    arrays = [rng.normal(size=(3, 4, 5)), rng.normal(size=(6, 5)), rng.normal(size=6)]
    return arrays, lambda ts: projected(dense(*ts))


def _bn_train_case(rng):
    arrays = [rng.normal(size=(3, 4, 6)), rng.normal(size=4), rng.normal(size=4)]
    return arrays, lambda ts: projected(batchnorm1d(*ts, np.zeros(4), np.ones(4), train=True))


def _bn_eval_case(rng):
    rm, rv = rng.normal(size=4), rng.uniform(0.5, 2, size=4)
    arrays = [rng.normal(size=(3, 4, 6)), rng.normal(size=4), rng.normal(size=4)]
    return arrays, lambda ts: projected(batchnorm1d(*ts, rm.copy(), rv.copy(), train=False))


def _ln_case(rng):
    arrays = [rng.normal(size=(2, 3, 6)), rng.normal(size=6), rng.normal(size=6)]
    return arrays, lambda ts: projected(layernorm(*ts))


def _elu_case(rng):
    x = rng.normal(size=(4, 5))
    x[np.abs(x) < 1e-3] += 0.01
    return [x], lambda ts: projected(elu(ts[0]))


def _dropout_case(rng):
    seed = int(rng.integers(1 << 30))
    return [rng.normal(size=(4, 5))], lambda ts: projected(dropout(ts[0], 0.5, True, np.random.default_rng(seed)))


def _softmax_case(rng):
    return [rng.normal(size=(3, 7))], lambda ts: projected(softmax(ts[0]))


def _mha_case(rng):
    arrays = [rng.normal(size=(2, 5, 8))] + [rng.normal(size=(8, 8)) * 0.5 for _ in range(4)]
    return arrays, lambda ts: projected(multi_head_attention(*ts, n_heads=4))


def _sdpa_case(rng):
    arrays = [rng.normal(size=(2, 3, 5, 4)) for _ in range(3)]
    return arrays, lambda ts: projected(scaled_dot_attention(*ts)[0])


def _ce_case(rng):
    labels = rng.integers(0, 6, size=4)
    arrays = [rng.normal(size=(4, 6)), rng.normal(size=(3, 3))]
    return arrays, lambda ts: cross_entropy_loss(ts[0], labels, l2_weights=[ts[1]], l2_coeff=0.01)


def _concat_reshape_case(rng):
    arrays = [rng.normal(size=(2, 3, 4)), rng.normal(size=(2, 2, 4))]
    return arrays, lambda ts: projected(concat(ts, axis=1).reshape(2, 20).transpose(1, 0)[3:9])


LAYER_CASES = {
    "conv1d": _conv_case,
    "maxpool1d": _pool_case,
    "dense": _dense_case,
    "batchnorm_train": _bn_train_case,
    "batchnorm_eval": _bn_eval_case,
    "layernorm": _ln_case,
    "elu": _elu_case,
    "dropout": _dropout_case,
    "softmax": _softmax_case,
    "attention": _mha_case,
    "scaled_dot_attention": _sdpa_case,
    "cross_entropy": _ce_case,
    "concat_reshape": _concat_reshape_case,
}


TINY_MODEL = dict(n_samples=32, filters_per_block=4, d_model=8, ffn_hidden=16, n_classes=5)


def model_gradient_error(seed, n_directions=3, h=1e-5):
    """Worst per-tensor relative error of directional finite differences through the whole network.

    Runs in train mode (dropout masks fixed by reseeding) on the tiny
    configuration; the block count and x1 flag vary with the seed so the
    ablation wirings are covered too. Each parameter tensor is probed along
    ``n_directions`` random unit directions.
    """
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(**TINY_MODEL, n_scale_blocks=[4, 1, 2, 5, 6][seed % 5], include_x1_in_concat=seed % 3 == 0)
    model = init_params(cfg, rng)
    x = rng.normal(size=(3, cfg.n_bands, cfg.n_channels, cfg.n_samples))
    y = rng.integers(0, cfg.n_classes, size=3)

    def run():
        logits = model_forward(x, model, train=True, rng=np.random.default_rng(seed))
        return cross_entropy_loss(logits, y, model.l2_weights(), 1e-2)

    tensors = list(model.params.values())
    with Tape() as tape:
        loss = run()
    grads = backward(tape, loss, tensors)
    worst = 0.0
    for p, g in zip(tensors, grads):
        analytic, numeric = [], []
        for _ in range(n_directions):
            d = rng.normal(size=p.shape)
            d /= np.linalg.norm(d)
            base = p.data.copy()
            p.data = base + h * d
            plus = run().item()
            p.data = base - h * d
            minus = run().item()
            p.data = base
            analytic.append(float(np.sum(g * d)))
            numeric.append((plus - minus) / (2 * h))
        worst = max(worst, relative_error(np.array(analytic), np.array(numeric)))
    return worst
