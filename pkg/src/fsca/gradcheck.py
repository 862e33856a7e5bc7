"""Finite-difference verification of every hand-written backward pass.

The harness perturbs one tensor entry at a time and compares the central
difference of a random linear probe J = sum(r * y) against the analytic
gradient. Errors are normalized by the largest gradient magnitude seen for
the tensor, so the metric reads as a relative error on the dominant scale.

``run_suite`` covers each primitive op, the composite blocks, and the
end-to-end loss of a small model; the CLI exposes it as a build check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import AttentionConfig, CirmConfig, LstmConfig, ModelConfig, TcnConfig
from .extractor import init_tcn_block, tcn_block, tcn_block_backward
from .fusion import fsca_backward, fsca_forward, init_fsca
from .mask import Cirm
from .model import init_params, predict_mask, predict_mask_backward
from .ops import (
    Parameter,
    depthwise_dilated_conv,
    depthwise_dilated_conv_backward,
    global_layer_norm,
    global_layer_norm_backward,
    init_lstm,
    linear,
    linear_backward,
    lstm_layer,
    lstm_layer_backward,
    multi_head_attention,
    multi_head_attention_backward,
    pointwise_conv,
    pointwise_conv_backward,
    prelu,
    prelu_backward,
    relu,
    relu_backward,
    softmax_rows,
    softmax_rows_backward,
)
from .subband_model import init_subband, subband_backward, subband_forward
from .train import cirm_mse_loss_grad

# Floor for the normalization scale; gradients this small are noise-level.
_SCALE_FLOOR = 1e-8


def grad_check(forward, arrs=(), params=(), rng=None, h: float = 1e-5,
               max_entries: int = 48, total_entries: int = None) -> float:
    """Worst normalized |analytic - central difference| over sampled entries.

    ``forward(*arrs) -> (y, pullback)`` where ``pullback(dy)`` returns the
    gradients of ``arrs`` (None entries are skipped) and accumulates into
    each Parameter's ``.grad``. ``max_entries`` samples per tensor;
    ``total_entries`` instead samples a global budget across all tensors.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    arrs = [np.ascontiguousarray(a, dtype=np.float64) for a in arrs]
    y0, pullback = forward(*arrs)
    r = rng.standard_normal(np.shape(y0))
    for p in params:
        p.zero_grad()
    in_grads = pullback(r)
    if in_grads is None:
        in_grads = ()
    if isinstance(in_grads, np.ndarray):
        in_grads = (in_grads,)
    targets = [(a, g) for a, g in zip(arrs, in_grads) if g is not None]
    targets += [(p.value, p.grad.copy()) for p in params]

    def objective() -> float:
        y, _ = forward(*arrs)
        return float(np.sum(r * y))

    def diff_at(flat, i) -> float:
        orig = flat[i]
        flat[i] = orig + h
        jp = objective()
        flat[i] = orig - h
        jm = objective()
        flat[i] = orig
        return (jp - jm) / (2.0 * h)

    # Central differences cannot resolve slopes below the rounding noise of
    # the objective over the 2h baseline. Entries where both sides sit under
    # that resolution are structural zeros (e.g. a bias that cancels inside a
    # softmax) and count as matching.
    eps = np.finfo(np.float64).eps
    resolution = 256.0 * eps * max(1.0, abs(objective())) / (2.0 * h)

    def zero_pairs(ana, num) -> np.ndarray:
        return (np.abs(ana) < resolution) & (np.abs(num) < resolution)

    worst = 0.0
    if total_entries is not None:
        sizes = np.array([a.size for a, _ in targets])
        picks = rng.choice(int(sizes.sum()), size=min(total_entries, int(sizes.sum())),
                           replace=False)
        bounds = np.cumsum(sizes)
        ana, num = [], []
        for pick in picks:
            ti = int(np.searchsorted(bounds, pick, side="right"))
            off = int(pick - (bounds[ti - 1] if ti else 0))
            a, g = targets[ti]
            num.append(diff_at(a.ravel(), off))
            ana.append(g.ravel()[off])
        ana = np.array(ana)
        num = np.array(num)
        diff = np.where(zero_pairs(ana, num), 0.0, np.abs(ana - num))
        scale = max(float(np.max(np.abs(ana))), float(np.max(np.abs(num))), _SCALE_FLOOR)
        return float(np.max(diff) / scale)

    for a, g in targets:
        flat = a.ravel()
        if flat.size > max_entries:
            idxs = rng.choice(flat.size, size=max_entries, replace=False)
        else:
            idxs = np.arange(flat.size)
        num = np.array([diff_at(flat, int(i)) for i in idxs])
        ana = g.ravel()[idxs]
        diff = np.where(zero_pairs(ana, num), 0.0, np.abs(ana - num))
        scale = max(float(np.max(np.abs(g))), float(np.max(np.abs(num))), _SCALE_FLOOR)
        worst = max(worst, float(np.max(diff) / scale))
    return worst


def _away_from_zero(x: np.ndarray, margin: float = 0.05) -> np.ndarray:
    # Keep kinked activations differentiable at every probed point.
    return x + np.where(x >= 0.0, margin, -margin)


def check_linear(rng) -> float:
    w = Parameter("w", rng.standard_normal((4, 3)))
    b = Parameter("b", rng.standard_normal(3))

    def fwd(x):
        y, cache = linear(x, w, b)
        return y, lambda dy: (linear_backward(dy, cache),)

    return grad_check(fwd, [rng.standard_normal((5, 4))], [w, b], rng=rng)


def check_pointwise_conv(rng) -> float:
    w = Parameter("w", rng.standard_normal((4, 3)))
    b = Parameter("b", rng.standard_normal(3))

    def fwd(x):
        y, cache = pointwise_conv(x, w, b)
        return y, lambda dy: (pointwise_conv_backward(dy, cache),)

    return grad_check(fwd, [rng.standard_normal((4, 6))], [w, b], rng=rng)


def check_ddconv(rng) -> float:
    kernel = Parameter("k", rng.standard_normal((3, 3)))

    def fwd(x):
        y, cache = depthwise_dilated_conv(x, kernel, 2)
        return y, lambda dy: (depthwise_dilated_conv_backward(dy, cache),)

    return grad_check(fwd, [rng.standard_normal((3, 12))], [kernel], rng=rng)


def check_relu(rng) -> float:
    def fwd(x):
        y, cache = relu(x)
        return y, lambda dy: (relu_backward(dy, cache),)

    return grad_check(fwd, [_away_from_zero(rng.standard_normal((4, 7)))], rng=rng)


def check_prelu(rng) -> float:
    alpha = Parameter("alpha", rng.uniform(0.1, 0.5, size=3))

    def fwd(x):
        y, cache = prelu(x, alpha)
        return y, lambda dy: (prelu_backward(dy, cache),)

    return grad_check(fwd, [_away_from_zero(rng.standard_normal((3, 7)))], [alpha], rng=rng)


def check_softmax(rng) -> float:
    def fwd(x):
        y, cache = softmax_rows(x)
        return y, lambda dy: (softmax_rows_backward(dy, cache),)

    return grad_check(fwd, [rng.standard_normal((5, 6))], rng=rng)


def check_gln(rng) -> float:
    gamma = Parameter("gamma", rng.uniform(0.5, 1.5, size=4))
    beta = Parameter("beta", rng.standard_normal(4))

    def fwd(x):
        y, cache = global_layer_norm(x, gamma, beta)
        return y, lambda dy: (global_layer_norm_backward(dy, cache),)

    return grad_check(fwd, [rng.standard_normal((4, 6))], [gamma, beta], rng=rng)


def check_lstm(rng) -> float:
    p = init_lstm(rng, "lstm", 3, 4)
    for q in (p.w_x, p.w_h, p.b):
        q.value += 0.1 * rng.standard_normal(q.value.shape)

    def fwd(x):
        y, cache = lstm_layer(x, p)
        return y, lambda dy: (lstm_layer_backward(dy, cache)[0],)

    return grad_check(fwd, [rng.standard_normal((5, 3))], p.parameters(), rng=rng)


def check_mha(rng) -> float:
    w_o = Parameter("w_o", rng.standard_normal((6, 4)))
    b_o = Parameter("b_o", rng.standard_normal(4))

    def fwd(q, k, v):
        y, cache = multi_head_attention(q, k, v, 2, w_o, b_o, mask="full")
        return y, lambda dy: multi_head_attention_backward(dy, cache)

    arrs = [rng.standard_normal((5, 6)) for _ in range(3)]
    return grad_check(fwd, arrs, [w_o, b_o], rng=rng)


def check_tcn_block(rng) -> float:
    p = init_tcn_block(rng, "blk", 3, 4, 3, 2)
    p.in_b.value += 0.1 * rng.standard_normal(4)
    p.beta1.value += 0.1 * rng.standard_normal(4)

    def fwd(x):
        y, cache = tcn_block(x, p)
        return y, lambda dy: (tcn_block_backward(dy, cache),)

    return grad_check(fwd, [rng.standard_normal((3, 6))], p.parameters(), rng=rng)


def check_fsca(rng) -> float:
    p = init_fsca(rng, "fsca", n_freq=6, width=3, d_model=4, heads=2, ffn_ratio=2)

    def fwd(unit, g):
        y, cache = fsca_forward(unit, g, p)
        return y, lambda dy: fsca_backward(dy, cache)

    arrs = [rng.standard_normal((3, 3)), rng.standard_normal((6, 3))]
    return grad_check(fwd, arrs, p.parameters(), rng=rng)


def check_subband(rng) -> float:
    p = init_subband(rng, "sub", d_in=3, hidden=5, layers=2)

    def fwd(emb):
        y, cache = subband_forward(emb, p)
        return y, lambda dy: (subband_backward(dy, cache),)

    return grad_check(fwd, [rng.standard_normal((3, 4))], p.parameters(), rng=rng)


def check_cirm_mse_loss(rng) -> float:
    target = Cirm(rng.standard_normal((4, 5)), rng.standard_normal((4, 5)),
                  compressed=True)

    def fwd(pr, pi):
        loss, (dr, di) = cirm_mse_loss_grad(Cirm(pr, pi, compressed=True), target)

        def pull(dy):
            scale = float(dy)
            return dr * scale, di * scale

        return np.array(loss), pull

    arrs = [rng.standard_normal((4, 5)), rng.standard_normal((4, 5))]
    return grad_check(fwd, arrs, rng=rng)


def small_model_config(fusion_mode: str = "attention") -> ModelConfig:
    """Small config shared by the end-to-end checks and training tests."""
    return ModelConfig(
        sample_rate=16000, n_fft=64, hop=32, n=2,
        tcn=TcnConfig(groups=1, blocks_per_group=2, kernel=3, dilations=(1, 2), hidden=16),
        attention=AttentionConfig(heads=2, d_model=16, mask="full", ffn_ratio=4),
        lstm=LstmConfig(hidden=16, layers=2),
        cirm=CirmConfig(),
        fusion_mode=fusion_mode,
    )


def check_end_to_end(rng, fusion_mode: str = "attention", total_entries: int = 20) -> float:
    cfg = small_model_config(fusion_mode)
    params = init_params(cfg, seed=int(rng.integers(1 << 31)))
    t_frames = 12
    mag = np.abs(rng.standard_normal((cfg.n_freq, t_frames))
                 + 1j * rng.standard_normal((cfg.n_freq, t_frames)))
    target = Cirm(rng.uniform(-1, 1, (cfg.n_freq, t_frames)),
                  rng.uniform(-1, 1, (cfg.n_freq, t_frames)), compressed=True)

    def fwd():
        pred, cache = predict_mask(mag, params)
        loss, (dr, di) = cirm_mse_loss_grad(pred, target)

        def pull(dy):
            scale = float(dy)
            predict_mask_backward(dr * scale, di * scale, params, cache)
            return ()

        return np.array(loss), pull

    return grad_check(fwd, [], params.parameters(), rng=rng,
                      total_entries=total_entries)


@dataclass
class SuiteResult:
    name: str
    worst: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.worst <= self.tolerance


SUITE = [
    ("linear", 1e-6, check_linear),
    ("pointwise_conv", 1e-6, check_pointwise_conv),
    ("depthwise_dilated_conv", 1e-6, check_ddconv),
    ("relu", 1e-6, check_relu),
    ("prelu", 1e-6, check_prelu),
    ("softmax_rows", 1e-6, check_softmax),
    ("global_layer_norm", 1e-5, check_gln),
    ("lstm_layer", 1e-5, check_lstm),
    ("multi_head_attention", 1e-5, check_mha),
    ("tcn_block", 1e-4, check_tcn_block),
    ("fsca_forward", 1e-4, check_fsca),
    ("subband_forward", 1e-5, check_subband),
    ("cirm_mse_loss", 1e-8, check_cirm_mse_loss),
    ("end_to_end_loss", 1e-4, check_end_to_end),
]


def run_suite(seed: int = 0, rounds: int = 3):
    """Each op checked over ``rounds`` derived seeds; returns SuiteResults."""
    results = []
    for name, tol, fn in SUITE:
        worst = 0.0
        for i in range(rounds):
            rng = np.random.default_rng([seed, i, len(name)])
            worst = max(worst, fn(rng))
        results.append(SuiteResult(name=name, worst=worst, tolerance=tol))
    return results
