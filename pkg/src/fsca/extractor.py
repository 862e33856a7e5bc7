"""Fullband extractor: stacked dilated-TCN groups over the magnitude spectrogram.

The spectrogram [F, T] is treated as F channels. Each TCN block is a
bottleneck residual unit (pointwise in, depthwise dilated conv, pointwise
out) with PReLU + global layer norm after the first two convs. Blocks are
grouped; within a group the dilation grows per the configured schedule. A
final per-frame linear layer plus ReLU maps back to F channels, so the
output has exactly the input's shape.

Normalization uses chunk-global statistics, so the extractor is causal at
chunk granularity only. Forward passes accept frozen statistics so the
conv path's receptive field can be probed in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .ops import (
    Parameter,
    depthwise_dilated_conv,
    depthwise_dilated_conv_backward,
    global_layer_norm,
    global_layer_norm_backward,
    gln_stats,
    pointwise_conv,
    pointwise_conv_backward,
    prelu,
    prelu_backward,
    relu,
    relu_backward,
)


@dataclass
class TcnBlockParams:
    """One residual TCN block: C -> H -> (dilated depthwise) -> H -> C."""

    in_w: Parameter
    in_b: Parameter
    alpha1: Parameter
    gamma1: Parameter
    beta1: Parameter
    kernel: Parameter
    alpha2: Parameter
    gamma2: Parameter
    beta2: Parameter
    out_w: Parameter
    out_b: Parameter
    dilation: int

    def parameters(self):
        return [self.in_w, self.in_b, self.alpha1, self.gamma1, self.beta1,
                self.kernel, self.alpha2, self.gamma2, self.beta2,
                self.out_w, self.out_b]


@dataclass
class FullbandExtractorParams:
    """All TCN blocks (groups flattened in order) plus the final linear layer."""

    blocks: list
    fc_w: Parameter
    fc_b: Parameter

    def parameters(self):
        out = []
        for blk in self.blocks:
            out.extend(blk.parameters())
        out.extend([self.fc_w, self.fc_b])
        return out


def init_tcn_block(rng, name: str, channels: int, hidden: int, kernel: int,
                   dilation: int, quantize=lambda a: a) -> TcnBlockParams:
    """Block parameters: weights uniform(+-1/sqrt(fan_in)), biases zero,
    PReLU slopes 0.25, norm gain 1 / shift 0."""

    def uni(label, shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return Parameter(f"{name}.{label}", quantize(rng.uniform(-bound, bound, size=shape)))

    def const(label, shape, value):
        return Parameter(f"{name}.{label}", quantize(np.full(shape, value, dtype=np.float64)))

    return TcnBlockParams(
        in_w=uni("in_w", (channels, hidden), channels),
        in_b=const("in_b", (hidden,), 0.0),
        alpha1=const("alpha1", (hidden,), 0.25),
        gamma1=const("gamma1", (hidden,), 1.0),
        beta1=const("beta1", (hidden,), 0.0),
        kernel=uni("kernel", (hidden, kernel), kernel),
        alpha2=const("alpha2", (hidden,), 0.25),
        gamma2=const("gamma2", (hidden,), 1.0),
        beta2=const("beta2", (hidden,), 0.0),
        out_w=uni("out_w", (hidden, channels), hidden),
        out_b=const("out_b", (channels,), 0.0),
        dilation=dilation,
    )


def init_fullband(rng, name: str, n_freq: int, hidden: int, kernel: int,
                  dilations, groups: int, quantize=lambda a: a) -> FullbandExtractorParams:
    """Extractor with ``groups`` repeats of one block per dilation entry."""
    blocks = []
    for g in range(groups):
        for j, dil in enumerate(dilations):
            blocks.append(init_tcn_block(
                rng, f"{name}.g{g}.b{j}", n_freq, hidden, kernel, int(dil), quantize))
    bound = 1.0 / np.sqrt(n_freq)
    fc_w = Parameter(f"{name}.fc_w", quantize(rng.uniform(-bound, bound, size=(n_freq, n_freq))))
    fc_b = Parameter(f"{name}.fc_b", quantize(np.zeros(n_freq)))
    return FullbandExtractorParams(blocks=blocks, fc_w=fc_w, fc_b=fc_b)


def tcn_block(x: np.ndarray, p: TcnBlockParams, stats=None):
    """Residual block forward on [C, T].

    ``stats``, when given, is a pair of (mu, var) tuples freezing the two
    norm layers (receptive-field probing); default is live statistics.
    """
    if x.shape[0] != p.in_w.value.shape[0]:
        raise ShapeError(f"tcn_block: {x.shape[0]} channels != {p.in_w.value.shape[0]}")
    h, c1 = pointwise_conv(x, p.in_w, p.in_b)
    h, a1 = prelu(h, p.alpha1)
    h, n1 = global_layer_norm(h, p.gamma1, p.beta1, stats=None if stats is None else stats[0])
    h, d1 = depthwise_dilated_conv(h, p.kernel, p.dilation)
    h, a2 = prelu(h, p.alpha2)
    h, n2 = global_layer_norm(h, p.gamma2, p.beta2, stats=None if stats is None else stats[1])
    h, c2 = pointwise_conv(h, p.out_w, p.out_b)
    return x + h, (c1, a1, n1, d1, a2, n2, c2)


def tcn_block_backward(dy: np.ndarray, cache):
    c1, a1, n1, d1, a2, n2, c2 = cache
    dh = pointwise_conv_backward(dy, c2)
    dh = global_layer_norm_backward(dh, n2)
    dh = prelu_backward(dh, a2)
    dh = depthwise_dilated_conv_backward(dh, d1)
    dh = global_layer_norm_backward(dh, n1)
    dh = prelu_backward(dh, a1)
    dh = pointwise_conv_backward(dh, c1)
    return dy + dh


def block_norm_stats(cache):
    """The (mu, var) pairs a block's two norm layers used."""
    return gln_stats(cache[2]), gln_stats(cache[5])


def fullband_forward(x: np.ndarray, p: FullbandExtractorParams, stats=None):
    """Magnitude spectrogram [F, T] -> nonnegative fullband embedding [F, T].

    ``stats``: optional per-block frozen statistics, as returned by
    ``extractor_norm_stats`` from a previous forward's cache.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != p.fc_w.value.shape[0]:
        raise ShapeError(f"expected [{p.fc_w.value.shape[0]}, T] input, got {x.shape}")
    h = x
    block_caches = []
    for i, blk in enumerate(p.blocks):
        h, c = tcn_block(h, blk, stats=None if stats is None else stats[i])
        block_caches.append(c)
    h, fc = pointwise_conv(h, p.fc_w, p.fc_b)
    y, rmask = relu(h)
    return y, (block_caches, fc, rmask)


def fullband_backward(dy: np.ndarray, cache):
    block_caches, fc, rmask = cache
    dh = relu_backward(dy, rmask)
    dh = pointwise_conv_backward(dh, fc)
    for c in reversed(block_caches):
        dh = tcn_block_backward(dh, c)
    return dh


def extractor_norm_stats(cache):
    """Per-block norm statistics usable as ``fullband_forward(..., stats=...)``."""
    return [block_norm_stats(c) for c in cache[0]]


def receptive_field(kernel: int, dilations, groups: int) -> int:
    """Frames of input a single output frame can see through the conv path."""
    return 1 + (kernel - 1) * int(sum(dilations)) * groups
