"""Differentiable numeric primitives with hand-written backward passes.

Every op comes as a forward function returning ``(y, cache)`` and a matching
``*_backward(dy, cache)`` that returns the gradients of the op's array inputs
and accumulates parameter gradients into ``Parameter.grad``. Arrays are plain
float64 numpy ndarrays (row-major); there is no graph engine, composites walk
their caches in exact reverse order of the forward.

Determinism rules baked into this module:
  - accumulations over kernel taps run in ascending tap order,
  - batched variants are built from stacked 3-D/4-D matmuls whose per-slice
    GEMM calls are bit-identical to the unbatched 2-D calls, so processing
    sequences one at a time or all at once yields the same bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


class Parameter:
    """Named trainable tensor with a gradient accumulator of the same shape."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value):
        self.name = name
        self.value = np.ascontiguousarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self):
        self.grad.fill(0.0)

    @property
    def size(self) -> int:
        return self.value.size

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


class GradTape:
    """Ordered log of executed ops for a straight-line pipeline.

    ``record`` appends a pullback closure during the forward pass; ``backward``
    replays the closures in exact reverse order, threading the running
    gradient through them.
    """

    def __init__(self):
        self._records = []

    def record(self, pullback):
        self._records.append(pullback)

    def __len__(self):
        return len(self._records)

    def backward(self, grad):
        for pullback in reversed(self._records):
            grad = pullback(grad)
        return grad


def sigmoid(x):
    # Split by sign to avoid overflow in exp for large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# linear / pointwise
# ---------------------------------------------------------------------------

def linear(x: np.ndarray, w: Parameter, b: Parameter):
    """Affine map on the last axis: y = x @ w + b.

    x: [..., d_in], w: [d_in, d_out], b: [d_out] -> y: [..., d_out].
    """
    if x.shape[-1] != w.value.shape[0]:
        raise ShapeError(f"linear: input width {x.shape[-1]} != {w.value.shape[0]}")
    y = x @ w.value + b.value
    return y, (x, w, b)


def linear_backward(dy: np.ndarray, cache):
    x, w, b = cache
    xf = x.reshape(-1, x.shape[-1])
    dyf = dy.reshape(-1, dy.shape[-1])
    w.grad += xf.T @ dyf
    b.grad += dyf.sum(axis=0)
    return dy @ w.value.T


def pointwise_conv(x: np.ndarray, w: Parameter, b: Parameter):
    """1x1 convolution over channels: per frame t, y[:, t] = w.T @ x[:, t] + b.

    x: [C_in, T], w: [C_in, C_out], b: [C_out] -> y: [C_out, T].
    Identical to ``linear`` applied to each column.
    """
    if x.shape[0] != w.value.shape[0]:
        raise ShapeError(f"pointwise_conv: {x.shape[0]} channels != {w.value.shape[0]}")
    y = w.value.T @ x + b.value[:, None]
    return y, (x, w, b)


def pointwise_conv_backward(dy: np.ndarray, cache):
    x, w, b = cache
    w.grad += x @ dy.T
    b.grad += dy.sum(axis=1)
    return w.value @ dy


# ---------------------------------------------------------------------------
# activations and normalization
# ---------------------------------------------------------------------------

def relu(x: np.ndarray):
    y = np.maximum(x, 0.0)
    return y, (x > 0.0)


def relu_backward(dy: np.ndarray, cache):
    return dy * cache


def prelu(x: np.ndarray, alpha: Parameter):
    """Per-channel parametric ReLU on [C, T]: y = x where x >= 0 else alpha[c] * x."""
    if x.shape[0] != alpha.size:
        raise ShapeError(f"prelu: {x.shape[0]} channels != {alpha.size} slopes")
    neg = x < 0.0
    y = np.where(neg, alpha.value[:, None] * x, x)
    return y, (x, neg, alpha)


def prelu_backward(dy: np.ndarray, cache):
    x, neg, alpha = cache
    alpha.grad += np.where(neg, x * dy, 0.0).sum(axis=1)
    return np.where(neg, alpha.value[:, None] * dy, dy)


def global_layer_norm(x: np.ndarray, gamma: Parameter, beta: Parameter,
                      eps: float = 1e-8, stats=None):
    """Global layer normalization over channels and time jointly.

    Mean and variance are taken over ALL of [C, T]; gamma/beta are per
    channel. ``stats=(mu, var)`` overrides the statistics (used to freeze
    normalization when probing the conv-path receptive field); frozen stats
    are treated as constants in the backward pass.
    """
    if x.shape[0] != gamma.size:
        raise ShapeError(f"global_layer_norm: {x.shape[0]} channels != {gamma.size}")
    frozen = stats is not None
    if frozen:
        mu, var = stats
    else:
        mu = x.mean()
        var = ((x - mu) ** 2).mean()
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    y = gamma.value[:, None] * xhat + beta.value[:, None]
    return y, (xhat, inv_std, gamma, beta, frozen, (mu, var))


def global_layer_norm_backward(dy: np.ndarray, cache):
    xhat, inv_std, gamma, beta, frozen, _ = cache
    gamma.grad += (dy * xhat).sum(axis=1)
    beta.grad += dy.sum(axis=1)
    dxhat = gamma.value[:, None] * dy
    if frozen:
        return dxhat * inv_std
    return (dxhat - dxhat.mean() - xhat * (dxhat * xhat).mean()) * inv_std


def gln_stats(cache):
    """Statistics (mu, var) recorded by a global_layer_norm forward."""
    return cache[5]


# ---------------------------------------------------------------------------
# dilated depthwise convolution
# ---------------------------------------------------------------------------

def depthwise_dilated_conv(x: np.ndarray, kernel: Parameter, dilation: int):
    """Causal per-channel dilated convolution.

    y[c, t] = sum_j kernel[c, j] * x[c, t - (k-1-j)*dilation], out-of-range
    samples read as zero (implicit causal left padding). Taps accumulate in
    ascending j so the naive triple-loop reference matches bit for bit.
    """
    if dilation < 1:
        raise ShapeError(f"dilation must be >= 1, got {dilation}")
    k = kernel.value.shape[1]
    if k < 1:
        raise ShapeError(f"kernel size must be >= 1, got {k}")
    if x.shape[0] != kernel.value.shape[0]:
        raise ShapeError(f"depthwise conv: {x.shape[0]} channels != {kernel.value.shape[0]}")
    t_len = x.shape[1]
    y = np.zeros_like(x)
    for j in range(k):
        shift = (k - 1 - j) * dilation
        if shift >= t_len:
            continue
        if shift == 0:
            y += kernel.value[:, j:j + 1] * x
        else:
            y[:, shift:] += kernel.value[:, j:j + 1] * x[:, :-shift]
    return y, (x, kernel, dilation)


def depthwise_dilated_conv_backward(dy: np.ndarray, cache):
    x, kernel, dilation = cache
    k = kernel.value.shape[1]
    t_len = x.shape[1]
    dx = np.zeros_like(x)
    for j in range(k):
        shift = (k - 1 - j) * dilation
        if shift >= t_len:
            continue
        if shift == 0:
            kernel.grad[:, j] += (x * dy).sum(axis=1)
            dx += kernel.value[:, j:j + 1] * dy
        else:
            kernel.grad[:, j] += (x[:, :-shift] * dy[:, shift:]).sum(axis=1)
            dx[:, :-shift] += kernel.value[:, j:j + 1] * dy[:, shift:]
    return dx


# ---------------------------------------------------------------------------
# softmax and multi-head attention
# ---------------------------------------------------------------------------

def softmax_rows(x: np.ndarray):
    """Row-stabilized softmax over the last axis."""
    m = np.max(x, axis=-1, keepdims=True)
    e = np.exp(x - m)
    y = e / e.sum(axis=-1, keepdims=True)
    return y, y


def softmax_rows_backward(dy: np.ndarray, cache):
    y = cache
    return y * (dy - (dy * y).sum(axis=-1, keepdims=True))


def _split_heads(x, heads):
    # [..., T, d] -> [..., heads, T, d/h]
    *lead, t, d = x.shape
    dk = d // heads
    x = x.reshape(*lead, t, heads, dk)
    return np.moveaxis(x, -2, -3)


def _merge_heads(x):
    # [..., heads, T, dk] -> [..., T, heads*dk]
    x = np.moveaxis(x, -3, -2)
    *lead, t, h, dk = x.shape
    return x.reshape(*lead, t, h * dk)


def multi_head_attention(q: np.ndarray, k: np.ndarray, v: np.ndarray, heads: int,
                         w_o: Parameter, b_o: Parameter, mask: str = "full"):
    """Scaled dot-product attention with ``heads`` heads and output projection.

    q, k, v: [T, d] (or [B, T, d] with a shared or batched q); each head
    attends over the T frames with scores q_h k_h^T / sqrt(d/heads). With
    ``mask="causal"`` scores at future frames are -inf before the softmax.
    Heads are concatenated and projected: y = concat @ w_o + b_o.
    """
    d = q.shape[-1]
    if d % heads:
        raise ShapeError(f"model width {d} not divisible by {heads} heads")
    if k.shape != v.shape or q.shape[-2] != k.shape[-2]:
        raise ShapeError(f"attention shapes inconsistent: q{q.shape} k{k.shape} v{v.shape}")
    if mask not in ("full", "causal"):
        raise ShapeError(f"unknown attention mask mode {mask!r}")
    dk = d // heads
    qh = _split_heads(q, heads)                    # [..., h, T, dk]
    kh = _split_heads(k, heads)
    vh = _split_heads(v, heads)
    scale = 1.0 / np.sqrt(dk)
    scores = np.matmul(qh, np.swapaxes(kh, -1, -2)) * scale
    if mask == "causal":
        t_len = scores.shape[-1]
        future = np.triu(np.ones((t_len, t_len), dtype=bool), k=1)
        scores = np.where(future, -np.inf, scores)
    att, att_cache = softmax_rows(scores)          # [..., h, T, T]
    ctx = np.matmul(att, vh)                       # [..., h, T, dk]
    merged = _merge_heads(ctx)                     # [..., T, d]
    y = merged @ w_o.value + b_o.value
    return y, (qh, kh, vh, att, att_cache, merged, scale, heads, w_o, b_o)


def multi_head_attention_backward(dy: np.ndarray, cache):
    qh, kh, vh, att, att_cache, merged, scale, heads, w_o, b_o = cache
    dyf = dy.reshape(-1, dy.shape[-1])
    w_o.grad += merged.reshape(-1, merged.shape[-1]).T @ dyf
    b_o.grad += dyf.sum(axis=0)
    dctx = _split_heads(dy @ w_o.value.T, heads)
    datt = np.matmul(dctx, np.swapaxes(vh, -1, -2))
    dvh = np.matmul(np.swapaxes(att, -1, -2), dctx)
    dscores = softmax_rows_backward(datt, att_cache) * scale
    dqh = np.matmul(dscores, kh)
    dkh = np.matmul(np.swapaxes(dscores, -1, -2), qh)
    return _merge_heads(dqh), _merge_heads(dkh), _merge_heads(dvh)


def attention_weights(cache) -> np.ndarray:
    """Per-head attention weights [..., heads, T, T] from an attention cache."""
    return cache[3]


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------

@dataclass
class LstmParams:
    """Single-layer LSTM weights: gates ordered input, forget, cell, output.

    w_x: [d_in, 4H], w_h: [H, 4H], b: [4H] (one shared bias vector).
    """

    w_x: Parameter
    w_h: Parameter
    b: Parameter

    @property
    def hidden(self) -> int:
        return self.w_h.value.shape[0]

    @property
    def d_in(self) -> int:
        return self.w_x.value.shape[0]

    def parameters(self):
        return [self.w_x, self.w_h, self.b]


def init_lstm(rng, name: str, d_in: int, hidden: int, quantize=lambda a: a) -> LstmParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero bias except
    forget gate bias 1.0."""
    sx = 1.0 / np.sqrt(d_in)
    sh = 1.0 / np.sqrt(hidden)
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0
    return LstmParams(
        w_x=Parameter(f"{name}.w_x", quantize(rng.uniform(-sx, sx, (d_in, 4 * hidden)))),
        w_h=Parameter(f"{name}.w_h", quantize(rng.uniform(-sh, sh, (hidden, 4 * hidden)))),
        b=Parameter(f"{name}.b", b),
    )


def lstm_seq(x: np.ndarray, p: LstmParams, h0=None, c0=None, want_cache: bool = True):
    """Batched unidirectional LSTM over [B, T, d_in] -> [B, T, H].

    Strictly causal: h_t depends only on x_{1..t}. The recurrent matmul runs
    per batch slice ([B, 1, H] @ [H, 4H]) so results are bit-identical
    whether sequences are processed singly or stacked.
    """
    b_sz, t_len, d_in = x.shape
    if d_in != p.d_in:
        raise ShapeError(f"lstm: input width {d_in} != {p.d_in}")
    hidden = p.hidden
    h = np.zeros((b_sz, 1, hidden)) if h0 is None else h0.reshape(b_sz, 1, hidden).copy()
    c = np.zeros((b_sz, 1, hidden)) if c0 is None else c0.reshape(b_sz, 1, hidden).copy()
    xp = x @ p.w_x.value + p.b.value               # [B, T, 4H]
    hs = np.empty((b_sz, t_len, hidden))
    cache = None
    if want_cache:
        gates = np.empty((b_sz, t_len, 4 * hidden))
        tanh_c = np.empty((b_sz, t_len, hidden))
        c_prev_seq = np.empty((b_sz, t_len, hidden))
        h_prev_seq = np.empty((b_sz, t_len, hidden))
    for t in range(t_len):
        z = xp[:, t:t + 1, :] + h @ p.w_h.value
        i = sigmoid(z[..., :hidden])
        f = sigmoid(z[..., hidden:2 * hidden])
        g = np.tanh(z[..., 2 * hidden:3 * hidden])
        o = sigmoid(z[..., 3 * hidden:])
        if want_cache:
            gates[:, t, :hidden] = i[:, 0]
            gates[:, t, hidden:2 * hidden] = f[:, 0]
            gates[:, t, 2 * hidden:3 * hidden] = g[:, 0]
            gates[:, t, 3 * hidden:] = o[:, 0]
            c_prev_seq[:, t] = c[:, 0]
            h_prev_seq[:, t] = h[:, 0]
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        if want_cache:
            tanh_c[:, t] = tc[:, 0]
        hs[:, t] = h[:, 0]
    if want_cache:
        cache = (x, gates, tanh_c, c_prev_seq, h_prev_seq, p)
    return hs, cache


def lstm_seq_backward(dh_seq: np.ndarray, cache):
    """Backpropagation through time; returns (dx, dh0, dc0)."""
    x, gates, tanh_c, c_prev_seq, h_prev_seq, p = cache
    b_sz, t_len, hidden = tanh_c.shape
    dz_seq = np.empty((b_sz, t_len, 4 * hidden))
    dh_next = np.zeros((b_sz, 1, hidden))
    dc = np.zeros((b_sz, 1, hidden))
    wh_t = p.w_h.value.T
    for t in range(t_len - 1, -1, -1):
        i = gates[:, t:t + 1, :hidden]
        f = gates[:, t:t + 1, hidden:2 * hidden]
        g = gates[:, t:t + 1, 2 * hidden:3 * hidden]
        o = gates[:, t:t + 1, 3 * hidden:]
        tc = tanh_c[:, t:t + 1]
        dh = dh_seq[:, t:t + 1] + dh_next
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev_seq[:, t:t + 1]
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ], axis=-1)
        dz_seq[:, t] = dz[:, 0]
        dh_next = dz @ wh_t
        dc = dc * f
    dzf = dz_seq.reshape(-1, 4 * hidden)
    p.w_x.grad += x.reshape(-1, x.shape[-1]).T @ dzf
    p.w_h.grad += h_prev_seq.reshape(-1, hidden).T @ dzf
    p.b.grad += dzf.sum(axis=0)
    dx = dz_seq @ p.w_x.value.T
    return dx, dh_next[:, 0], dc[:, 0]


def lstm_layer(x: np.ndarray, p: LstmParams, h0=None, c0=None, want_cache: bool = True):
    """Single-sequence LSTM: x [T, d_in] -> h [T, H] (batch-of-one wrapper)."""
    h0b = None if h0 is None else h0.reshape(1, -1)
    c0b = None if c0 is None else c0.reshape(1, -1)
    hs, cache = lstm_seq(x[None], p, h0b, c0b, want_cache)
    return hs[0], cache


def lstm_layer_backward(dh: np.ndarray, cache):
    dx, dh0, dc0 = lstm_seq_backward(dh[None], cache)
    return dx[0], dh0[0], dc0[0]
