"""Fullband-subband cross-attention fusion.

For every frequency bin, the fullband embedding's frame columns provide the
attention queries while the bin's subband unit provides keys and values.
The attended result is projected back to the unit width, added residually,
and passed through a small expansion-contraction frame MLP with a second
residual. One parameter set serves all bins.

Batched and single-bin paths share one kernel built from stacked matmuls
whose per-slice shapes do not depend on the batch size, so per-bin results
are bit-identical however the bins are grouped or parallelized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .ops import (
    Parameter,
    linear,
    linear_backward,
    multi_head_attention,
    multi_head_attention_backward,
    relu,
    relu_backward,
)

# Frequency bins are processed in slabs of this many at a time; attention
# score buffers scale with slab * heads * T^2, so this bounds peak memory.
DEFAULT_SLAB = 32


@dataclass
class FscaParams:
    """Projections and frame MLP shared across all frequency bins."""

    w_q: Parameter   # [F, d_model]
    b_q: Parameter
    w_k: Parameter   # [width, d_model]
    b_k: Parameter
    w_v: Parameter
    b_v: Parameter
    w_o: Parameter   # [d_model, width]
    b_o: Parameter
    w_f1: Parameter  # [width, ffn_ratio * width]
    b_f1: Parameter
    w_f2: Parameter  # [ffn_ratio * width, width]
    b_f2: Parameter
    heads: int
    mask: str = "full"

    @property
    def width(self) -> int:
        return self.w_k.value.shape[0]

    @property
    def n_freq(self) -> int:
        return self.w_q.value.shape[0]

    def parameters(self):
        return [self.w_q, self.b_q, self.w_k, self.b_k, self.w_v, self.b_v,
                self.w_o, self.b_o, self.w_f1, self.b_f1, self.w_f2, self.b_f2]


def init_fsca(rng, name: str, n_freq: int, width: int, d_model: int, heads: int,
              ffn_ratio: int, mask: str = "full", quantize=lambda a: a) -> FscaParams:
    """Fusion parameters: weights uniform(+-1/sqrt(fan_in)), biases zero."""
    if d_model % heads:
        raise ShapeError(f"d_model {d_model} not divisible by {heads} heads")

    def uni(label, d_in, d_out):
        bound = 1.0 / np.sqrt(d_in)
        return Parameter(f"{name}.{label}", quantize(rng.uniform(-bound, bound, size=(d_in, d_out))))

    def zeros(label, d_out):
        return Parameter(f"{name}.{label}", quantize(np.zeros(d_out)))

    hidden = ffn_ratio * width
    return FscaParams(
        w_q=uni("w_q", n_freq, d_model), b_q=zeros("b_q", d_model),
        w_k=uni("w_k", width, d_model), b_k=zeros("b_k", d_model),
        w_v=uni("w_v", width, d_model), b_v=zeros("b_v", d_model),
        w_o=uni("w_o", d_model, width), b_o=zeros("b_o", width),
        w_f1=uni("w_f1", width, hidden), b_f1=zeros("b_f1", hidden),
        w_f2=uni("w_f2", hidden, width), b_f2=zeros("b_f2", width),
        heads=heads, mask=mask,
    )


def _fsca_batch(units: np.ndarray, g: np.ndarray, p: FscaParams):
    """Core fusion on a stack of units [B, width, T] against one g [F, T]."""
    if units.ndim != 3 or units.shape[1] != p.width:
        raise ShapeError(f"expected [B, {p.width}, T] units, got {units.shape}")
    if g.shape != (p.n_freq, units.shape[2]):
        raise ShapeError(
            f"fullband embedding {g.shape} incompatible with units {units.shape} "
            f"and {p.n_freq} query channels")
    q_in = g.T                                   # [T, F]
    k_in = units.transpose(0, 2, 1)              # [B, T, width]
    q, qc = linear(q_in, p.w_q, p.b_q)           # [T, d]
    k, kc = linear(k_in, p.w_k, p.b_k)           # [B, T, d]
    v, vc = linear(k_in, p.w_v, p.b_v)
    att, ac = multi_head_attention(q, k, v, p.heads, p.w_o, p.b_o, mask=p.mask)
    z = units + att.transpose(0, 2, 1)           # [B, width, T]
    zt = z.transpose(0, 2, 1)                    # [B, T, width]
    h1, f1c = linear(zt, p.w_f1, p.b_f1)
    h1, rmask = relu(h1)
    h2, f2c = linear(h1, p.w_f2, p.b_f2)
    y = z + h2.transpose(0, 2, 1)
    return y, (qc, kc, vc, ac, f1c, rmask, f2c)


def _fsca_batch_backward(dy: np.ndarray, cache):
    """Gradients of ``_fsca_batch``: returns (dunits [B, width, T], dg [F, T])."""
    qc, kc, vc, ac, f1c, rmask, f2c = cache
    dz = dy.copy()
    dh2 = dy.transpose(0, 2, 1)
    dh1 = linear_backward(dh2, f2c)
    dh1 = relu_backward(dh1, rmask)
    dz += linear_backward(dh1, f1c).transpose(0, 2, 1)
    datt = dz.transpose(0, 2, 1)
    dq, dk, dv = multi_head_attention_backward(datt, ac)
    dq = dq.sum(axis=0)                          # query was shared across the batch
    dk_in = linear_backward(dk, kc) + linear_backward(dv, vc)
    dg = linear_backward(dq, qc).T
    dunits = dz + dk_in.transpose(0, 2, 1)
    return dunits, dg


def fsca_forward(unit: np.ndarray, g: np.ndarray, p: FscaParams):
    """Fuse one subband unit [width, T] with the fullband embedding [F, T]."""
    unit = np.asarray(unit, dtype=np.float64)
    y, cache = _fsca_batch(unit[None], np.asarray(g, dtype=np.float64), p)
    return y[0], cache


def fsca_backward(dy: np.ndarray, cache):
    dunits, dg = _fsca_batch_backward(dy[None], cache)
    return dunits[0], dg


def fsca_forward_all(units: np.ndarray, g: np.ndarray, p: FscaParams,
                     slab: int = DEFAULT_SLAB, want_cache: bool = True):
    """Fuse all units [F', width, T] with g; slab-sized batches bound memory.

    Outputs are assembled in ascending-frequency order and each equals the
    single-unit ``fsca_forward`` result bit for bit.
    """
    units = np.asarray(units, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if units.ndim != 3:
        raise ShapeError(f"expected [F, width, T] units, got {units.shape}")
    if slab < 1:
        raise ShapeError(f"slab size must be >= 1, got {slab}")
    out = np.empty_like(units)
    caches = []
    for lo in range(0, units.shape[0], slab):
        hi = min(lo + slab, units.shape[0])
        y, cache = _fsca_batch(units[lo:hi], g, p)
        out[lo:hi] = y
        if want_cache:
            caches.append((lo, hi, cache))
    return out, (caches if want_cache else None)


def fsca_backward_all(dy: np.ndarray, cache):
    """Gradients of ``fsca_forward_all``: (dunits [F', width, T], dg [F, T])."""
    dunits = np.empty_like(dy)
    dg = None
    for lo, hi, c in cache:
        du, dgi = _fsca_batch_backward(dy[lo:hi], c)
        dunits[lo:hi] = du
        dg = dgi if dg is None else dg + dgi
    return dunits, dg


def fsca_attention_cache(cache):
    """The multi-head attention cache from a single-unit forward."""
    return cache[3]
