"""Per-frequency mask predictor: stacked unidirectional LSTMs plus a linear head.

Every frequency bin's fusion embedding is run through the same parameters.
The head has no output activation; it emits the two compressed mask tracks
(real, imaginary) for the bin's center frequency.

The all-bins path stacks bins on a leading batch axis; slice shapes inside
the recurrence match the single-bin path exactly, so both produce identical
bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .ops import (
    Parameter,
    init_lstm,
    linear,
    linear_backward,
    lstm_seq,
    lstm_seq_backward,
)


@dataclass
class SubbandModelParams:
    """Shared LSTM stack (input width -> hidden -> ... -> hidden) and 2-wide head."""

    layers: list
    fc_w: Parameter  # [hidden, 2]
    fc_b: Parameter  # [2]

    @property
    def d_in(self) -> int:
        return self.layers[0].d_in

    def parameters(self):
        out = []
        for layer in self.layers:
            out.extend(layer.parameters())
        out.extend([self.fc_w, self.fc_b])
        return out


def init_subband(rng, name: str, d_in: int, hidden: int, layers: int,
                 quantize=lambda a: a) -> SubbandModelParams:
    """LSTM stack + head; weights uniform(+-1/sqrt(fan_in)), forget bias 1."""
    if layers < 1:
        raise ShapeError(f"need at least one recurrent layer, got {layers}")
    stack = []
    for i in range(layers):
        stack.append(init_lstm(rng, f"{name}.lstm{i}", d_in if i == 0 else hidden,
                               hidden, quantize))
    bound = 1.0 / np.sqrt(hidden)
    fc_w = Parameter(f"{name}.fc_w", quantize(rng.uniform(-bound, bound, size=(hidden, 2))))
    fc_b = Parameter(f"{name}.fc_b", quantize(np.zeros(2)))
    return SubbandModelParams(layers=stack, fc_w=fc_w, fc_b=fc_b)


def subband_forward_all(embs: np.ndarray, p: SubbandModelParams,
                        want_cache: bool = True):
    """All embeddings [F, width, T] -> stacked mask tracks [F, 2, T].

    Row [f, 0] is the real track, [f, 1] the imaginary track, both in the
    compressed mask domain. Frames are processed strictly left to right.
    """
    embs = np.asarray(embs, dtype=np.float64)
    if embs.ndim != 3 or embs.shape[1] != p.d_in:
        raise ShapeError(f"expected [F, {p.d_in}, T] embeddings, got {embs.shape}")
    h = embs.transpose(0, 2, 1)  # [F, T, width]
    lstm_caches = []
    for layer in p.layers:
        h, c = lstm_seq(h, layer, want_cache=want_cache)
        lstm_caches.append(c)
    y, fc_cache = linear(h, p.fc_w, p.fc_b)  # [F, T, 2]
    return y.transpose(0, 2, 1), (lstm_caches, fc_cache)


def subband_backward_all(dy: np.ndarray, cache):
    """Gradient of ``subband_forward_all`` w.r.t. the embeddings."""
    lstm_caches, fc_cache = cache
    dh = linear_backward(dy.transpose(0, 2, 1), fc_cache)
    for c in reversed(lstm_caches):
        dh, _, _ = lstm_seq_backward(dh, c)
    return dh.transpose(0, 2, 1)


def subband_forward(emb: np.ndarray, p: SubbandModelParams, want_cache: bool = True):
    """One embedding [width, T] -> mask tracks [2, T] (batch-of-one wrapper)."""
    emb = np.asarray(emb, dtype=np.float64)
    if emb.ndim != 2:
        raise ShapeError(f"expected [width, T] embedding, got {emb.shape}")
    y, cache = subband_forward_all(emb[None], p, want_cache=want_cache)
    return y[0], cache


def subband_backward(dy: np.ndarray, cache):
    return subband_backward_all(dy[None], cache)[0]
