"""Complex ratio mask: the learning target and the enhancement mechanism.

The mask is the complex quotient clean/noisy per time-frequency bin. For
training it is squashed into (-K, K) with a scaled tanh; ``decompress``
inverts the squashing before the mask is applied to the noisy spectrum by
complex multiplication.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

# Denominator regularizer for silent noisy bins.
CIRM_EPS = 1e-10
# Squashing defaults adopted from the fullband/subband model lineage.
DEFAULT_K = 10.0
DEFAULT_C = 0.1
# Inputs are clamped this close to +-K before the inverse squashing.
_DECOMPRESS_MARGIN = 1e-6


@dataclass
class Cirm:
    """Complex ratio mask split into real/imag parts, with a compression flag."""

    real: np.ndarray
    imag: np.ndarray
    compressed: bool = False

    def __post_init__(self):
        self.real = np.asarray(self.real, dtype=np.float64)
        self.imag = np.asarray(self.imag, dtype=np.float64)
        if self.real.shape != self.imag.shape:
            raise ShapeError(f"mask parts differ in shape: {self.real.shape} vs {self.imag.shape}")

    @property
    def shape(self):
        return self.real.shape


def compute_cirm(noisy: np.ndarray, clean: np.ndarray) -> Cirm:
    """Uncompressed complex ratio mask M = clean / noisy (regularized).

    With Y = noisy and S = clean:
        M_r = (Y_r S_r + Y_i S_i) / (Y_r^2 + Y_i^2 + eps)
        M_i = (Y_r S_i - Y_i S_r) / (Y_r^2 + Y_i^2 + eps)
    """
    noisy = np.asarray(noisy)
    clean = np.asarray(clean)
    if noisy.shape != clean.shape:
        raise ShapeError(f"spectrogram shapes differ: {noisy.shape} vs {clean.shape}")
    yr, yi = noisy.real, noisy.imag
    sr, si = clean.real, clean.imag
    denom = yr * yr + yi * yi + CIRM_EPS
    return Cirm((yr * sr + yi * si) / denom, (yr * si - yi * sr) / denom, compressed=False)


def _squash(x, k, c):
    # k * (1 - exp(-c x)) / (1 + exp(-c x)), evaluated as k * tanh(c x / 2)
    # to stay finite for large |x|.
    return k * np.tanh(0.5 * c * x)


def compress(m: Cirm, k: float = DEFAULT_K, c: float = DEFAULT_C) -> Cirm:
    """Squash an uncompressed mask entrywise into (-k, k)."""
    if m.compressed:
        raise ShapeError("mask is already compressed")
    return Cirm(_squash(m.real, k, c), _squash(m.imag, k, c), compressed=True)


def decompress(m: Cirm, k: float = DEFAULT_K, c: float = DEFAULT_C) -> Cirm:
    """Invert ``compress``: x = -(1/c) * ln((k - x~) / (k + x~)).

    Inputs are clamped to [-k + 1e-6, k - 1e-6] first so the result stays
    finite.
    """
    if not m.compressed:
        raise ShapeError("mask is not compressed")

    def inv(x):
        x = np.clip(x, -k + _DECOMPRESS_MARGIN, k - _DECOMPRESS_MARGIN)
        return -(1.0 / c) * np.log((k - x) / (k + x))

    return Cirm(inv(m.real), inv(m.imag), compressed=False)


def apply_mask(noisy: np.ndarray, m: Cirm) -> np.ndarray:
    """Complex multiplication of the noisy spectrogram by an uncompressed mask."""
    if m.compressed:
        raise ShapeError("mask must be decompressed before application")
    noisy = np.asarray(noisy)
    if noisy.shape != m.shape:
        raise ShapeError(f"mask shape {m.shape} != spectrogram shape {noisy.shape}")
    yr, yi = noisy.real, noisy.imag
    return (m.real * yr - m.imag * yi) + 1j * (m.real * yi + m.imag * yr)
