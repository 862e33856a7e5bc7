"""Frequency-local feature views of a magnitude spectrogram.

``unfold`` gathers, for each frequency bin, the magnitudes of its 2n+1
neighboring bins (itself, n below, n above) at every frame. Frequencies
outside [0, F) wrap around modulo F, which keeps every unit the same width
at the spectrum edges.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def unfold(mag: np.ndarray, n: int) -> np.ndarray:
    """Neighborhood view [F, 2n+1, T] of a magnitude spectrogram [F, T].

    Row f holds mag[(f - n) % F .. (f + n) % F] in ascending offset order,
    so unfold(mag, n)[f, n] is mag[f] itself.
    """
    mag = np.asarray(mag, dtype=np.float64)
    if mag.ndim != 2:
        raise ShapeError(f"expected [F, T] magnitudes, got shape {mag.shape}")
    if n < 0:
        raise ShapeError(f"neighborhood half-width must be >= 0, got {n}")
    n_freq = mag.shape[0]
    offsets = np.arange(-n, n + 1)
    rows = (np.arange(n_freq)[:, None] + offsets[None, :]) % n_freq
    return mag[rows]  # [F, 2n+1, T]


def concat_fullband(units: np.ndarray, fullband: np.ndarray) -> np.ndarray:
    """Append a fullband feature row to each unit: [F, 2n+1, T] -> [F, 2n+2, T]."""
    units = np.asarray(units, dtype=np.float64)
    fullband = np.asarray(fullband, dtype=np.float64)
    if units.ndim != 3:
        raise ShapeError(f"expected [F, width, T] units, got shape {units.shape}")
    if fullband.shape != (units.shape[0], units.shape[2]):
        raise ShapeError(
            f"fullband shape {fullband.shape} does not match units {units.shape}"
        )
    return np.concatenate([units, fullband[:, None, :]], axis=1)


def broadcast_fullband(fullband: np.ndarray, n_freq: int) -> np.ndarray:
    """Read-only view [F, d, T] repeating a [d, T] fullband feature per bin."""
    fullband = np.asarray(fullband, dtype=np.float64)
    if fullband.ndim != 2:
        raise ShapeError(f"expected [d, T] feature, got shape {fullband.shape}")
    if n_freq < 1:
        raise ShapeError(f"need at least one frequency bin, got {n_freq}")
    return np.broadcast_to(fullband[None, :, :], (n_freq,) + fullband.shape)
