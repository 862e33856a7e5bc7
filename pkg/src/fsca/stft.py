"""STFT analysis/synthesis frontend.

Conventions:
  - periodic (DFT-even) Hann window, hop = n_fft / 2,
  - no center padding: frame t covers samples [t*hop, t*hop + n_fft),
  - spectrograms are complex128 arrays of shape [F, T] with F = n_fft/2 + 1.

With these choices the weighted overlap-add inverse (synthesis window =
analysis window, normalized by the summed squared window) reconstructs
interior samples exactly; only the first and last half-frame are attenuated
where a single window covers them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import Waveform
from .errors import ShapeError

# Floor for the overlap-add normalizer; only relevant at the chunk edges
# where the summed squared window tends to zero.
_OLA_EPS = 1e-10


def periodic_hann(n_fft: int) -> np.ndarray:
    """Periodic Hann window, w[m] = 0.5 * (1 - cos(2*pi*m/n_fft))."""
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n_fft) / n_fft))


@dataclass(frozen=True)
class StftConfig:
    """Frame length and hop of the analysis/synthesis transform."""

    n_fft: int = 512
    hop: int = 256

    def __post_init__(self):
        if self.n_fft < 2 or self.n_fft & (self.n_fft - 1):
            raise ShapeError(f"n_fft must be a power of two, got {self.n_fft}")
        if self.hop * 2 != self.n_fft:
            raise ShapeError(f"hop must be n_fft/2, got hop={self.hop}, n_fft={self.n_fft}")

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    def window(self) -> np.ndarray:
        return periodic_hann(self.n_fft)

    def num_frames(self, n_samples: int) -> int:
        if n_samples < self.n_fft:
            raise ShapeError(f"signal of {n_samples} samples is shorter than one frame ({self.n_fft})")
        return 1 + (n_samples - self.n_fft) // self.hop

    def num_samples(self, n_frames: int) -> int:
        return self.n_fft + (n_frames - 1) * self.hop


def stft(w: Waveform, cfg: StftConfig) -> np.ndarray:
    """Short-time Fourier transform.

    Returns a complex [F, T] spectrogram with T = 1 + (len - n_fft) // hop.
    Trailing samples that do not fill a whole frame are dropped.
    """
    x = w.samples
    n_frames = cfg.num_frames(x.size)
    win = cfg.window()
    idx = np.arange(cfg.n_fft)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    frames = x[idx] * win
    return np.fft.rfft(frames, axis=1).T.copy()


def istft(spec: np.ndarray, cfg: StftConfig, sample_rate: int = 16000) -> Waveform:
    """Inverse STFT by synthesis-windowed overlap-add.

    Each frame is inverted with the conjugate-symmetric inverse DFT,
    multiplied by the window again, and overlap-added; the result is
    normalized by the summed squared shifted windows. Output length is
    n_fft + (T - 1) * hop.
    """
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[0] != cfg.n_bins:
        raise ShapeError(f"expected [F={cfg.n_bins}, T] spectrogram, got shape {spec.shape}")
    n_frames = spec.shape[1]
    win = cfg.window()
    frames = np.fft.irfft(spec.T, n=cfg.n_fft, axis=1) * win
    out = np.zeros(cfg.num_samples(n_frames))
    norm = np.zeros_like(out)
    win_sq = win * win
    for t in range(n_frames):
        lo = t * cfg.hop
        out[lo:lo + cfg.n_fft] += frames[t]
        norm[lo:lo + cfg.n_fft] += win_sq
    out /= np.maximum(norm, _OLA_EPS)
    return Waveform(out, sample_rate)


def magnitude(spec: np.ndarray) -> np.ndarray:
    """Entrywise magnitude sqrt(re^2 + im^2) of a complex spectrogram."""
    return np.abs(np.asarray(spec))
