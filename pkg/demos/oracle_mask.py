"""Walkthrough: the complex ratio mask as an upper bound on enhancement.

Mixes a synthetic voice-like signal with white noise at 0 dB, computes the
oracle mask from the known clean spectrum, applies it, and scores the result.
This is the ceiling a trained mask predictor approaches.
"""

import numpy as np

from fsca import (
    StftConfig,
    Waveform,
    apply_mask,
    compress,
    compute_cirm,
    decompress,
    istft,
    mix,
    si_sdr,
    stft,
)

RATE = 16000

t = np.arange(RATE) / RATE
clean = Waveform(0.4 * np.sin(2 * np.pi * 220 * t) * (1 + 0.3 * np.sin(2 * np.pi * 3 * t)),
                 RATE)
rng = np.random.default_rng(1)
noise = Waveform(0.3 * rng.standard_normal(RATE), RATE)
noisy, target = mix(clean, noise, snr_db=0.0)
print(f"mixed at 0 dB: si-sdr of noisy vs clean = {si_sdr(target, noisy):.2f} dB")

cfg = StftConfig(n_fft=512, hop=256)
y = stft(noisy, cfg)
s = stft(target, cfg)

m = compute_cirm(y, s)
print(f"oracle mask: real in [{m.real.min():.2f}, {m.real.max():.2f}], "
      f"imag in [{m.imag.min():.2f}, {m.imag.max():.2f}]")

# Training never sees the raw mask; it regresses the squashed version.
squashed = compress(m)
print(f"squashed to (-10, 10): real in [{squashed.real.min():.2f}, {squashed.real.max():.2f}]")

restored = decompress(squashed)
enhanced = istft(apply_mask(y, restored), cfg, sample_rate=RATE)
n = len(enhanced)
print(f"oracle enhancement: si-sdr = {si_sdr(target.samples[:n], enhanced.samples):.2f} dB")
