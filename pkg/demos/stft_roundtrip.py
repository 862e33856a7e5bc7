"""Walkthrough: analysis/synthesis transform and its reconstruction error.

Builds one second of random audio, runs it through the forward transform and
back, and reports the residual on the interior samples (the first and last
window never reach full overlap weight, so they are excluded by contract).
"""

import numpy as np

from fsca import StftConfig, Waveform, istft, magnitude, stft

RATE = 16000

rng = np.random.default_rng(0)
w = Waveform(rng.uniform(-1.0, 1.0, RATE), RATE)
cfg = StftConfig(n_fft=512, hop=256)

spec = stft(w, cfg)
print(f"input: {len(w)} samples at {RATE} Hz")
print(f"spectrogram: {spec.shape[0]} bins x {spec.shape[1]} frames, dtype {spec.dtype}")

back = istft(spec, cfg, sample_rate=RATE)
interior = slice(cfg.n_fft, len(back) - cfg.n_fft)
err = back.samples[interior] - w.samples[interior]
print(f"round trip: {len(back)} samples, interior rms error {np.sqrt(np.mean(err**2)):.3e}")

# The magnitude view is what the model consumes; phase rides along untouched.
mag = magnitude(spec)
loud = np.unravel_index(np.argmax(mag), mag.shape)
print(f"loudest bin: frequency index {loud[0]}, frame {loud[1]}, |X| = {mag[loud]:.3f}")
