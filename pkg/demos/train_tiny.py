"""Walkthrough: overfitting a tiny model on one noisy clip, end to end.

Trains a scaled-down model (33 bins, 16-wide blocks) on a single sine+noise
pair for 500 steps, then enhances the training clip and reports the gain.
Artifacts land in demos/out/ so enhance_file.py can pick them up.
"""

import time
from pathlib import Path

import numpy as np

from fsca import (
    MixSpec,
    TrainConfig,
    Waveform,
    enhance,
    load_config,
    mix,
    save_checkpoint,
    si_sdr,
    train_loop,
    write_wav,
)

HERE = Path(__file__).resolve().parent
OUT = HERE / "out"
OUT.mkdir(exist_ok=True)

full = load_config(HERE.parent / "configs" / "tiny.json")
cfg = full.model
scfg = cfg.stft()

# One training chunk exactly: every step then sees the identical spectrogram.
n = scfg.num_samples(full.training.chunk_frames)
t = np.arange(n) / cfg.sample_rate
clean = Waveform(0.4 * np.sin(2 * np.pi * 440 * t) + 0.2 * np.sin(2 * np.pi * 880 * t),
                 cfg.sample_rate)
rng = np.random.default_rng(0)
noise = Waveform(0.35 * rng.standard_normal(n), cfg.sample_rate)
print(f"training clip: {n} samples = {full.training.chunk_frames} frames")

tcfg = TrainConfig(learning_rate=1e-3, steps=500, chunk_frames=full.training.chunk_frames,
                   seed=0)
spec = MixSpec(snr_db=(0.0, 0.0), rir_probability=0.0, seed=0)
start = time.perf_counter()
params, losses = train_loop(tcfg, [(clean, noise)], spec, cfg)
elapsed = time.perf_counter() - start
for step in (0, 99, 249, 499):
    print(f"  step {step:3d}: loss {losses[step]:.5f}")
print(f"{tcfg.steps} steps in {elapsed:.1f}s, "
      f"final/initial loss = {losses[-1] / losses[0]:.3f}")

noisy, target = mix(clean, noise, 0.0)
cleaned = enhance(noisy, params)
before = si_sdr(target, noisy)
after = si_sdr(target.samples, cleaned.samples)
print(f"si-sdr: noisy {before:.2f} dB -> enhanced {after:.2f} dB "
      f"(gain {after - before:+.2f} dB)")

save_checkpoint(params, OUT / "tiny.fsca")
write_wav(noisy, OUT / "noisy.wav")
write_wav(target, OUT / "target.wav")
write_wav(cleaned, OUT / "enhanced.wav")
print(f"wrote {OUT / 'tiny.fsca'}, noisy/target/enhanced WAVs alongside")
