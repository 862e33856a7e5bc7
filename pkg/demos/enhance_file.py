"""Walkthrough: loading a checkpoint and denoising a WAV file.

Usage: python demos/enhance_file.py [checkpoint] [input.wav] [output.wav]
Defaults to the artifacts train_tiny.py leaves in demos/out/.
"""

import sys
from pathlib import Path

from fsca import enhance, evaluate, load_checkpoint, read_wav, write_wav

HERE = Path(__file__).resolve().parent
args = sys.argv[1:]
ckpt_path = Path(args[0]) if len(args) > 0 else HERE / "out" / "tiny.fsca"
in_path = Path(args[1]) if len(args) > 1 else HERE / "out" / "noisy.wav"
out_path = Path(args[2]) if len(args) > 2 else HERE / "out" / "enhanced_again.wav"

if not ckpt_path.exists():
    sys.exit(f"{ckpt_path} not found; run demos/train_tiny.py first")

params = load_checkpoint(ckpt_path)
total = sum(q.value.size for q in params.parameters())
print(f"checkpoint: {ckpt_path.name}, {total} parameters, "
      f"{params.config.n_freq} bins, fusion mode {params.config.fusion_mode!r}")

noisy = read_wav(in_path, expected_rate=params.config.sample_rate)
cleaned = enhance(noisy, params, threads=2)
write_wav(cleaned, out_path)
print(f"enhanced {in_path.name} ({noisy.duration:.2f}s) -> {out_path}")

ref_path = HERE / "out" / "target.wav"
if ref_path.exists() and len(args) == 0:
    ref = read_wav(ref_path)
    report = evaluate(ref, cleaned)
    print(f"si-sdr against the known clean target: {report.si_sdr_db:.2f} dB")
