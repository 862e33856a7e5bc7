"""Waveform container and 16-bit PCM WAV file I/O.

Only the format the rest of the pipeline consumes is supported: RIFF/WAVE,
PCM code 1, 16-bit little-endian, mono. Anything else is rejected with a
descriptive error instead of being resampled or converted.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from .errors import FormatError

# Full-scale divisor for 16-bit PCM: int16 sample s maps to s / 32768.
PCM_SCALE = 32768.0
# Largest amplitude representable after quantization, 32767/32768.
PCM_MAX = 32767.0 / 32768.0


@dataclass
class Waveform:
    """Mono audio signal with amplitudes nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise FormatError(f"expected mono 1-D samples, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise FormatError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise FormatError("waveform contains non-finite samples")

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def read_wav(path, expected_rate: int | None = None) -> Waveform:
    """Read a 16-bit PCM mono WAV file.

    Args:
        path: file to read.
        expected_rate: if given, reject files whose sample rate differs.

    Returns:
        Waveform with samples scaled to [-1, 1) by dividing by 32768.

    Raises:
        FormatError: not mono / not 16-bit PCM / rate mismatch.
        OSError: unreadable file.
    """
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getcomptype() != "NONE":
                raise FormatError(f"{path}: expected uncompressed PCM, got {wf.getcomptype()!r}")
            if wf.getnchannels() != 1:
                raise FormatError(f"{path}: expected mono, got {wf.getnchannels()} channels")
            if wf.getsampwidth() != 2:
                raise FormatError(f"{path}: expected 16-bit samples, got {8 * wf.getsampwidth()}-bit")
            rate = wf.getframerate()
            if expected_rate is not None and rate != expected_rate:
                raise FormatError(f"{path}: expected {expected_rate} Hz, got {rate} Hz")
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise FormatError(f"{path}: not a valid WAV file ({exc})") from exc
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / PCM_SCALE, rate)


def write_wav(w: Waveform, path) -> None:
    """Write a Waveform as 16-bit PCM mono.

    Samples are clipped to [-1, 32767/32768] and rounded to the nearest
    quantization level, so read_wav(write_wav(w)) reproduces w within one
    step of 1/32768.
    """
    if w.samples.size and not np.all(np.isfinite(w.samples)):
        raise FormatError("refusing to write non-finite samples")
    clipped = np.clip(w.samples, -1.0, PCM_MAX)
    pcm = np.rint(clipped * PCM_SCALE).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(w.sample_rate)
        wf.writeframes(pcm.tobytes())
