"""WAV I/O and waveform container behavior."""

import struct
import wave

import numpy as np
import pytest

from fsca.audio import PCM_MAX, PCM_SCALE, Waveform, read_wav, write_wav
from fsca.errors import FormatError


def test_roundtrip_exact_on_grid(tmp_path):
    rng = np.random.default_rng(0)
    pcm = rng.integers(-32768, 32768, size=1000)
    w = Waveform(pcm / PCM_SCALE, 16000)
    path = tmp_path / "a.wav"
    write_wav(w, path)
    back = read_wav(path)
    assert back.sample_rate == 16000
    np.testing.assert_array_equal(back.samples, w.samples)


def test_roundtrip_within_one_quantization_step(tmp_path):
    rng = np.random.default_rng(1)
    w = Waveform(rng.uniform(-0.9, 0.9, size=500), 8000)
    path = tmp_path / "a.wav"
    write_wav(w, path)
    back = read_wav(path)
    assert np.max(np.abs(back.samples - w.samples)) <= 1.0 / PCM_SCALE


def test_write_clips_out_of_range(tmp_path):
    w = Waveform(np.array([2.0, -3.0, 0.5]), 16000)
    path = tmp_path / "a.wav"
    write_wav(w, path)
    back = read_wav(path)
    assert back.samples[0] == pytest.approx(PCM_MAX)
    assert back.samples[1] == -1.0
    assert back.samples[2] == pytest.approx(0.5, abs=1.0 / PCM_SCALE)


def test_expected_rate_mismatch(tmp_path):
    path = tmp_path / "a.wav"
    write_wav(Waveform(np.zeros(100), 8000), path)
    with pytest.raises(FormatError, match="8000"):
        read_wav(path, expected_rate=16000)
    assert read_wav(path, expected_rate=8000).sample_rate == 8000


def test_rejects_stereo(tmp_path):
    path = tmp_path / "stereo.wav"
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(2)
        wf.setsampwidth(2)
        wf.setframerate(16000)
        wf.writeframes(struct.pack("<4h", 1, 2, 3, 4))
    with pytest.raises(FormatError, match="mono"):
        read_wav(path)


def test_rejects_non_16bit(tmp_path):
    path = tmp_path / "wide.wav"
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(4)
        wf.setframerate(16000)
        wf.writeframes(struct.pack("<2i", 1, 2))
    with pytest.raises(FormatError, match="16-bit"):
        read_wav(path)


def test_rejects_non_wav(tmp_path):
    path = tmp_path / "junk.wav"
    path.write_bytes(b"this is not audio at all, definitely not RIFF")
    with pytest.raises(FormatError):
        read_wav(path)


def test_missing_file_is_oserror(tmp_path):
    with pytest.raises(OSError):
        read_wav(tmp_path / "nope.wav")


def test_waveform_validation():
    with pytest.raises(FormatError):
        Waveform(np.zeros((2, 3)), 16000)
    with pytest.raises(FormatError):
        Waveform(np.zeros(4), 0)
    with pytest.raises(FormatError):
        Waveform(np.array([0.0, np.nan]), 16000)


def test_write_refuses_nonfinite_mutation(tmp_path):
    w = Waveform(np.zeros(4), 16000)
    w.samples[1] = np.inf
    with pytest.raises(FormatError):
        write_wav(w, tmp_path / "bad.wav")


def test_duration_and_len():
    w = Waveform(np.zeros(8000), 16000)
    assert len(w) == 8000
    assert w.duration == pytest.approx(0.5)
