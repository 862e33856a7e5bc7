"""End-to-end model assembly: waveform in, enhanced waveform out.

Pipeline: STFT -> magnitude -> fullband extractor -> per-bin neighborhood
units -> fusion (cross-attention, plain fullband concat, or both) -> shared
LSTM mask predictor -> mask decompression -> complex masking -> inverse
STFT. The noisy phase rides through untouched inside the complex product.

Checkpoints serialize the model config plus every parameter tensor as
little-endian float32 in a fixed order. Initialization rounds every value
through float32, so a save/load roundtrip of fresh parameters is bit-exact.
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .audio import PCM_MAX, Waveform
from .config import ModelConfig, model_config_from_dict, model_config_to_dict
from .errors import ConfigError, FormatError, ShapeError
from .extractor import (
    FullbandExtractorParams,
    fullband_backward,
    fullband_forward,
    init_fullband,
)
from .fusion import (
    DEFAULT_SLAB,
    FscaParams,
    fsca_backward_all,
    fsca_forward_all,
    init_fsca,
)
from .mask import Cirm, apply_mask, decompress
from .stft import istft, magnitude, stft
from .subband import concat_fullband, unfold
from .subband_model import (
    SubbandModelParams,
    init_subband,
    subband_backward_all,
    subband_forward_all,
)

CHECKPOINT_MAGIC = b"FSCA"
CHECKPOINT_VERSION = 1


@dataclass
class ModelParams:
    """All trainable tensors plus the config that shaped them."""

    extractor: FullbandExtractorParams
    fsca: FscaParams | None
    subband: SubbandModelParams
    config: ModelConfig

    def parameters(self):
        out = self.extractor.parameters()
        if self.fsca is not None:
            out = out + self.fsca.parameters()
        return out + self.subband.parameters()

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


def _quantize_f32(a: np.ndarray) -> np.ndarray:
    # Parameters live on an f32 grid so checkpoint roundtrips are bit-exact.
    return np.asarray(a, dtype=np.float32).astype(np.float64)


def init_params(cfg: ModelConfig, seed: int = 0) -> ModelParams:
    """Deterministic initialization from a seed (see init helpers for scheme)."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    extractor = init_fullband(
        rng, "extractor", cfg.n_freq, cfg.tcn.hidden, cfg.tcn.kernel,
        cfg.tcn.dilations, cfg.tcn.groups, quantize=_quantize_f32)
    fsca = None
    if cfg.fusion_mode != "concat":
        fsca = init_fsca(
            rng, "fsca", cfg.n_freq, cfg.unit_width, cfg.attention.d_model,
            cfg.attention.heads, cfg.attention.ffn_ratio,
            mask=cfg.attention.mask, quantize=_quantize_f32)
    subband = init_subband(
        rng, "subband", cfg.lstm_input_width, cfg.lstm.hidden, cfg.lstm.layers,
        quantize=_quantize_f32)
    return ModelParams(extractor=extractor, fsca=fsca, subband=subband, config=cfg)


def predict_mask(mag: np.ndarray, p: ModelParams, slab: int = DEFAULT_SLAB,
                 want_cache: bool = True):
    """Compressed mask prediction for a magnitude spectrogram [F, T].

    Returns (Cirm with compressed=True, cache); pass the cache to
    ``predict_mask_backward`` during training, or request none for inference.
    """
    cfg = p.config
    mag = np.asarray(mag, dtype=np.float64)
    if mag.ndim != 2 or mag.shape[0] != cfg.n_freq:
        raise ShapeError(f"expected [{cfg.n_freq}, T] magnitudes, got {mag.shape}")
    g, g_cache = fullband_forward(mag, p.extractor)
    units = unfold(mag, cfg.n)
    fsca_cache = None
    if cfg.fusion_mode == "attention":
        embs, fsca_cache = fsca_forward_all(units, g, p.fsca, slab=slab,
                                            want_cache=want_cache)
    elif cfg.fusion_mode == "concat":
        embs = concat_fullband(units, g)
    else:
        fused, fsca_cache = fsca_forward_all(units, g, p.fsca, slab=slab,
                                             want_cache=want_cache)
        embs = concat_fullband(fused, g)
    tracks, sub_cache = subband_forward_all(embs, p.subband, want_cache=want_cache)
    pred = Cirm(tracks[:, 0, :], tracks[:, 1, :], compressed=True)
    cache = (g_cache, fsca_cache, sub_cache, mag.shape) if want_cache else None
    return pred, cache


def predict_mask_backward(d_real: np.ndarray, d_imag: np.ndarray,
                          p: ModelParams, cache) -> np.ndarray:
    """Accumulate parameter grads from mask-track grads; returns d(magnitude)."""
    g_cache, fsca_cache, sub_cache, mag_shape = cache
    cfg = p.config
    dtracks = np.stack([d_real, d_imag], axis=1)  # [F, 2, T]
    dembs = subband_backward_all(dtracks, sub_cache)
    if cfg.fusion_mode == "attention":
        dunits, dg = fsca_backward_all(dembs, fsca_cache)
    elif cfg.fusion_mode == "concat":
        dunits, dg = dembs[:, :-1, :], dembs[:, -1, :].copy()
    else:
        dfused, dg_row = dembs[:, :-1, :], dembs[:, -1, :]
        dunits, dg = fsca_backward_all(dfused, fsca_cache)
        dg = dg + dg_row
    # Scatter unit grads back onto the bins each unit read (circular wrap).
    n_freq = mag_shape[0]
    offsets = np.arange(-cfg.n, cfg.n + 1)
    rows = (np.arange(n_freq)[:, None] + offsets[None, :]) % n_freq
    dmag = np.zeros(mag_shape)
    np.add.at(dmag, rows.reshape(-1), dunits.reshape(-1, mag_shape[1]))
    dmag += fullband_backward(dg, g_cache)
    return dmag


def _mask_slice(units, g, p: ModelParams, lo: int, hi: int, slab: int) -> np.ndarray:
    """Mask tracks [hi-lo, 2, T] for one contiguous range of frequency bins."""
    cfg = p.config
    if cfg.fusion_mode == "attention":
        embs, _ = fsca_forward_all(units[lo:hi], g, p.fsca, slab=slab, want_cache=False)
    elif cfg.fusion_mode == "concat":
        embs = concat_fullband(units[lo:hi], g[lo:hi])
    else:
        fused, _ = fsca_forward_all(units[lo:hi], g, p.fsca, slab=slab, want_cache=False)
        embs = concat_fullband(fused, g[lo:hi])
    tracks, _ = subband_forward_all(embs, p.subband, want_cache=False)
    return tracks


def enhance(noisy: Waveform, p: ModelParams, threads: int = 1,
            slab: int = DEFAULT_SLAB) -> Waveform:
    """Denoise a waveform; output clipped to the 16-bit PCM range.

    ``threads`` splits the per-bin stages over contiguous frequency ranges;
    every slab/thread arrangement produces identical bits because slice
    shapes inside the batched kernels do not depend on the range size.
    """
    cfg = p.config
    if noisy.sample_rate != cfg.sample_rate:
        raise FormatError(
            f"waveform rate {noisy.sample_rate} != model rate {cfg.sample_rate}")
    if len(noisy) < cfg.n_fft:
        raise ShapeError(f"need at least {cfg.n_fft} samples, got {len(noisy)}")
    if threads < 1:
        raise ShapeError(f"threads must be >= 1, got {threads}")
    scfg = cfg.stft()
    spec = stft(noisy, scfg)
    mag = magnitude(spec)
    g, _ = fullband_forward(mag, p.extractor)
    units = unfold(mag, cfg.n)
    n_freq = cfg.n_freq
    if threads == 1:
        tracks = _mask_slice(units, g, p, 0, n_freq, slab)
    else:
        bounds = np.linspace(0, n_freq, min(threads, n_freq) + 1).astype(int)
        ranges = [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
            parts = list(pool.map(
                lambda r: _mask_slice(units, g, p, r[0], r[1], slab), ranges))
        tracks = np.concatenate(parts, axis=0)
    compressed = Cirm(tracks[:, 0, :], tracks[:, 1, :], compressed=True)
    m = decompress(compressed, k=cfg.cirm.k, c=cfg.cirm.c)
    cleaned = apply_mask(spec, m)
    out = istft(cleaned, scfg, sample_rate=cfg.sample_rate)
    samples = np.clip(out.samples, -1.0, PCM_MAX)
    return Waveform(samples=samples, sample_rate=cfg.sample_rate)


# ---------------------------------------------------------------------------
# checkpoint serialization
# ---------------------------------------------------------------------------

def save_checkpoint(p: ModelParams, path) -> None:
    """Write magic, version, JSON metadata, then f32 tensor payloads."""
    tensors = []
    offset = 0
    params = p.parameters()
    for q in params:
        tensors.append({"name": q.name, "shape": list(q.value.shape), "offset": offset})
        offset += 4 * q.value.size
    meta = json.dumps({
        "config": model_config_to_dict(p.config),
        "tensors": tensors,
    }).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(meta)))
        fh.write(meta)
        for q in params:
            fh.write(np.ascontiguousarray(q.value, dtype="<f4").tobytes())


def load_checkpoint(path) -> ModelParams:
    """Read a checkpoint back into freshly shaped parameters (bit-exact)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a model checkpoint (bad magic)")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack("<Q", blob[8:16])
    if len(blob) < 16 + meta_len:
        raise FormatError(f"{path}: truncated metadata")
    try:
        meta = json.loads(blob[16:16 + meta_len].decode("utf-8"))
        cfg = model_config_from_dict(meta["config"])
        entries = meta["tensors"]
    except (ValueError, KeyError, ConfigError) as exc:
        raise FormatError(f"{path}: invalid checkpoint metadata: {exc}") from None
    p = init_params(cfg, seed=0)
    params = p.parameters()
    if len(entries) != len(params):
        raise FormatError(
            f"{path}: checkpoint lists {len(entries)} tensors, config implies {len(params)}")
    payload = blob[16 + meta_len:]
    for entry, q in zip(entries, params):
        if entry["name"] != q.name:
            raise FormatError(
                f"{path}: tensor name mismatch: {entry['name']!r} vs expected {q.name!r}")
        if tuple(entry["shape"]) != q.value.shape:
            raise FormatError(
                f"{path}: tensor {q.name}: shape {entry['shape']} vs expected "
                f"{list(q.value.shape)}")
        start = entry["offset"]
        end = start + 4 * q.value.size
        if end > len(payload):
            raise FormatError(f"{path}: truncated payload at tensor {q.name}")
        data = np.frombuffer(payload[start:end], dtype="<f4")
        q.value[...] = data.astype(np.float64).reshape(q.value.shape)
    return p
