"""Desk-scale training: dynamic mixing, compressed-mask MSE, and Adam.

Each step draws a fresh (clean, noise) pairing, signal-to-noise ratio, and
optional room impulse response, builds the oracle compressed mask for a
random fixed-length chunk, and takes one Adam step on the mean squared
error between predicted and oracle mask tracks. When an impulse response
is applied, the target stays the reverberant clean signal: the model learns
to remove noise, not reverberation.
"""

from __future__ import annotations

import numpy as np

from .audio import Waveform
from .config import MixSpec, ModelConfig, TrainConfig
from .errors import FormatError, ShapeError
from .mask import Cirm, compress, compute_cirm
from .model import ModelParams, init_params, predict_mask, predict_mask_backward
from .stft import stft


def mix(clean: Waveform, noise: Waveform, snr_db: float, rir: Waveform = None):
    """Mix noise into clean speech at an exact SNR; returns (noisy, target).

    The noise is looped or trimmed to the clean length and scaled so
    10*log10(P_clean / P_noise) = snr_db. If the mixture peaks above 1,
    both signals are rescaled to peak 0.99 (the mask target is unaffected
    because both sides scale together).
    """
    if clean.sample_rate != noise.sample_rate:
        raise FormatError(
            f"sample rates differ: clean {clean.sample_rate}, noise {noise.sample_rate}")
    target = clean.samples
    if rir is not None:
        if rir.sample_rate != clean.sample_rate:
            raise FormatError(
                f"impulse response rate {rir.sample_rate} != clean rate {clean.sample_rate}")
        target = np.convolve(clean.samples, rir.samples)[:len(clean)]
    length = target.shape[0]
    n = noise.samples
    if n.shape[0] < length:
        reps = -(-length // n.shape[0])
        n = np.tile(n, reps)
    n = n[:length]
    p_clean = float(np.mean(target ** 2))
    p_noise = float(np.mean(n ** 2))
    if p_clean == 0.0:
        raise FormatError("clean signal has zero power")
    if p_noise == 0.0:
        raise FormatError("noise signal has zero power")
    alpha = np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    noisy = target + alpha * n
    peak = float(np.max(np.abs(noisy)))
    if peak > 1.0:
        scale = 0.99 / peak
        noisy = noisy * scale
        target = target * scale
    return (Waveform(samples=noisy, sample_rate=clean.sample_rate),
            Waveform(samples=np.array(target, copy=True), sample_rate=clean.sample_rate))


def cirm_mse_loss(pred: Cirm, target: Cirm) -> float:
    """Mean squared error over both mask tracks and all bins."""
    loss, _ = cirm_mse_loss_grad(pred, target)
    return loss


def cirm_mse_loss_grad(pred: Cirm, target: Cirm):
    """Loss plus its gradients (d_real, d_imag) w.r.t. the predicted tracks."""
    if pred.shape != target.shape:
        raise ShapeError(f"mask shapes differ: {pred.shape} vs {target.shape}")
    if pred.compressed != target.compressed:
        raise ShapeError("cannot compare a compressed mask with an uncompressed one")
    dr = pred.real - target.real
    di = pred.imag - target.imag
    count = 2 * dr.size
    loss = (np.sum(dr * dr) + np.sum(di * di)) / count
    return float(loss), (2.0 * dr / count, 2.0 * di / count)


class AdamState:
    """First/second moment accumulators for a fixed parameter list."""

    def __init__(self, params):
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]
        self.t = 0


def adam_step(params, state: AdamState, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update from the accumulated ``.grad`` fields."""
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.value -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def oracle_mask(noisy_spec: np.ndarray, target_spec: np.ndarray,
                cfg: ModelConfig) -> Cirm:
    """Compressed oracle mask for a (noisy, target) spectrogram pair."""
    return compress(compute_cirm(noisy_spec, target_spec), k=cfg.cirm.k, c=cfg.cirm.c)


def train_step(params: ModelParams, state: AdamState, noisy_spec, target_spec,
               train_cfg: TrainConfig) -> float:
    """Forward, loss, backward, Adam on one spectrogram chunk; returns loss."""
    cfg = params.config
    target = oracle_mask(noisy_spec, target_spec, cfg)
    mag = np.abs(noisy_spec)
    params.zero_grad()
    pred, cache = predict_mask(mag, params)
    loss, (d_real, d_imag) = cirm_mse_loss_grad(pred, target)
    predict_mask_backward(d_real, d_imag, params, cache)
    adam_step(params.parameters(), state, lr=train_cfg.learning_rate,
              beta1=train_cfg.beta1, beta2=train_cfg.beta2, eps=train_cfg.eps)
    return loss


def sample_mix_draw(rng, n_pairs: int, mix_spec: MixSpec, n_rirs: int):
    """One step's sampling decisions: (pair index, snr_db, rir index or None).

    The impulse-response coin is tossed on every draw, even with no impulse
    responses available, so the application rate can be audited directly.
    """
    idx = int(rng.integers(n_pairs))
    snr = float(rng.uniform(mix_spec.snr_db[0], mix_spec.snr_db[1]))
    use_rir = float(rng.uniform()) < mix_spec.rir_probability
    rir_idx = int(rng.integers(n_rirs)) if (use_rir and n_rirs) else None
    return idx, snr, rir_idx


def train_loop(train_cfg: TrainConfig, data, mix_spec: MixSpec,
               model_cfg: ModelConfig, rirs=None, params: ModelParams = None,
               on_step=None):
    """Dynamic-mixing training; returns (params, per-step loss list).

    ``data`` is a list of (clean, noise) Waveform pairs; ``rirs`` an optional
    list of impulse responses applied with the configured probability. All
    sampling derives from the train and mix seeds, so two runs with the same
    seeds produce bit-identical parameters.
    """
    if not data:
        raise FormatError("no training pairs given")
    train_cfg.validate()
    mix_spec.validate()
    if params is None:
        params = init_params(model_cfg, seed=train_cfg.seed)
    else:
        model_cfg = params.config
    scfg = model_cfg.stft()
    rng = np.random.default_rng([train_cfg.seed, mix_spec.seed])
    state = AdamState(params.parameters())
    losses = []
    for step in range(train_cfg.steps):
        idx, snr, rir_idx = sample_mix_draw(rng, len(data), mix_spec,
                                            0 if rirs is None else len(rirs))
        clean, noise = data[idx]
        rir = None if rir_idx is None else rirs[rir_idx]
        noisy, target = mix(clean, noise, snr, rir)
        noisy_spec = stft(noisy, scfg)
        target_spec = stft(target, scfg)
        total = noisy_spec.shape[1]
        span = min(train_cfg.chunk_frames, total)
        off = int(rng.integers(total - span + 1))
        loss = train_step(params, state, noisy_spec[:, off:off + span],
                          target_spec[:, off:off + span], train_cfg)
        losses.append(loss)
        if on_step is not None:
            on_step(step, loss)
    return params, losses
