"""Mixing, loss, optimizer, and the training loop."""

import numpy as np
import pytest

from fsca.audio import Waveform
from fsca.config import MixSpec, TrainConfig
from fsca.errors import FormatError, ShapeError
from fsca.gradcheck import small_model_config
from fsca.mask import Cirm
from fsca.ops import Parameter
from fsca.train import (
    AdamState,
    adam_step,
    cirm_mse_loss,
    cirm_mse_loss_grad,
    mix,
    oracle_mask,
    sample_mix_draw,
    train_loop,
)

RATE = 16000


def measured_snr_db(mixture, clean):
    noise_part = mixture.samples - clean
    return 10 * np.log10(np.sum(clean ** 2) / np.sum(noise_part ** 2))


def test_mix_hits_requested_snr_exactly():
    # Amplitudes kept small enough that the peak-rescue path never fires,
    # so the target must be the untouched clean signal.
    rng = np.random.default_rng(0)
    clean = Waveform(0.05 * rng.standard_normal(RATE), RATE)
    noise = Waveform(0.2 * rng.standard_normal(RATE), RATE)
    for snr in (-5.0, 0.0, 7.5, 20.0):
        noisy, target = mix(clean, noise, snr)
        got = measured_snr_db(noisy, target.samples)
        assert got == pytest.approx(snr, abs=1e-6)
        # Target is the clean signal itself when no impulse response is given.
        np.testing.assert_allclose(target.samples, clean.samples, rtol=1e-9)


def test_mix_snr20_noise_power_ratio():
    rng = np.random.default_rng(1)
    clean = Waveform(rng.standard_normal(RATE), RATE)
    noise = Waveform(rng.standard_normal(RATE), RATE)
    noisy, target = mix(clean, noise, 20.0)
    added = noisy.samples - target.samples
    ratio = np.sum(added ** 2) / np.sum(target.samples ** 2)
    assert ratio == pytest.approx(0.01, rel=1e-9)


def test_mix_short_noise_is_looped():
    rng = np.random.default_rng(2)
    clean = Waveform(rng.standard_normal(RATE), RATE)
    noise = Waveform(rng.standard_normal(RATE // 3), RATE)
    noisy, target = mix(clean, noise, 0.0)
    assert len(noisy) == len(clean)
    assert measured_snr_db(noisy, target.samples) == pytest.approx(0.0, abs=1e-6)


def test_mix_unit_impulse_rir_is_identity():
    rng = np.random.default_rng(3)
    clean = Waveform(0.1 * rng.standard_normal(RATE), RATE)
    noise = Waveform(rng.standard_normal(RATE), RATE)
    rir = np.zeros(64)
    rir[0] = 1.0
    noisy, target = mix(clean, noise, 5.0, rir=Waveform(rir, RATE))
    np.testing.assert_allclose(target.samples, clean.samples, atol=1e-12)
    assert measured_snr_db(noisy, target.samples) == pytest.approx(5.0, abs=1e-6)


def test_mix_delayed_rir_shifts_target():
    rng = np.random.default_rng(4)
    clean = Waveform(0.2 * rng.standard_normal(RATE), RATE)
    noise = Waveform(rng.standard_normal(RATE), RATE)
    rir = np.zeros(64)
    rir[10] = 0.5
    _, target = mix(clean, noise, 5.0, rir=Waveform(rir, RATE))
    np.testing.assert_allclose(target.samples[10:], 0.5 * clean.samples[:-10],
                               atol=1e-12)
    np.testing.assert_allclose(target.samples[:10], 0.0, atol=1e-12)


def test_mix_peak_normalization():
    t = np.arange(RATE) / RATE
    clean = Waveform(0.95 * np.sin(2 * np.pi * 100 * t), RATE)
    noise = Waveform(0.95 * np.sin(2 * np.pi * 333 * t), RATE)
    noisy, target = mix(clean, noise, 0.0)
    peak = np.max(np.abs(noisy.samples))
    # Rescaling must hit the mixture peak exactly and keep the SNR.
    assert peak == pytest.approx(0.99, abs=1e-9)
    assert measured_snr_db(noisy, target.samples) == pytest.approx(0.0, abs=1e-6)


def test_mix_rejects_degenerate_inputs():
    rng = np.random.default_rng(5)
    good = Waveform(rng.standard_normal(RATE), RATE)
    with pytest.raises(FormatError):
        mix(Waveform(np.zeros(RATE), RATE), good, 0.0)
    with pytest.raises(FormatError):
        mix(good, Waveform(np.zeros(RATE), RATE), 0.0)
    with pytest.raises(FormatError):
        mix(good, Waveform(rng.standard_normal(RATE), 8000), 0.0)


def random_cirm(rng, f, t, compressed=True):
    return Cirm(rng.standard_normal((f, t)), rng.standard_normal((f, t)),
                compressed=compressed)


def test_loss_zero_for_identical_masks():
    rng = np.random.default_rng(6)
    m = random_cirm(rng, 5, 7)
    assert cirm_mse_loss(m, m) == 0.0


def test_loss_known_value():
    f, t = 3, 4
    a = Cirm(np.zeros((f, t)), np.zeros((f, t)), compressed=True)
    b = Cirm(np.ones((f, t)), np.ones((f, t)), compressed=True)
    # Mean over both planes of squared difference 1 everywhere.
    assert cirm_mse_loss(a, b) == pytest.approx(1.0, rel=1e-12)


def test_loss_grad_matches_finite_difference():
    rng = np.random.default_rng(7)
    pred = random_cirm(rng, 4, 5)
    ref = random_cirm(rng, 4, 5)
    (_, (dr, di)) = cirm_mse_loss_grad(pred, ref)
    h = 1e-6
    for _ in range(10):
        i = int(rng.integers(0, 4))
        j = int(rng.integers(0, 5))
        bumped = Cirm(pred.real.copy(), pred.imag.copy(), compressed=True)
        bumped.real[i, j] += h
        num = (cirm_mse_loss(bumped, ref) - cirm_mse_loss(pred, ref)) / h
        assert dr[i, j] == pytest.approx(num, abs=1e-4)


def test_loss_requires_matching_masks():
    rng = np.random.default_rng(8)
    a = random_cirm(rng, 3, 3)
    b = Cirm(a.real.copy(), a.imag.copy(), compressed=False)
    with pytest.raises(ShapeError):
        cirm_mse_loss(a, b)
    with pytest.raises(ShapeError):
        cirm_mse_loss(a, random_cirm(rng, 3, 4))


def test_oracle_mask_is_compressed_and_bounded():
    rng = np.random.default_rng(9)
    y = rng.standard_normal((5, 6)) + 1j * rng.standard_normal((5, 6))
    s = rng.standard_normal((5, 6)) + 1j * rng.standard_normal((5, 6))
    cfg = small_model_config()
    m = oracle_mask(y, s, cfg)
    assert m.compressed
    assert np.all(np.abs(m.real) < cfg.cirm.k)
    assert np.all(np.abs(m.imag) < cfg.cirm.k)


def test_adam_zero_grad_leaves_params():
    p = Parameter("w", np.array([1.0, -2.0, 3.0]))
    state = AdamState([p])
    before = p.value.copy()
    adam_step([p], state, lr=0.1)
    np.testing.assert_array_equal(p.value, before)


def test_adam_constant_grad_step_size():
    # With a constant gradient the bias-corrected update is lr to within
    # epsilon-induced error well under 1%.
    p = Parameter("w", np.zeros(4))
    state = AdamState([p])
    p.grad[:] = 0.37
    adam_step([p], state, lr=1e-3)
    step = -p.value
    np.testing.assert_allclose(step, 1e-3, rtol=0.01)
    assert state.t == 1


def test_adam_descends_quadratic():
    p = Parameter("w", np.array([5.0]))
    state = AdamState([p])
    for _ in range(2000):
        p.zero_grad()
        p.grad[:] = 2 * p.value
        adam_step([p], state, lr=0.05)
    assert abs(p.value[0]) < 1e-2


def test_rir_probability_rate():
    spec = MixSpec(rir_probability=0.75, seed=0)
    rng = np.random.default_rng(0)
    draws = [sample_mix_draw(rng, n_pairs=4, mix_spec=spec, n_rirs=3)
             for _ in range(1000)]
    rate = np.mean([d[2] is not None for d in draws])
    assert 0.70 <= rate <= 0.80
    snrs = np.array([d[1] for d in draws])
    assert snrs.min() >= spec.snr_db[0] and snrs.max() <= spec.snr_db[1]
    idx = np.array([d[0] for d in draws])
    assert set(np.unique(idx)) == {0, 1, 2, 3}


def test_rir_probability_zero_and_one():
    rng = np.random.default_rng(1)
    none_spec = MixSpec(rir_probability=0.0, seed=0)
    all_spec = MixSpec(rir_probability=1.0, seed=0)
    assert all(sample_mix_draw(rng, 2, none_spec, 2)[2] is None
               for _ in range(50))
    assert all(sample_mix_draw(rng, 2, all_spec, 2)[2] is not None
               for _ in range(50))


def tiny_corpus(seconds=0.25):
    cfg = small_model_config()
    n = int(seconds * cfg.sample_rate)
    t = np.arange(n) / cfg.sample_rate
    rng = np.random.default_rng(11)
    clean = Waveform(0.4 * np.sin(2 * np.pi * 440 * t), cfg.sample_rate)
    noise = Waveform(0.3 * rng.standard_normal(n), cfg.sample_rate)
    return cfg, [(clean, noise)]


def test_train_loop_runs_and_reports_losses():
    cfg, pairs = tiny_corpus()
    tcfg = TrainConfig(steps=5, chunk_frames=16, seed=0)
    params, losses = train_loop(tcfg, pairs, MixSpec(seed=0), cfg)
    assert len(losses) == 5
    assert all(np.isfinite(l) for l in losses)
    assert all(l >= 0 for l in losses)
    assert params.config == cfg


def test_train_loop_deterministic():
    cfg, pairs = tiny_corpus()
    tcfg = TrainConfig(steps=4, chunk_frames=16, seed=3)
    spec = MixSpec(seed=1)
    p1, l1 = train_loop(tcfg, pairs, spec, cfg)
    p2, l2 = train_loop(tcfg, pairs, spec, cfg)
    assert l1 == l2
    for a, b in zip(p1.parameters(), p2.parameters()):
        np.testing.assert_array_equal(a.value, b.value)


def test_train_loop_seed_changes_trajectory():
    cfg, pairs = tiny_corpus()
    spec = MixSpec(seed=1)
    _, l1 = train_loop(TrainConfig(steps=4, chunk_frames=16, seed=3), pairs, spec, cfg)
    _, l2 = train_loop(TrainConfig(steps=4, chunk_frames=16, seed=4), pairs, spec, cfg)
    assert l1 != l2


def test_train_loop_callback_sees_every_step():
    cfg, pairs = tiny_corpus()
    seen = []
    train_loop(TrainConfig(steps=3, chunk_frames=16, seed=0), pairs,
               MixSpec(seed=0), cfg,
               on_step=lambda step, loss: seen.append((step, loss)))
    assert [s for s, _ in seen] == [0, 1, 2]


def test_train_loop_resumes_from_given_params():
    cfg, pairs = tiny_corpus()
    tcfg = TrainConfig(steps=2, chunk_frames=16, seed=0)
    start, _ = train_loop(tcfg, pairs, MixSpec(seed=0), cfg)
    before = [p.value.copy() for p in start.parameters()]
    resumed, losses = train_loop(tcfg, pairs, MixSpec(seed=5), cfg, params=start)
    assert resumed is start
    assert len(losses) == 2
    changed = any(not np.array_equal(b, p.value)
                  for b, p in zip(before, resumed.parameters()))
    assert changed


def test_train_loop_rejects_empty_corpus():
    cfg, _ = tiny_corpus()
    with pytest.raises(FormatError):
        train_loop(TrainConfig(steps=1, seed=0), [], MixSpec(seed=0), cfg)
