"""The finite-difference harness itself, then the full derivative suite."""

import numpy as np
import pytest

from fsca.gradcheck import (
    SUITE,
    check_end_to_end,
    grad_check,
    run_suite,
    small_model_config,
)
from fsca.ops import Parameter, linear, linear_backward


def test_harness_accepts_correct_gradient():
    rng = np.random.default_rng(0)
    w = Parameter("w", rng.standard_normal((4, 3)))
    b = Parameter("b", rng.standard_normal(3))
    x = rng.standard_normal((5, 4))

    def fwd(x):
        y, cache = linear(x, w, b)
        return y, lambda dy: (linear_backward(dy, cache),)

    assert grad_check(fwd, [x], [w, b], rng=rng) <= 1e-7


def test_harness_flags_wrong_input_gradient():
    rng = np.random.default_rng(1)
    w = Parameter("w", rng.standard_normal((4, 3)))
    b = Parameter("b", rng.standard_normal(3))
    x = rng.standard_normal((5, 4))

    def fwd(x):
        y, cache = linear(x, w, b)
        return y, lambda dy: (1.25 * linear_backward(dy, cache),)

    assert grad_check(fwd, [x], [w, b], rng=rng) > 1e-2


def test_harness_flags_wrong_parameter_gradient():
    rng = np.random.default_rng(2)
    w = Parameter("w", rng.standard_normal((4, 3)))
    b = Parameter("b", rng.standard_normal(3))
    x = rng.standard_normal((5, 4))

    def fwd(x):
        y, cache = linear(x, w, b)

        def pull(dy):
            dx = linear_backward(dy, cache)
            w.grad += 0.01 * rng.standard_normal(w.grad.shape)
            return (dx,)

        return y, pull

    assert grad_check(fwd, [x], [w, b], rng=rng) > 1e-3


def test_suite_covers_every_stage():
    names = {name for name, _, _ in SUITE}
    expected = {
        "linear", "pointwise_conv", "depthwise_dilated_conv", "relu", "prelu",
        "softmax_rows", "global_layer_norm", "lstm_layer",
        "multi_head_attention", "tcn_block", "fsca_forward", "subband_forward",
        "cirm_mse_loss", "end_to_end_loss",
    }
    assert names == expected


@pytest.mark.parametrize("seed", [0, 1])
def test_full_suite_passes(seed):
    results = run_suite(seed=seed, rounds=2)
    failures = [(r.name, r.worst, r.tolerance) for r in results if not r.passed]
    assert not failures, f"derivative mismatches: {failures}"


@pytest.mark.parametrize("mode", ["concat", "attention_concat"])
def test_end_to_end_gradients_other_fusion_modes(mode):
    worst = check_end_to_end(np.random.default_rng(3), fusion_mode=mode)
    assert worst <= 1e-4


def test_small_model_config_is_valid():
    for mode in ("attention", "concat", "attention_concat"):
        cfg = small_model_config(mode)
        cfg.validate()
        assert cfg.n_freq == 33
