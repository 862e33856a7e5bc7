"""Shared-parameter LSTM mask predictor."""

import numpy as np
import pytest

from fsca.errors import ShapeError
from fsca.subband_model import (
    init_subband,
    subband_forward,
    subband_forward_all,
)


def test_output_shapes():
    rng = np.random.default_rng(0)
    p = init_subband(rng, "s", d_in=5, hidden=6, layers=2)
    y, _ = subband_forward(rng.standard_normal((5, 9)), p)
    assert y.shape == (2, 9)
    ys, _ = subband_forward_all(rng.standard_normal((11, 5, 9)), p)
    assert ys.shape == (11, 2, 9)


def test_zero_params_zero_output():
    rng = np.random.default_rng(1)
    p = init_subband(rng, "s", d_in=3, hidden=4, layers=2)
    for q in p.parameters():
        q.value[...] = 0.0
    y, _ = subband_forward(np.ones((3, 6)), p)
    np.testing.assert_array_equal(y, np.zeros((2, 6)))


def test_strict_frame_causality():
    rng = np.random.default_rng(2)
    p = init_subband(rng, "s", d_in=3, hidden=5, layers=2)
    emb = rng.standard_normal((3, 8))
    y1, _ = subband_forward(emb, p)
    emb2 = emb.copy()
    emb2[:, 5:] += 3.0
    y2, _ = subband_forward(emb2, p)
    np.testing.assert_array_equal(y1[:, :5], y2[:, :5])
    assert np.any(y1[:, 5:] != y2[:, 5:])


def test_parameter_sharing_across_bins():
    rng = np.random.default_rng(3)
    p = init_subband(rng, "s", d_in=4, hidden=5, layers=2)
    embs = rng.standard_normal((6, 4, 7))
    embs[5] = embs[0]
    y, _ = subband_forward_all(embs, p)
    np.testing.assert_array_equal(y[5], y[0])


def test_forward_all_bitexact_vs_loop():
    rng = np.random.default_rng(4)
    p = init_subband(rng, "s", d_in=4, hidden=5, layers=2)
    embs = rng.standard_normal((9, 4, 6))
    y_all, _ = subband_forward_all(embs, p)
    for f in range(9):
        y_one, _ = subband_forward(embs[f], p)
        np.testing.assert_array_equal(y_all[f], y_one)


def test_range_slices_bitexact():
    # Contiguous sub-ranges reproduce the full run's rows exactly, which is
    # what makes thread-splitting over bins safe.
    rng = np.random.default_rng(5)
    p = init_subband(rng, "s", d_in=4, hidden=5, layers=2)
    embs = rng.standard_normal((9, 4, 6))
    y_all, _ = subband_forward_all(embs, p)
    for lo, hi in [(0, 3), (3, 9), (2, 7)]:
        part, _ = subband_forward_all(embs[lo:hi], p)
        np.testing.assert_array_equal(part, y_all[lo:hi])


def test_default_parameter_count():
    rng = np.random.default_rng(6)
    p = init_subband(rng, "s", d_in=31, hidden=384, layers=2)
    layer1 = 31 * 4 * 384 + 384 * 4 * 384 + 4 * 384
    layer2 = 384 * 4 * 384 + 384 * 4 * 384 + 4 * 384
    assert layer1 == 638976 and layer2 == 1181184
    assert sum(q.size for q in p.parameters()) == layer1 + layer2 + 770 == 1820930


def test_validation():
    rng = np.random.default_rng(7)
    p = init_subband(rng, "s", d_in=4, hidden=5, layers=2)
    with pytest.raises(ShapeError):
        subband_forward(np.zeros((3, 6)), p)
    with pytest.raises(ShapeError):
        subband_forward_all(np.zeros((2, 3, 6)), p)
    with pytest.raises(ShapeError):
        init_subband(rng, "s", d_in=4, hidden=5, layers=0)
