"""Cross-attention fusion against hand-rolled references."""

import numpy as np
import pytest

from fsca.errors import ShapeError
from fsca.fusion import (
    fsca_attention_cache,
    fsca_forward,
    fsca_forward_all,
    init_fsca,
)
from fsca.ops import attention_weights


def reference_fusion(unit, g, p):
    """Step-by-step per-frame projections and per-head attention loops."""
    t_len = unit.shape[1]
    d = p.w_q.value.shape[1]
    heads, dk = p.heads, d // p.heads
    q = np.stack([g[:, t] @ p.w_q.value + p.b_q.value for t in range(t_len)])
    k = np.stack([unit[:, t] @ p.w_k.value + p.b_k.value for t in range(t_len)])
    v = np.stack([unit[:, t] @ p.w_v.value + p.b_v.value for t in range(t_len)])
    merged = np.zeros((t_len, d))
    for h in range(heads):
        qh, kh, vh = (m[:, h * dk:(h + 1) * dk] for m in (q, k, v))
        for t in range(t_len):
            scores = qh[t] @ kh.T / np.sqrt(dk)
            e = np.exp(scores - scores.max())
            merged[t, h * dk:(h + 1) * dk] = (e / e.sum()) @ vh
    att_out = merged @ p.w_o.value + p.b_o.value  # [T, width]
    z = unit + att_out.T
    f1 = np.maximum(z.T @ p.w_f1.value + p.b_f1.value, 0.0)
    return z + (f1 @ p.w_f2.value + p.b_f2.value).T


@pytest.mark.parametrize("seed", range(6))
def test_forward_matches_reference(seed):
    rng = np.random.default_rng(seed)
    p = init_fsca(rng, "f", n_freq=6, width=3, d_model=4, heads=2, ffn_ratio=2)
    unit = rng.standard_normal((3, 3))
    g = rng.standard_normal((6, 3))
    y, _ = fsca_forward(unit, g, p)
    assert y.shape == unit.shape
    assert np.max(np.abs(y - reference_fusion(unit, g, p))) <= 1e-12


def test_zero_projections_pure_residual():
    rng = np.random.default_rng(1)
    p = init_fsca(rng, "f", n_freq=6, width=3, d_model=4, heads=2, ffn_ratio=2)
    p.w_o.value[...] = 0.0
    p.w_f2.value[...] = 0.0
    unit = rng.standard_normal((3, 5))
    g = rng.standard_normal((6, 5))
    y, _ = fsca_forward(unit, g, p)
    np.testing.assert_array_equal(y, unit)


@pytest.mark.parametrize("slab", [1, 2, 5, 8, 64])
def test_forward_all_bitexact_vs_loop(slab):
    rng = np.random.default_rng(2)
    p = init_fsca(rng, "f", n_freq=8, width=5, d_model=6, heads=3, ffn_ratio=2)
    units = rng.standard_normal((8, 5, 4))
    g = rng.standard_normal((8, 4))
    out, _ = fsca_forward_all(units, g, p, slab=slab)
    assert out.shape == units.shape
    for f in range(8):
        single, _ = fsca_forward(units[f], g, p)
        np.testing.assert_array_equal(out[f], single)


def test_identical_units_identical_outputs():
    rng = np.random.default_rng(3)
    p = init_fsca(rng, "f", n_freq=7, width=3, d_model=4, heads=2, ffn_ratio=2)
    units = rng.standard_normal((7, 3, 5))
    units[4] = units[1]
    g = rng.standard_normal((7, 5))
    out, _ = fsca_forward_all(units, g, p)
    np.testing.assert_array_equal(out[4], out[1])


def test_attention_rows_sum_to_one():
    rng = np.random.default_rng(4)
    p = init_fsca(rng, "f", n_freq=6, width=3, d_model=4, heads=2, ffn_ratio=2)
    _, cache = fsca_forward(rng.standard_normal((3, 5)), rng.standard_normal((6, 5)), p)
    att = attention_weights(fsca_attention_cache(cache))
    np.testing.assert_allclose(att.sum(axis=-1), 1.0, atol=1e-9)


def test_frame_permutation_equivariance():
    rng = np.random.default_rng(5)
    p = init_fsca(rng, "f", n_freq=6, width=3, d_model=4, heads=2, ffn_ratio=2)
    unit = rng.standard_normal((3, 7))
    g = rng.standard_normal((6, 7))
    perm = rng.permutation(7)
    y, _ = fsca_forward(unit, g, p)
    y_perm, _ = fsca_forward(unit[:, perm], g[:, perm], p)
    np.testing.assert_allclose(y_perm, y[:, perm], atol=1e-12)


def test_shape_validation():
    rng = np.random.default_rng(6)
    p = init_fsca(rng, "f", n_freq=6, width=3, d_model=4, heads=2, ffn_ratio=2)
    with pytest.raises(ShapeError):
        fsca_forward(np.zeros((4, 5)), np.zeros((6, 5)), p)  # wrong width
    with pytest.raises(ShapeError):
        fsca_forward(np.zeros((3, 5)), np.zeros((5, 5)), p)  # wrong F
    with pytest.raises(ShapeError):
        fsca_forward(np.zeros((3, 5)), np.zeros((6, 4)), p)  # mismatched T
    with pytest.raises(ShapeError):
        init_fsca(rng, "f", n_freq=6, width=3, d_model=5, heads=2, ffn_ratio=2)


def test_default_parameter_count():
    rng = np.random.default_rng(7)
    p = init_fsca(rng, "f", n_freq=257, width=31, d_model=256, heads=8, ffn_ratio=4)
    assert sum(q.size for q in p.parameters()) == 98242
