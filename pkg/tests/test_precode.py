import itertools

import numpy as np
import pytest

from ptsdim.channel import ChannelSet, ConfigError, draw_channel
from ptsdim.gsm_map import IMParams, build_aic_table, densify, encode
from ptsdim.precode import build_bd_precoder, check_bd_dimensions, effective_rx, null_space_basis
from ptsdim.txgen import tx_direct


def _symbols(rng, n_u, params):
    table = build_aic_table(params)
    return np.stack([densify(encode(rng.integers(0, 2, params.bits_per_user), params, table),
                             params.n_s) for _ in range(n_u)])


def test_two_user_one_dim_null_space():
    rng = np.random.default_rng(0)
    ch = draw_channel(rng, 2, 1, 2)
    pre = build_bd_precoder(ch, 1)
    h = ch.blocks()
    assert np.linalg.norm(h[1] @ pre.f_blocks[0]) <= 1e-12
    assert np.linalg.norm(h[0] @ pre.f_blocks[1]) <= 1e-12


def test_fig2_dimensions_feasible():
    check_bd_dimensions(15, 4, 105, 7)
    ch = draw_channel(np.random.default_rng(1), 15, 4, 105)
    pre = build_bd_precoder(ch, 7)
    assert pre.f_blocks.shape == (15, 105, 7)
    assert pre.eff_channels.shape == (15, 4, 7)


@pytest.mark.parametrize("dims,needle", [((4, 2, 10, 3), "n_s <= n_tx/n_u"),
                                         ((3, 4, 10, 3), "null-space dimension")])
def test_infeasible_dimensions(dims, needle):
    with pytest.raises(ConfigError, match=needle):
        check_bd_dimensions(*dims)


def test_nulling_and_orthonormality_random():
    rng = np.random.default_rng(2)
    for _ in range(100):
        ch = draw_channel(rng, 4, 2, 16, 0.1)
        pre = build_bd_precoder(ch, 4)
        hb = ch.blocks(csit=True)
        for k, i in itertools.permutations(range(4), 2):
            assert np.linalg.norm(hb[i] @ pre.f_blocks[k]) <= 1e-9 * np.linalg.norm(hb[i])
        for f in pre.f_blocks:
            assert np.linalg.norm(f.conj().T @ f - np.eye(4)) <= 1e-10


def test_first_null_vectors_from_svd():
    rng = np.random.default_rng(3)
    ch = draw_channel(rng, 3, 2, 9)
    pre = build_bd_precoder(ch, 2)
    others = np.vstack([ch.blocks()[1], ch.blocks()[2]])
    _, _, vh = np.linalg.svd(others)
    assert np.allclose(pre.f_blocks[0], vh[4:6].conj().T)


def test_rank_deficient_other_users():
    rng = np.random.default_rng(4)
    row = rng.standard_normal((1, 6)) + 1j * rng.standard_normal((1, 6))
    h = np.vstack([row, row, rng.standard_normal((1, 6)) + 0j])
    ch = ChannelSet(h_true=h, h_csit=h, n_rx=1)
    basis = null_space_basis(np.vstack([row, row]))
    assert basis.shape[1] == 5
    # user 2 sees two identical rows: its null space gains a dimension
    pre = build_bd_precoder(ch, 2)
    assert np.linalg.norm(row @ pre.f_blocks[2]) <= 1e-12


def test_effective_rx_zero_symbol():
    ch = draw_channel(np.random.default_rng(5), 3, 2, 12)
    pre = build_bd_precoder(ch, 4)
    assert not np.any(effective_rx(ch.h_true, pre, np.zeros((3, 4)), 2))


def test_two_path_equivalence_perfect_csit():
    rng = np.random.default_rng(6)
    params = IMParams(4, 2, 16)
    for _ in range(50):
        ch = draw_channel(rng, 3, 2, 15)
        pre = build_bd_precoder(ch, 4)
        s = _symbols(rng, 3, params)
        via_model = effective_rx(ch.h_true, pre, s, 2)
        via_prop = (ch.h_true @ tx_direct(pre, s).x).reshape(3, 2)
        assert np.linalg.norm(via_model - via_prop) <= 1e-10 * np.linalg.norm(via_prop)


def test_imperfect_csit_leaves_mui():
    rng = np.random.default_rng(7)
    params = IMParams(4, 2, 4)
    diffs = []
    for _ in range(50):
        ch = draw_channel(rng, 3, 2, 15, 0.1)
        pre = build_bd_precoder(ch, 4)
        s = _symbols(rng, 3, params)
        a = effective_rx(ch.h_true, pre, s, 2)
        b = (ch.h_true @ tx_direct(pre, s).x).reshape(3, 2)
        diffs.append(np.linalg.norm(a - b))
    assert min(diffs) > 1e-6


def test_degenerate_bd_baseline():
    # n_a = n_s: one AIC, every stream carries a symbol, plain BD spatial multiplexing
    rng = np.random.default_rng(8)
    params = IMParams(2, 2, 4)
    assert len(build_aic_table(params)) == 1
    ch = draw_channel(rng, 4, 2, 8)
    pre = build_bd_precoder(ch, 2)
    s = _symbols(rng, 4, params)
    assert np.all(s != 0)
    hf = ch.h_true @ pre.matrix
    off = hf.copy()
    for k in range(4):
        off[2 * k:2 * k + 2, 2 * k:2 * k + 2] = 0
    assert np.linalg.norm(off) <= 1e-10
