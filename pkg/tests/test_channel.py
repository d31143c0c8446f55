import numpy as np
import pytest

from ptsdim.channel import ConfigError, draw_channel, draw_noise, sigma2_for_snr


def test_perfect_csit_is_identical():
    ch = draw_channel(np.random.default_rng(0), 3, 2, 8)
    assert ch.h_csit is ch.h_true or np.array_equal(ch.h_csit, ch.h_true)
    assert ch.h_true.shape == (6, 8)
    assert ch.n_u == 3 and ch.n_tx == 8


def test_user_rows():
    ch = draw_channel(np.random.default_rng(1), 3, 2, 8)
    assert np.array_equal(ch.user_rows(1), ch.h_true[2:4])
    assert np.array_equal(ch.blocks()[2], ch.h_true[4:6])


@pytest.mark.parametrize("sigma_err", [0.0, 0.1, 0.5])
def test_unit_entry_variance(sigma_err):
    rng = np.random.default_rng(2)
    draws = np.stack([draw_channel(rng, 2, 1, 2, sigma_err).h_true for _ in range(100_000)])
    var = np.mean(np.abs(draws) ** 2, axis=0)
    assert np.all(np.abs(var - 1.0) <= 0.02)
    if sigma_err:
        err = np.stack([(lambda c: c.h_true - c.h_csit)(draw_channel(rng, 2, 1, 2, sigma_err))
                        for _ in range(20_000)])
        assert abs(np.mean(np.abs(err) ** 2) - sigma_err ** 2) <= 0.05 * sigma_err ** 2


def test_invalid_sigma_err():
    with pytest.raises(ConfigError):
        draw_channel(np.random.default_rng(0), 2, 1, 4, 1.0)


def test_seed_determinism():
    a = draw_channel(np.random.default_rng(42), 4, 2, 10, 0.1)
    b = draw_channel(np.random.default_rng(42), 4, 2, 10, 0.1)
    assert np.array_equal(a.h_true, b.h_true) and np.array_equal(a.h_csit, b.h_csit)


def test_noise_energy_and_whiteness():
    sigma2 = 0.37
    n = draw_noise(np.random.default_rng(3), (1_000_000, 3), sigma2)
    assert abs(np.mean(np.abs(n[:, 0]) ** 2) / (2 * sigma2) - 1) <= 0.01
    cov = n.T @ n.conj() / n.shape[0]
    assert np.allclose(cov, 2 * sigma2 * np.eye(3), atol=0.02 * 2 * sigma2)
    assert abs(np.var(n.real) - sigma2) <= 0.01 * sigma2


def test_noise_split_streams_uncorrelated():
    seq = np.random.SeedSequence(7)
    a, b = (np.random.default_rng(s) for s in seq.spawn(2))
    x = draw_noise(a, 200_000, 1.0)
    y = draw_noise(b, 200_000, 1.0)
    assert abs(np.vdot(x, y)) / np.sqrt(np.vdot(x, x).real * np.vdot(y, y).real) < 0.01


def test_noiseless_flag():
    assert not np.any(draw_noise(np.random.default_rng(0), 4, 0.0, noiseless=True))
    with pytest.raises(ValueError):
        draw_noise(np.random.default_rng(0), 4, 0.0)


def test_sigma2_for_snr():
    cal, n_rx = 8.0, 4
    assert np.isclose(2 * sigma2_for_snr(0.0, n_rx, cal) * n_rx, cal)
    assert np.isclose(sigma2_for_snr(13.0, n_rx, cal), sigma2_for_snr(3.0, n_rx, cal) / 10)
    with pytest.raises(ValueError):
        sigma2_for_snr(0.0, n_rx, 0.0)
