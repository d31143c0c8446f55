import dataclasses

import numpy as np
import pytest
from scipy.stats import spearmanr

from ptsdim.channel import ConfigError
from ptsdim.simkit import (BerRecord, SimConfig, ber_crossing, calibrate, flops_aar,
                           flops_min_power, run_point, run_sweep, simulate)
from ptsdim.txgen import AarSettings

SMALL = SimConfig(n_u=3, n_tx=15, n_rx=2, n_s=4, n_a=2, order=4, min_bit_errors=100,
                  max_symbols=300, seed=5, shard_symbols=25, calibration_samples=600)


def _cfg(**kw):
    return dataclasses.replace(SMALL, **kw)


def test_noiseless_direct_error_free():
    rec = run_point(_cfg(noiseless=True, max_symbols=100), 10.0)
    assert rec.bit_errors == 0 and rec.symbols_sent == 100 and rec.ber == 0.0


def test_noiseless_ml_error_free():
    rec = run_point(_cfg(noiseless=True, detector="ml", max_symbols=50), 10.0)
    assert rec.bit_errors == 0


def test_noiseless_linear_obmmse_error_free():
    rec = run_point(_cfg(noiseless=True, detector="obmmse_linear", max_symbols=50), 10.0)
    assert rec.bit_errors == 0


def test_deterministic():
    a = run_point(SMALL, 6.0)
    b = run_point(SMALL, 6.0)
    assert a == b


def test_transparency_receive_reference():
    base = _cfg(snr_reference="receive")
    for snr in (0.0, 4.0, 8.0):
        d = run_point(dataclasses.replace(base, tx_mode="direct"), snr)
        m = run_point(dataclasses.replace(base, tx_mode="min_power"), snr)
        assert d.bit_errors == m.bit_errors and d.symbols_sent == m.symbols_sent
        assert m.mean_tx_power < d.mean_tx_power


def test_transmit_reference_favours_min_power():
    cal_d = calibrate(_cfg(tx_mode="direct"))
    cal_m = calibrate(_cfg(tx_mode="min_power"))
    assert cal_d.power_ratio == 1.0
    assert 0 < cal_m.power_ratio < 1
    assert cal_m.sigma2(5.0, 2) < cal_d.sigma2(5.0, 2)


def test_calibration_rx_energy():
    # H_k F_k has i.i.d. CN(0,1) entries, so E||H_k F_k s_k||^2 = n_rx * n_a
    cal = calibrate(_cfg(calibration_samples=20_000))
    assert abs(cal.rx_energy / 4.0 - 1) < 0.03


def test_conservation_and_stopping():
    rec = run_point(SMALL, 0.0)
    assert rec.bits_sent == rec.symbols_sent * SMALL.bits_per_symbol
    assert rec.bit_errors >= SMALL.min_bit_errors or rec.symbols_sent == SMALL.max_symbols
    assert rec.symbols_sent % SMALL.shard_symbols == 0 or rec.symbols_sent == SMALL.max_symbols
    capped = run_point(_cfg(max_symbols=30, min_bit_errors=10 ** 9), 20.0)
    assert capped.symbols_sent == 30


def test_aar_record_fields():
    cfg = _cfg(tx_mode="aar", aar=AarSettings(n_on=8), max_symbols=50)
    rec = run_point(cfg, 10.0)
    assert 0 < rec.mean_active_antennas <= 8
    assert rec.mean_residual > 0


def test_empty_sweep():
    assert run_sweep(_cfg(snr_grid_db=())) == []


def test_grid_order_independent():
    a = run_sweep(_cfg(snr_grid_db=(2.0, 6.0)))
    b = run_sweep(_cfg(snr_grid_db=(6.0, 1.0, 2.0)))
    assert [r.snr_db for r in b] == [1.0, 2.0, 6.0]
    assert a[0] == b[1] and a[1] == b[2]


def test_ber_trend():
    recs = run_sweep(_cfg(snr_grid_db=(0, 3, 6, 9, 12, 15), max_symbols=600))
    rho, _ = spearmanr([r.snr_db for r in recs], [r.ber for r in recs])
    assert rho < 0


def test_worker_count_invariance():
    cfg = _cfg(max_symbols=200)
    assert run_point(cfg, 4.0, workers=1) == run_point(cfg, 4.0, workers=2)


def test_channel_reuse():
    rec = run_point(_cfg(channel_reuse=5, max_symbols=50), 6.0)
    assert rec.symbols_sent > 0


@pytest.mark.parametrize("kw,needle", [
    (dict(n_s=6), "n_s <= n_tx/n_u"),
    (dict(tx_mode="min_power", n_tx=12, n_rx=5, n_s=2), "null-space|n_tx >= n_u"),
    (dict(tx_mode="aar"), "requires AAR"),
    (dict(tx_mode="aar", aar=AarSettings(n_on=16)), "n_on <= n_tx"),
    (dict(sigma_err=1.0), "sigma_err"),
    (dict(tx_mode="bogus"), "tx_mode"),
    (dict(detector="zf"), "detector"),
])
def test_invalid_configs(kw, needle):
    with pytest.raises(ConfigError, match=needle):
        run_point(_cfg(**kw), 0.0)


def test_config_dict_round_trip():
    cfg = _cfg(tx_mode="aar", aar=AarSettings(n_on=8, alpha=0.05), snr_grid_db=(1.5, 3))
    assert SimConfig.from_dict(cfg.to_dict()) == cfg


def test_record_round_trip():
    rec = run_point(SMALL, 3.0)
    assert BerRecord.from_dict(rec.to_dict()) == rec


def test_simulate_shares_calibration():
    res = simulate(_cfg(snr_grid_db=(0.0, 5.0)))
    assert res.calibration == calibrate(SMALL)
    assert len(res.records) == 2


# -- FLOP counters ------------------------------------------------------------

def test_flops_reference_points():
    assert flops_min_power(15, 4, 105) == 618105
    assert flops_aar(15, 4, 105, 80, 100) == 4318830
    assert flops_aar(15, 4, 105, 80, 100) > flops_min_power(15, 4, 105)


def test_flops_unit_dims():
    assert flops_min_power(1, 1, 1) == 4


def test_flops_aar_affine_in_q():
    base = flops_aar(15, 4, 105, 80, 0)
    assert base == 105 ** 2 * 59.5 + 105 * (4 * 60 - 1.5)
    per_iter = 2 * 105 ** 2 + 10 * 105 + 2 * 80 ** 2 + 6 * 80 - 2
    assert flops_aar(15, 4, 105, 80, 37) - flops_aar(15, 4, 105, 80, 12) == 25 * per_iter


def test_flops_min_power_monotone():
    dims = range(1, 9)
    for u in dims:
        for rx in dims:
            for tx in dims:
                f = flops_min_power(u, rx, tx)
                assert flops_min_power(u + 1, rx, tx) >= f
                assert flops_min_power(u, rx + 1, tx) >= f
                assert flops_min_power(u, rx, tx + 1) >= f


def test_ber_crossing():
    assert np.isclose(ber_crossing([0, 10], [1e-2, 1e-4], 1e-3), 5.0)
    assert np.isnan(ber_crossing([0, 10], [1e-1, 1e-2], 1e-3))
