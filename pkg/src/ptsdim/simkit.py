"""Monte-Carlo BER engine and analytical FLOP counters.

Every SNR point is simulated in fixed-size shards.  Shard ``i`` of the
point at ``snr_db`` draws from the stream ``(seed, snr_key(snr_db), i)``,
so results do not depend on grid order or on the number of workers:
shards are merged in index order and the run stops at the first shard
after which a stopping rule holds.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .channel import ConfigError, draw_channel, sigma2_for_snr
from .detect import ml_batch, obmmse_batch
from .gsm_map import IMParams, bits_per_symbol, build_aic_table, join_bits, split_bits
from .precode import build_bd_precoder, check_bd_dimensions
from .txgen import MODES, AarSettings, tx_aar, tx_direct, tx_min_power

__all__ = [
    "SimConfig",
    "Calibration",
    "BerRecord",
    "SweepResult",
    "calibrate",
    "run_point",
    "run_sweep",
    "simulate",
    "flops_min_power",
    "flops_aar",
]

DETECTORS = ("obmmse", "obmmse_linear", "ml")
_CALIB_KEY = 0
_POINT_KEY = 1


@dataclass(frozen=True)
class SimConfig:
    n_u: int
    n_tx: int
    n_rx: int
    n_s: int
    n_a: int
    order: int = 4
    family: str = "qam"
    variant: str = "full"
    tx_mode: str = "direct"
    aar: Optional[AarSettings] = None
    sigma_err: float = 0.0
    snr_grid_db: Tuple[float, ...] = ()
    min_bit_errors: int = 200
    max_symbols: int = 100_000
    seed: int = 0
    channel_reuse: int = 1
    detector: str = "obmmse"
    vth_scale: float = 1.0
    snr_reference: str = "transmit"
    noiseless: bool = False
    shard_symbols: int = 50
    calibration_samples: int = 10_000

    def __post_init__(self) -> None:
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))

    @property
    def im_params(self) -> IMParams:
        return IMParams(self.n_s, self.n_a, self.order, self.family, self.variant == "reduced")

    @property
    def bits_per_symbol(self) -> int:
        return bits_per_symbol(self.im_params, self.n_u)[0]

    def validate(self) -> "SimConfig":
        for name in ("n_u", "n_tx", "n_rx", "n_s", "n_a"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} >= 1 violated: {getattr(self, name)}")
        try:
            self.im_params
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        check_bd_dimensions(self.n_u, self.n_rx, self.n_tx, self.n_s)
        if self.tx_mode not in MODES:
            raise ConfigError(f"tx_mode must be one of {MODES}, got {self.tx_mode!r}")
        if self.variant not in ("full", "reduced"):
            raise ConfigError(f"variant must be 'full' or 'reduced', got {self.variant!r}")
        if self.tx_mode in ("min_power", "aar") and self.n_tx < self.n_u * self.n_rx:
            raise ConfigError(
                f"n_tx >= n_u*n_rx violated for {self.tx_mode}: {self.n_tx} < {self.n_u * self.n_rx}")
        if self.tx_mode == "aar":
            if self.aar is None:
                raise ConfigError("tx_mode=aar requires AAR settings")
            if self.aar.n_on > self.n_tx:
                raise ConfigError(f"n_on <= n_tx violated: {self.aar.n_on} > {self.n_tx}")
        if not 0.0 <= self.sigma_err < 1.0:
            raise ConfigError(f"0 <= sigma_err < 1 violated: {self.sigma_err}")
        if self.detector not in DETECTORS:
            raise ConfigError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        if self.snr_reference not in ("transmit", "receive"):
            raise ConfigError(f"snr_reference must be 'transmit' or 'receive', got {self.snr_reference!r}")
        if self.channel_reuse < 1 or self.shard_symbols < 1:
            raise ConfigError("channel_reuse >= 1 and shard_symbols >= 1 required")
        if self.min_bit_errors < 1 or self.max_symbols < 1:
            raise ConfigError("min_bit_errors >= 1 and max_symbols >= 1 required")
        return self

    def to_dict(self) -> Dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> "SimConfig":
        data = dict(data)
        if data.get("aar") is not None:
            data["aar"] = AarSettings(**data["aar"])
        return cls(**data)


@dataclass(frozen=True)
class Calibration:
    """SNR reference constants shared by every point of a sweep.

    ``rx_energy`` is the mean received signal energy per user under direct
    BD precoding; ``power_ratio`` is the mode's mean transmit power over
    the direct one.  With ``snr_reference='transmit'`` the noise level is
    referred to the mode's transmit power, so lower-power modes see less
    noise at the same nominal SNR.
    """

    rx_energy: float
    power_ratio: float
    snr_reference: str

    @property
    def constant(self) -> float:
        if self.snr_reference == "transmit":
            return self.rx_energy * self.power_ratio
        return self.rx_energy

    def sigma2(self, snr_db: float, n_rx: int) -> float:
        return sigma2_for_snr(snr_db, n_rx, self.constant)


@dataclass
class BerRecord:
    snr_db: float
    bits_sent: int = 0
    bit_errors: int = 0
    symbols_sent: int = 0
    aic_errors: int = 0
    tx_power_sum: float = 0.0
    residual_sum: float = 0.0
    active_sum: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_sent if self.bits_sent else 0.0

    @property
    def mean_tx_power(self) -> float:
        return self.tx_power_sum / self.symbols_sent if self.symbols_sent else 0.0

    @property
    def mean_residual(self) -> float:
        return self.residual_sum / self.symbols_sent if self.symbols_sent else 0.0

    @property
    def mean_active_antennas(self) -> float:
        return self.active_sum / self.symbols_sent if self.symbols_sent else 0.0

    def merge(self, other: "BerRecord") -> None:
        self.bits_sent += other.bits_sent
        self.bit_errors += other.bit_errors
        self.symbols_sent += other.symbols_sent
        self.aic_errors += other.aic_errors
        self.tx_power_sum += other.tx_power_sum
        self.residual_sum += other.residual_sum
        self.active_sum += other.active_sum

    def to_dict(self) -> Dict:
        d = dataclasses.asdict(self)
        d.update(ber=self.ber, mean_tx_power=self.mean_tx_power,
                 mean_residual=self.mean_residual,
                 mean_active_antennas=self.mean_active_antennas)
        return d

    @classmethod
    def from_dict(cls, data: Dict) -> "BerRecord":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


@dataclass
class SweepResult:
    config: SimConfig
    calibration: Calibration
    records: List[BerRecord] = field(default_factory=list)


def snr_key(snr_db: float) -> int:
    return int(round(snr_db * 1000)) & 0xFFFFFFFF


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _draw_symbols(rng, config: SimConfig, params: IMParams, table, const):
    bits = rng.integers(0, 2, size=(config.n_u, params.bits_per_user), dtype=np.uint8)
    aic_idx, labels = split_bits(bits, params)
    values = const.points[labels]
    if params.reduced:
        values = np.repeat(values, params.n_a, axis=-1)
    s = np.zeros((config.n_u, config.n_s), dtype=complex)
    np.put_along_axis(s, table.combos[aic_idx], values, axis=1)
    return bits, aic_idx, s


def _transmit(config: SimConfig, channel, precoder, s):
    direct = tx_direct(precoder, s)
    if config.tx_mode == "direct":
        return direct, direct
    r = channel.h_csit @ direct.x
    if config.tx_mode == "min_power":
        return tx_min_power(channel.h_csit, r), direct
    return tx_aar(channel.h_csit, r, config.aar, direct.power), direct


def calibrate(config: SimConfig) -> Calibration:
    """Estimate the SNR reference constants from dedicated random draws.

    Uses at least ``calibration_samples`` (channel, symbol, user) samples,
    ten symbols per channel.
    """
    config.validate()
    params = config.im_params
    table = build_aic_table(params)
    const = params.constellation
    rng = _rng(config.seed, _CALIB_KEY)
    per_channel = 10
    n_channels = max(1, math.ceil(config.calibration_samples / (per_channel * config.n_u)))
    rx_energy = 0.0
    p_direct = 0.0
    p_mode = 0.0
    for _ in range(n_channels):
        channel = draw_channel(rng, config.n_u, config.n_rx, config.n_tx, config.sigma_err)
        precoder = build_bd_precoder(channel, config.n_s)
        heff = channel.blocks() @ precoder.f_blocks
        for _ in range(per_channel):
            _, _, s = _draw_symbols(rng, config, params, table, const)
            rx = np.einsum("kij,kj->ki", heff, s)
            rx_energy += float(np.sum(np.abs(rx) ** 2))
            tx, direct = _transmit(config, channel, precoder, s)
            p_direct += direct.power
            p_mode += tx.power
    rx_energy /= n_channels * per_channel * config.n_u
    ratio = 1.0 if config.tx_mode == "direct" else p_mode / p_direct
    return Calibration(rx_energy=rx_energy, power_ratio=ratio, snr_reference=config.snr_reference)


def _run_shard(config: SimConfig, snr_db: float, sigma2: float, shard: int, n_symbols: int) -> BerRecord:
    params = config.im_params
    table = build_aic_table(params)
    const = params.constellation
    rng = _rng(config.seed, _POINT_KEY, snr_key(snr_db), shard)
    rec = BerRecord(snr_db=snr_db)
    channel = precoder = heff = None
    for j in range(n_symbols):
        if j % config.channel_reuse == 0:
            channel = draw_channel(rng, config.n_u, config.n_rx, config.n_tx, config.sigma_err)
            precoder = build_bd_precoder(channel, config.n_s)
            # receivers know H_k F_k for the true channel
            heff = channel.blocks() @ precoder.f_blocks
        bits, aic_idx, s = _draw_symbols(rng, config, params, table, const)
        noise = rng.standard_normal((config.n_u, config.n_rx, 2))
        tx, _ = _transmit(config, channel, precoder, s)
        y = (channel.h_true @ tx.x).reshape(config.n_u, config.n_rx)
        if not config.noiseless:
            y = y + np.sqrt(sigma2) * (noise[..., 0] + 1j * noise[..., 1])
        if config.detector == "ml":
            aic_hat, lab_hat = ml_batch(y, heff, params, table)
        else:
            method = "linear" if config.detector == "obmmse_linear" else "sic"
            aic_hat, lab_hat = obmmse_batch(y, heff, sigma2, params, table, config.vth_scale, method)
        bits_hat = join_bits(aic_hat, lab_hat, params)
        rec.bits_sent += bits.size
        rec.bit_errors += int(np.count_nonzero(bits != bits_hat))
        rec.symbols_sent += 1
        rec.aic_errors += int(np.count_nonzero(aic_hat != aic_idx))
        rec.tx_power_sum += tx.power
        rec.residual_sum += tx.residual_norm
        rec.active_sum += int(np.count_nonzero(tx.x))
    return rec


def _shard_task(args):
    return _run_shard(*args)


def run_point(config: SimConfig, snr_db: float, calibration: Optional[Calibration] = None,
              workers: int = 1) -> BerRecord:
    """Simulate one SNR point until ``min_bit_errors`` or ``max_symbols``."""
    config.validate()
    if calibration is None:
        calibration = calibrate(config)
    sigma2 = 0.0 if config.noiseless else calibration.sigma2(snr_db, config.n_rx)
    total = BerRecord(snr_db=float(snr_db))
    n_shards = math.ceil(config.max_symbols / config.shard_symbols)

    def sizes(i):
        return min(config.shard_symbols, config.max_symbols - i * config.shard_symbols)

    def done():
        return total.bit_errors >= config.min_bit_errors or total.symbols_sent >= config.max_symbols

    if workers <= 1:
        for i in range(n_shards):
            total.merge(_run_shard(config, float(snr_db), sigma2, i, sizes(i)))
            if done():
                break
        return total
    with ProcessPoolExecutor(max_workers=workers) as pool:
        i = 0
        while i < n_shards and not done():
            batch = range(i, min(i + workers, n_shards))
            tasks = [(config, float(snr_db), sigma2, k, sizes(k)) for k in batch]
            for rec in pool.map(_shard_task, tasks):
                total.merge(rec)
                if done():
                    break
            i = batch.stop
    return total


def simulate(config: SimConfig, workers: int = 1,
             calibration: Optional[Calibration] = None) -> SweepResult:
    config.validate()
    if calibration is None:
        calibration = calibrate(config)
    records = [run_point(config, snr, calibration, workers) for snr in sorted(config.snr_grid_db)]
    return SweepResult(config=config, calibration=calibration, records=records)


def run_sweep(config: SimConfig, workers: int = 1) -> List[BerRecord]:
    """Records for every grid value, ordered by SNR."""
    if not config.snr_grid_db:
        return []
    return simulate(config, workers).records


def flops_min_power(n_u: int, n_rx: int, n_tx: int) -> float:
    """Complex FLOPs of the least-norm transmit design."""
    m = n_u * n_rx
    return m ** 3 + m ** 2 * (n_tx + 1.5) + m * (3 * n_tx - 1.5) - n_tx


def flops_aar(n_u: int, n_rx: int, n_tx: int, n_on: int, q: int) -> float:
    """Complex FLOPs of AAR with ``q`` iterations per phase."""
    m = n_u * n_rx
    return (n_tx ** 2 * (m - 0.5) + n_tx * (4 * m - 1.5)
            + q * (2 * n_tx ** 2 + 10 * n_tx + 2 * n_on ** 2 + 6 * n_on - 2))


def ber_crossing(snr_db: Sequence[float], ber: Sequence[float], target: float) -> float:
    """SNR where a BER curve crosses ``target`` (log-linear interpolation).

    Returns ``nan`` when the curve never crosses the target.
    """
    snr = np.asarray(snr_db, dtype=float)
    b = np.asarray(ber, dtype=float)
    order = np.argsort(snr)
    snr, b = snr[order], b[order]
    for i in range(len(snr) - 1):
        if b[i] >= target > b[i + 1] and b[i + 1] > 0:
            lo, hi = np.log10(b[i]), np.log10(b[i + 1])
            t = (np.log10(target) - lo) / (hi - lo)
            return float(snr[i] + t * (snr[i + 1] - snr[i]))
        if b[i] >= target and b[i + 1] == 0:
            return float(snr[i + 1])
    return float("nan")
