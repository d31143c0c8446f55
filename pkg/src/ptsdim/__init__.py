"""Link-level simulation of precoding-aided transmitter-side index modulation
for downlink multiuser MIMO."""

__version__ = "0.1.0"

from .channel import ChannelSet, ConfigError, draw_channel, draw_noise, sigma2_for_snr
from .detect import DetectorInput, count_errors, detect_ml, detect_obmmse
from .gsm_map import (AicTable, GsmSymbol, IMParams, bits_per_symbol, build_aic_table, decode,
                      densify, encode)
from .precode import PrecoderSet, build_bd_precoder, effective_rx
from .simkit import (BerRecord, Calibration, SimConfig, flops_aar, flops_min_power, run_point,
                     run_sweep, simulate)
from .txgen import (AarSettings, TxSignal, project_ball, residual, soft_threshold, tx_aar,
                    tx_direct, tx_min_power)
