"""
Packet metrics: BER, sliding-window MSE, EVM, data rate, constellation and
spectrogram exports.
"""

import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import signal

from errors import LengthMismatchError
from modem_defaults import MSE_FLOOR_DB, MSE_WINDOW
from receiver import EqualizerMode
from signal_model import demap_symbols
from waveform_io import atomic_write_csv, atomic_write_json

logger = logging.getLogger(__name__)


@dataclass
class PacketReport:
    """
    Figures of merit for one decoded packet.

    ber_upper_bound is set only when no bit errors were seen; the BER then
    renders as "< 1/bits_compared".
    """

    bit_errors: int
    bits_compared: int
    ber_point: float
    ber_upper_bound: float
    mse_trace: pd.DataFrame = field(repr=False)
    evm_percent: float
    data_rate_bps: float
    config_digest: str
    final_mse_db: float = None
    sync: dict = None

    @property
    def ber_text(self):
        return format_ber(self.bit_errors, self.bits_compared)

    def to_dict(self):
        return {
            "bit_errors": self.bit_errors,
            "bits_compared": self.bits_compared,
            "ber_point": self.ber_point,
            "ber_upper_bound": self.ber_upper_bound,
            "ber": self.ber_text,
            "evm_percent": self.evm_percent,
            "final_mse_db": self.final_mse_db,
            "data_rate_bps": self.data_rate_bps,
            "config_digest": self.config_digest,
            "mse_window_symbols": MSE_WINDOW,
            "sync": self.sync,
        }


def _scientific(x):
    return np.format_float_scientific(x, precision=2, trim="-", exp_digits=1).upper()


def format_ber(errors, bits):
    """BER as printed in result tables: '< 1E-4' when error free, else the point estimate."""
    if bits == 0:
        return "n/a"
    if errors == 0:
        return f"< {_scientific(1 / bits)}"
    return _scientific(errors / bits)


def compute_ber(tx_bits, rx_bits):
    """
    Bit errors between two equal-length bit sequences.

    Returns:
        tuple: (errors, ber_point, ber_upper_bound); the upper bound is
        1/bits when there are no errors and None otherwise

    Raises:
        LengthMismatchError: If the sequences differ in length
    """
    tx_bits = np.asarray(tx_bits, dtype=np.uint8)
    rx_bits = np.asarray(rx_bits, dtype=np.uint8)
    if len(tx_bits) != len(rx_bits):
        raise LengthMismatchError(f"cannot compare {len(tx_bits)} transmitted bits with {len(rx_bits)} received")
    n = len(tx_bits)
    errors = int(np.count_nonzero(tx_bits != rx_bits))
    if n == 0:
        return 0, 0.0, None
    upper = 1.0 / n if errors == 0 else None
    return errors, errors / n, upper


def compute_mse_trace(records, window=MSE_WINDOW, floor_db=MSE_FLOOR_DB):
    """
    Trailing-window MSE in dB per symbol.

    Returns:
        pd.DataFrame: columns symbol_index, mse_db
    """
    if not records:
        return pd.DataFrame({"symbol_index": pd.Series(dtype=int), "mse_db": pd.Series(dtype=float)})
    err2 = pd.Series([abs(r.e) ** 2 for r in records])
    mse = err2.rolling(window, min_periods=1).mean().to_numpy()
    floor = 10 ** (floor_db / 10)
    mse_db = 10 * np.log10(np.maximum(mse, floor))
    return pd.DataFrame({"symbol_index": [r.k for r in records], "mse_db": mse_db})


def mse_window_db(records, start, stop):
    """Mean |e|^2 in dB over records with start <= k < stop."""
    err2 = [abs(r.e) ** 2 for r in records if start <= r.k < stop]
    if not err2:
        return None
    return float(10 * np.log10(max(np.mean(err2), 10 ** (MSE_FLOOR_DB / 10))))


def _payload_records(records):
    return [r for r in records if r.mode is EqualizerMode.DECISION_DIRECTED]


def compute_evm(records, constellation):
    """RMS decision-directed error over RMS constellation magnitude, in percent."""
    payload = _payload_records(records)
    if not payload:
        return None
    rms_error = np.sqrt(np.mean([abs(r.e) ** 2 for r in payload]))
    return float(100 * rms_error / constellation.rms)


def data_rate(cfg):
    """Raw channel rate k * fb before FEC."""
    return cfg.bits_per_symbol * cfg.fb


def constellation_frame(records):
    """Post-training equalizer outputs as a table (re, im, symbol_index, mode)."""
    payload = _payload_records(records)
    return pd.DataFrame(
        {
            "re": pd.Series([r.y.real for r in payload], dtype=float),
            "im": pd.Series([r.y.imag for r in payload], dtype=float),
            "symbol_index": pd.Series([r.k for r in payload], dtype=int),
            "mode": pd.Series([r.mode.value for r in payload], dtype=object),
        }
    )


def export_constellation(records, path):
    """Write constellation.csv; an empty payload gives a header-only file."""
    return atomic_write_csv(constellation_frame(records), path)


def export_mse_trace(trace, path, window=MSE_WINDOW):
    return atomic_write_csv(trace, path, header_comment=f"window_symbols={window}")


def build_packet_report(cfg, frame, reception, digest):
    """Compare payload decisions with the transmitted payload bits."""
    rx_bits = demap_symbols(reception.decisions, cfg.constellation)
    errors, point, upper = compute_ber(frame.payload_bits, rx_bits)
    trace = compute_mse_trace(reception.records)
    evm = compute_evm(reception.records, cfg.constellation)
    sync = reception.sync
    report = PacketReport(
        bit_errors=errors,
        bits_compared=len(frame.payload_bits),
        ber_point=point,
        ber_upper_bound=upper,
        mse_trace=trace,
        evm_percent=evm,
        data_rate_bps=data_rate(cfg),
        config_digest=digest,
        final_mse_db=float(trace["mse_db"].iloc[-1]) if len(trace) else None,
        sync={
            "start_sample": sync.start_sample,
            "doppler_factor": sync.doppler_factor,
            "peak_metric": sync.peak_metric,
            "doppler_flagged": sync.doppler_flagged,
        },
    )
    logger.info("packet report: BER %s, EVM %s%%", report.ber_text, evm)
    return report


def write_packet_report(report, records, out_dir):
    """
    Write report.json, mse_trace.csv and constellation.csv into out_dir.

    Returns:
        dict: Written file paths by name
    """
    paths = {
        "report": atomic_write_json(os.path.join(out_dir, "report.json"), report.to_dict()),
        "mse_trace": export_mse_trace(report.mse_trace, os.path.join(out_dir, "mse_trace.csv")),
        "constellation": export_constellation(records, os.path.join(out_dir, "constellation.csv")),
    }
    return paths


def compute_spectrogram(wave, nperseg=256):
    """
    Spectrogram as a long table (time_s, freq_hz, power_db) for plotting elsewhere.
    """
    x = np.asarray(wave.samples)
    nperseg = min(nperseg, len(x))
    freqs, times, sxx = signal.spectrogram(x, fs=wave.fs, nperseg=nperseg, return_onesided=not np.iscomplexobj(x))
    power_db = 10 * np.log10(np.maximum(sxx, 1e-30))
    grid_t, grid_f = np.meshgrid(times, freqs)
    return pd.DataFrame({"time_s": grid_t.ravel(), "freq_hz": grid_f.ravel(), "power_db": power_db.ravel()})


def out_of_band_ratio_db(wave, f_lo, f_hi):
    """Power outside [f_lo, f_hi] relative to power inside, in dB (periodogram)."""
    freqs, pxx = signal.periodogram(np.asarray(wave.samples), fs=wave.fs)
    inside = (np.abs(freqs) >= f_lo) & (np.abs(freqs) <= f_hi)
    p_in = float(np.sum(pxx[inside]))
    p_out = float(np.sum(pxx[~inside]))
    if p_out == 0:
        return -np.inf
    return 10 * np.log10(p_out / p_in)
