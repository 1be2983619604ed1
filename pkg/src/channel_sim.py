#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Channel Simulator

Parametric stand-in for the water and tissue propagation paths. A channel
is applied in this order:
1. Transducer bandpass (Gaussian magnitude, linear-phase FIR)
2. Power-law attenuation 10^(-alpha * path_cm * (f / 1 MHz)^b / 20)
3. Multipath tap sum
4. Doppler time dilation
5. White Gaussian noise scaled to an in-band SNR

Presets live in data/presets/<name>.json:

    {
        "name": "pork_loin",
        "description": "...",
        "non_authoritative": true,
        "taps": [[0.0, [1.0, 0.0]], [3.5e-7, [0.09, 0.08]]],   # delay_s, [re, im]
        "atten_db_per_cm_mhz": 0.6,
        "atten_exponent": 1.0,
        "path_cm": 3.0,
        "doppler_factor": 1.0,
        "snr_db": 30.0,                                       # null for noiseless
        "transducer": {"center_hz": 5e6, "bw10_hz": 5e6},     # null for all-pass
        "seed": 0
    }
"""

import dataclasses
import glob
import json
import logging
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import signal

from errors import ChannelConfigError, UnknownPresetError
from modem_defaults import CHANNEL_FIR_TAPS
from signal_model import Waveform, WaveformKind
from sync import resample_by_factor

logger = logging.getLogger(__name__)

PRESET_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data", "presets")

# samples whose envelope exceeds this fraction of the peak count as signal
ACTIVE_FRACTION = 0.01

# frequency grid density for the FIR magnitude fits
FIR_GRID_POINTS = 1025


@dataclass(frozen=True)
class ChannelModel:
    """
    Propagation path between the two transducers.

    taps holds (delay_s, complex gain) arrivals. snr_db = inf disables noise.
    transducer is (center_hz, bw10_hz) or None for an all-pass response.
    """

    taps: tuple = ((0.0, 1.0 + 0.0j),)
    atten_db_per_cm_mhz: float = 0.0
    atten_exponent: float = 1.0
    path_cm: float = 0.0
    doppler_factor: float = 1.0
    snr_db: float = math.inf
    transducer: tuple = None
    seed: int = 0
    name: str = "custom"
    description: str = ""
    non_authoritative: bool = False

    def __post_init__(self):
        if len(self.taps) == 0:
            raise ChannelConfigError("channel needs at least one multipath tap")
        delays = [delay for delay, _ in self.taps]
        if min(delays) < 0:
            raise ChannelConfigError(f"tap delays must be >= 0, got {min(delays):g}")
        if not 0.95 < self.doppler_factor < 1.05:
            raise ChannelConfigError(f"doppler_factor must lie in (0.95, 1.05), got {self.doppler_factor}")
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ChannelConfigError(f"snr_db must be finite or +inf, got {self.snr_db}")
        if self.atten_db_per_cm_mhz < 0 or self.path_cm < 0:
            raise ChannelConfigError("attenuation coefficient and path length must be >= 0")
        if self.transducer is not None:
            center, bw10 = self.transducer
            if center <= 0 or bw10 <= 0:
                raise ChannelConfigError(f"transducer center and bandwidth must be > 0, got {self.transducer}")

    @property
    def has_attenuation(self):
        return self.atten_db_per_cm_mhz > 0 and self.path_cm > 0

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return {
            "name": self.name,
            "description": self.description,
            "non_authoritative": self.non_authoritative,
            "taps": [[delay, [complex(gain).real, complex(gain).imag]] for delay, gain in self.taps],
            "atten_db_per_cm_mhz": self.atten_db_per_cm_mhz,
            "atten_exponent": self.atten_exponent,
            "path_cm": self.path_cm,
            "doppler_factor": self.doppler_factor,
            "snr_db": None if self.snr_db == math.inf else self.snr_db,
            "transducer": None
            if self.transducer is None
            else {"center_hz": self.transducer[0], "bw10_hz": self.transducer[1]},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        """Build a model from its preset-file form; raises ChannelConfigError naming bad keys."""
        allowed = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ChannelConfigError(f"{sorted(unknown)[0]}: unknown channel key")
        kwargs = dict(data)
        try:
            if "taps" in kwargs:
                kwargs["taps"] = tuple(
                    (float(delay), complex(gain[0], gain[1]) if isinstance(gain, list) else complex(gain))
                    for delay, gain in kwargs["taps"]
                )
            if kwargs.get("snr_db", 0) is None:
                kwargs["snr_db"] = math.inf
            if kwargs.get("transducer") is not None:
                t = kwargs["transducer"]
                kwargs["transducer"] = (float(t["center_hz"]), float(t["bw10_hz"]))
        except (TypeError, ValueError, KeyError, IndexError) as e:
            raise ChannelConfigError(f"malformed channel description: {e}") from None
        return cls(**kwargs)


def list_presets(preset_dir=PRESET_DIR):
    """Names of the shipped presets, sorted."""
    paths = glob.glob(os.path.join(preset_dir, "*.json"))
    return sorted(os.path.splitext(os.path.basename(p))[0] for p in paths)


def load_channel_file(path):
    """Read a channel description with the preset schema."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ChannelConfigError(f"channel file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ChannelConfigError(f"{os.path.basename(path)}: malformed JSON ({e})") from None
    return ChannelModel.from_dict(data)


def preset(name, preset_dir=PRESET_DIR):
    """
    Load a named channel preset.

    Raises:
        UnknownPresetError: If no preset file carries that name
    """
    path = os.path.join(preset_dir, f"{name}.json")
    if not os.path.isfile(path):
        known = ", ".join(list_presets(preset_dir))
        raise UnknownPresetError(f"unknown channel preset {name!r} (available: {known})")
    return load_channel_file(path)


def _fit_fir(gain_fn, fs, numtaps=CHANNEL_FIR_TAPS):
    """Least-squares linear-phase FIR fit to a magnitude law, piecewise linear between grid points."""
    edges = np.linspace(0.0, fs / 2, FIR_GRID_POINTS)
    bands = np.repeat(edges, 2)[1:-1]
    return signal.firls(numtaps, bands, gain_fn(bands), fs=fs)


def transducer_fir(center_hz, bw10_hz, fs, numtaps=CHANNEL_FIR_TAPS):
    """
    Gaussian-magnitude bandpass, unit gain at center, -10 dB at center +- bw10/2.

    |H(f)| = exp(-(f - fc)^2 / (2 sigma^2)) with sigma^2 = (bw10/2)^2 / ln 10.
    """
    sigma2 = (bw10_hz / 2) ** 2 / np.log(10.0)
    return _fit_fir(lambda f: np.exp(-((f - center_hz) ** 2) / (2 * sigma2)), fs, numtaps)


def attenuation_fir(alpha_db_per_cm_mhz, exponent, path_cm, fs, numtaps=CHANNEL_FIR_TAPS):
    """Linear-phase fit to the power-law attenuation magnitude."""
    return _fit_fir(
        lambda f: 10 ** (-alpha_db_per_cm_mhz * path_cm * (f / 1e6) ** exponent / 20),
        fs,
        numtaps,
    )


def _filter_zero_delay(x, taps):
    """Linear-phase FIR with its group delay removed; output length equals input length."""
    delay = (len(taps) - 1) // 2
    return signal.fftconvolve(x, taps)[delay : delay + len(x)]


def _multipath(x, taps, fs):
    delays = [int(round(delay * fs)) for delay, _ in taps]
    out = np.zeros(len(x) + max(delays))
    gains = [complex(gain) for _, gain in taps]
    # complex gains act on the analytic signal; real gains stay exact
    analytic = signal.hilbert(x) if any(g.imag != 0 for g in gains) else None
    for d, g in zip(delays, gains):
        if g.imag == 0:
            out[d : d + len(x)] += g.real * x
        else:
            out[d : d + len(x)] += np.real(g * analytic)
    return out


def propagate(tx, ch):
    """
    Noise-free part of the channel: transducer, attenuation, multipath, Doppler.

    Returns:
        Waveform: Real passband waveform at tx.fs
    """
    if tx.kind is not WaveformKind.PASSBAND_REAL:
        raise ChannelConfigError("channel input must be a real passband waveform")
    x = np.asarray(tx.samples, dtype=float)
    fs = tx.fs

    if ch.transducer is not None:
        center, bw10 = ch.transducer
        if center >= fs / 2:
            raise ChannelConfigError(f"transducer center {center:g} Hz above Nyquist for fs={fs:g} Hz")
        x = _filter_zero_delay(x, transducer_fir(center, bw10, fs))
    if ch.has_attenuation:
        x = _filter_zero_delay(x, attenuation_fir(ch.atten_db_per_cm_mhz, ch.atten_exponent, ch.path_cm, fs))
    if ch.taps != ((0.0, 1.0 + 0.0j),):
        x = _multipath(x, ch.taps, fs)
    if ch.doppler_factor != 1.0:
        x = resample_by_factor(x, ch.doppler_factor)

    first = tx.first_symbol_index
    if first is not None:
        first = int(round((first + min(d for d, _ in ch.taps) * fs) / ch.doppler_factor))
    return Waveform(x, fs, WaveformKind.PASSBAND_REAL, first_symbol_index=first)


def _band_fraction(fs, band):
    if band is None:
        return 1.0
    f_lo, f_hi = max(band[0], 0.0), min(band[1], fs / 2)
    if f_hi <= f_lo:
        raise ChannelConfigError(f"SNR band {band} is empty at fs={fs:g} Hz")
    return (f_hi - f_lo) / (fs / 2)


def _band_energy(x, fs, band):
    """Energy of x inside band (sum of squares, one-sided spectrum by Parseval)."""
    n = len(x)
    spectrum = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, d=1 / fs)
    weights = np.full(len(freqs), 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    if band is not None:
        weights = np.where((freqs >= band[0]) & (freqs <= band[1]), weights, 0.0)
    return float(np.sum(weights * np.abs(spectrum) ** 2) / n)


def active_samples(x):
    """Count of samples whose envelope exceeds 1% of the peak envelope."""
    envelope = np.abs(signal.hilbert(x)) if len(x) else np.zeros(0)
    if len(envelope) == 0 or envelope.max() == 0:
        return 0
    return int(np.count_nonzero(envelope > ACTIVE_FRACTION * envelope.max()))


def signal_power(x, fs, band=None):
    """In-band signal power averaged over the active (non-silent) samples."""
    n_active = active_samples(x)
    if n_active == 0:
        return 0.0
    return _band_energy(x, fs, band) / n_active


def add_noise(wave, snr_db, seed, band=None):
    """
    Add white Gaussian noise so that the in-band SNR equals snr_db.

    The noise is white over the full band; only the part inside band counts
    toward the SNR. band=None measures over the full band.
    """
    if snr_db == math.inf:
        return wave
    x = np.asarray(wave.samples, dtype=float)
    p_signal = signal_power(x, wave.fs, band)
    variance = p_signal / 10 ** (snr_db / 10) / _band_fraction(wave.fs, band)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, np.sqrt(variance), len(x))
    logger.debug("noise: in-band signal power %.3e, noise variance %.3e", p_signal, variance)
    return Waveform(x + noise, wave.fs, wave.kind, first_symbol_index=wave.first_symbol_index)


def apply_channel(tx, ch, band=None):
    """
    Pass a transmit waveform through the channel model.

    Args:
        tx (Waveform): Real passband waveform
        ch (ChannelModel): Channel model
        band (tuple | None): (f_lo, f_hi) band used for the SNR definition

    Returns:
        Waveform: Received real passband waveform; deterministic given ch.seed
    """
    logger.info("applying channel %s (SNR %s dB)", ch.name, ch.snr_db)
    return add_noise(propagate(tx, ch), ch.snr_db, ch.seed, band)


def measure_snr_db(clean, noisy, fs, band=None):
    """
    Known-signal-subtraction SNR estimate.

    Signal power is the in-band power of clean over its active samples; noise
    power is the in-band power of (noisy - clean) over all samples.
    """
    clean = np.asarray(clean, dtype=float)
    residual = np.asarray(noisy, dtype=float) - clean
    p_noise = _band_energy(residual, fs, band) / len(residual)
    p_signal = signal_power(clean, fs, band)
    if p_noise == 0:
        return math.inf
    return 10 * np.log10(p_signal / p_noise)
