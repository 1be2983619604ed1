#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Packet Synchronization

Preamble generation and detection:
1. Barker-13 chips, raised-cosine shaped at the symbol rate and upconverted
2. 10 us quadratic chirp across fc +- fb/2
3. Superimposed up/down hyperbolic chirps for Doppler acquisition
4. Matched-filter detection on analytic signals (normalized correlation)
5. Doppler estimation from the up/down arrival-time difference
"""

import logging
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import signal

from errors import AliasingError, ConfigError, InvalidBandError, SyncNotFoundError
from modem_defaults import (
    BARKER_13,
    DOPPLER_RANGE,
    HYPERBOLIC_CHIRP_S,
    HYPERBOLIC_FLOOR_FRACTION,
    QUADRATIC_CHIRP_S,
    RC_ROLLOFF,
    RC_SPAN_SYMBOLS,
    RESAMPLE_HALF_TAPS,
    RESAMPLE_MAX_DENOMINATOR,
    SYNC_THRESHOLD,
)
from signal_model import PreambleKind, Waveform, WaveformKind, design_rc_filter, samples_per_symbol, upconvert

logger = logging.getLogger(__name__)

# local energies below this fraction of the window maximum count as silence
ENERGY_FLOOR = 1e-12
# zero padding around the calibration copy of the hyperbolic pair
REFERENCE_PAD = 32


@dataclass(frozen=True)
class PreambleSpec:
    kind: PreambleKind
    duration_s: float
    band: tuple
    fc: float
    fb: float
    rolloff: float = RC_ROLLOFF
    span_symbols: int = RC_SPAN_SYMBOLS

    def __post_init__(self):
        f_lo, f_hi = self.band
        if f_lo >= f_hi:
            raise InvalidBandError(f"preamble band must satisfy f_lo < f_hi, got ({f_lo:g}, {f_hi:g})")
        if self.kind is not PreambleKind.BARKER13 and self.duration_s <= 0:
            raise ConfigError(f"chirp duration must be positive, got {self.duration_s}")

    @property
    def effective_separation_s(self):
        """
        Time constant linking the up/down arrival difference to time dilation.

        For a hyperbolic pair, a dilation a shifts the down-chirp peak relative
        to the up-chirp peak by T_eff * (1 - 1/a), T_eff = T (f_hi + f_lo) / (f_hi - f_lo).
        """
        f_lo, f_hi = self.band
        return self.duration_s * (f_hi + f_lo) / (f_hi - f_lo)


@dataclass(frozen=True)
class SyncResult:
    start_sample: int
    doppler_factor: float = 1.0
    peak_metric: float = 1.0
    doppler_flagged: bool = False


def preamble_spec_for(cfg):
    """PreambleSpec matching a packet configuration's preamble choice."""
    fc, fb = cfg.fc, cfg.fb
    if cfg.preamble is PreambleKind.BARKER13:
        lo, hi = cfg.band
        return PreambleSpec(cfg.preamble, 13 / fb, (lo, hi), fc, fb, cfg.rolloff, cfg.span_symbols)
    if cfg.preamble is PreambleKind.QUADRATIC_CHIRP:
        return PreambleSpec(cfg.preamble, QUADRATIC_CHIRP_S, (fc - fb / 2, fc + fb / 2), fc, fb)
    f_lo = max(fc - fb / 2, HYPERBOLIC_FLOOR_FRACTION * fc)
    return PreambleSpec(cfg.preamble, HYPERBOLIC_CHIRP_S, (f_lo, fc + fb / 2), fc, fb)


def gen_barker(fc, fb, fs, rolloff=RC_ROLLOFF, span_symbols=RC_SPAN_SYMBOLS):
    """
    Barker-13 preamble: chips in printed order, RC-shaped at chip rate fb, upconverted to fc.

    Returns:
        Waveform: 13 * fs/fb + span_symbols * fs/fb real samples
    """
    sps = samples_per_symbol(fb, fs)
    taps = design_rc_filter(fb, rolloff, fs, span_symbols)
    chips = np.zeros(len(BARKER_13) * sps, dtype=complex)
    chips[::sps] = BARKER_13
    shaped = Waveform(np.convolve(chips, taps), fs, WaveformKind.BASEBAND_COMPLEX)
    return upconvert(shaped, fc, fb * (1 + rolloff))


def chirp_phase(spec, t):
    """Instantaneous phase (rad) of the chirp law, zero at t = 0."""
    f_lo, f_hi = spec.band
    T = spec.duration_s
    if spec.kind is PreambleKind.QUADRATIC_CHIRP:
        # integral of f_lo + (f_hi - f_lo)(t/T)^2
        return 2 * np.pi * (f_lo * t + (f_hi - f_lo) * t**3 / (3 * T**2))
    if spec.kind is PreambleKind.HYPERBOLIC_UP_DOWN:
        if f_lo <= 0:
            raise InvalidBandError(f"hyperbolic chirp needs f_lo > 0, got {f_lo:g}")
        # f(t) = K / (t0 - t): integral is -K ln(1 - t/t0)
        k = f_lo * f_hi * T / (f_hi - f_lo)
        t0 = f_hi * T / (f_hi - f_lo)
        return -2 * np.pi * k * np.log1p(-t / t0)
    raise ConfigError(f"{spec.kind.value} preamble has no chirp law")


def instantaneous_frequency(spec, t):
    """Up-sweep frequency law in Hz."""
    f_lo, f_hi = spec.band
    T = spec.duration_s
    t = np.asarray(t, dtype=float)
    if spec.kind is PreambleKind.QUADRATIC_CHIRP:
        return f_lo + (f_hi - f_lo) * (t / T) ** 2
    return f_lo * f_hi * T / (f_hi * T - (f_hi - f_lo) * t)


def _chirp_times(spec, fs):
    _, f_hi = spec.band
    if fs <= 2 * f_hi:
        raise AliasingError(f"fs={fs:g} Hz cannot represent a chirp reaching {f_hi:g} Hz")
    n = int(round(spec.duration_s * fs))
    return np.arange(n) / fs


def gen_quadratic_chirp(spec, fs):
    """Unit-amplitude real chirp sweeping band[0] -> band[1] with a quadratic frequency law."""
    t = _chirp_times(spec, fs)
    return Waveform(np.cos(chirp_phase(spec, t)), fs, WaveformKind.PASSBAND_REAL)


def hyperbolic_templates(spec, fs):
    """Up-sweep and down-sweep hyperbolic chirps (unit amplitude each)."""
    f_lo, _ = spec.band
    if f_lo <= 0:
        raise InvalidBandError(f"hyperbolic chirp needs f_lo > 0, got {f_lo:g}")
    t = _chirp_times(spec, fs)
    up = np.cos(chirp_phase(spec, t))
    return up, up[::-1].copy()


def gen_hyperbolic_pair(spec, fs):
    """Superimposed up/down hyperbolic chirps, amplitude 1/2 each."""
    up, down = hyperbolic_templates(spec, fs)
    return Waveform((up + down) / 2, fs, WaveformKind.PASSBAND_REAL)


def make_preamble(cfg):
    """
    Preamble waveform for a packet configuration.

    Returns:
        tuple: (PreambleSpec, Waveform)
    """
    spec = preamble_spec_for(cfg)
    if spec.kind is PreambleKind.BARKER13:
        wave = gen_barker(cfg.fc, cfg.fb, cfg.fs, cfg.rolloff, cfg.span_symbols)
    elif spec.kind is PreambleKind.QUADRATIC_CHIRP:
        wave = gen_quadratic_chirp(spec, cfg.fs)
    else:
        wave = gen_hyperbolic_pair(spec, cfg.fs)
    return spec, wave


def resample_by_factor(x, factor):
    """
    Time-dilate a sampled signal: y[n] = x(factor * n).

    The factor is approximated by a rational p/q (q <= 5000) and applied with
    a polyphase Kaiser-windowed interpolator long enough to stay flat out
    to about 0.95 of the input Nyquist frequency.
    """
    x = np.asarray(x)
    ratio = Fraction(factor).limit_denominator(RESAMPLE_MAX_DENOMINATOR)
    if ratio == 1:
        return x.copy()
    up, down = ratio.denominator, ratio.numerator
    max_rate = max(up, down)
    taps = signal.firwin(2 * RESAMPLE_HALF_TAPS * max_rate + 1, 1.0 / max_rate, window=("kaiser", 10.0))
    return signal.resample_poly(x, up=up, down=down, window=taps)


def _analytic(x):
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return x
    return signal.hilbert(x)


def _search_segment(n_rx, n_template, search_window):
    lo, hi = (0, n_rx - n_template) if search_window is None else search_window
    lo = max(int(lo), 0)
    hi = min(int(hi), n_rx - n_template)
    if hi < lo:
        raise SyncNotFoundError(
            f"received waveform ({n_rx} samples) too short for a {n_template}-sample template in the search window"
        )
    return lo, hi


def normalized_correlation(rx, template, search_window=None):
    """
    Normalized cross-correlation magnitude of analytic signals.

    Args:
        rx (np.ndarray): Received samples (real or complex)
        template (np.ndarray): Template samples
        search_window (tuple | None): Inclusive (lo, hi) range of template start lags

    Returns:
        tuple: (lo, metric in [0, 1], raw correlation magnitude), arrays indexed by lag - lo
    """
    n_t = len(template)
    lo, hi = _search_segment(len(rx), n_t, search_window)
    segment = _analytic(np.asarray(rx)[lo : hi + n_t])
    tmpl = _analytic(template)

    # scipy conjugates the second operand for complex inputs
    corr = signal.correlate(segment, tmpl, mode="valid")
    power = np.concatenate([[0.0], np.cumsum(np.abs(segment) ** 2)])
    local_energy = np.clip(power[n_t:] - power[:-n_t], 0.0, None)
    template_energy = float(np.sum(np.abs(tmpl) ** 2))

    floor = ENERGY_FLOOR * max(float(local_energy.max(initial=0.0)), 0.0)
    metric = np.zeros(len(corr))
    valid = local_energy > floor
    metric[valid] = np.abs(corr[valid]) / np.sqrt(template_energy * local_energy[valid])
    return lo, np.clip(metric, 0.0, 1.0), np.abs(corr)


def detect_preamble(rx, template, search_window=None, data_offset=0, threshold=SYNC_THRESHOLD):
    """
    Locate a preamble by matched filtering.

    Args:
        rx (Waveform): Received passband waveform
        template (Waveform): Preamble template at rx.fs
        search_window (tuple | None): Inclusive (lo, hi) template-start lags to search
        data_offset (int): Samples from preamble start to the first symbol instant
        threshold (float): Minimum normalized correlation

    Returns:
        SyncResult: start_sample is the first symbol instant in rx

    Raises:
        SyncNotFoundError: If the correlation peak is below threshold
    """
    if template.fs != rx.fs:
        raise ConfigError(f"template fs {template.fs:g} differs from rx fs {rx.fs:g}")
    lo, metric, _ = normalized_correlation(rx.samples, template.samples, search_window)
    peak = int(np.argmax(metric))
    peak_metric = float(metric[peak])
    logger.debug("preamble peak %.4f at lag %d", peak_metric, lo + peak)
    if peak_metric < threshold:
        raise SyncNotFoundError(f"no preamble found: peak correlation {peak_metric:.3f} < threshold {threshold:.2f}")
    return SyncResult(start_sample=lo + peak + int(data_offset), peak_metric=peak_metric)


def _interpolated_peak(magnitude, k):
    """Sub-sample position of the peak at index k by fitting a parabola through it and its neighbours."""
    if 0 < k < len(magnitude) - 1:
        left, mid, right = magnitude[k - 1], magnitude[k], magnitude[k + 1]
        denom = left - 2 * mid + right
        if denom < 0:
            return k + 0.5 * (left - right) / denom, k
    return float(k), k


def _up_down_lags(rx_samples, up, down, search_window, threshold):
    lags = []
    peaks = []
    for template in (up, down):
        lo, metric, magnitude = normalized_correlation(rx_samples, template, search_window)
        tau, k = _interpolated_peak(magnitude, int(np.argmax(metric)))
        lags.append(lo + tau)
        peaks.append(float(metric[k]))
    if min(peaks) < threshold:
        raise SyncNotFoundError(
            f"hyperbolic pair not found: up peak {peaks[0]:.3f}, down peak {peaks[1]:.3f}, threshold {threshold:.2f}"
        )
    return lags[0], lags[1]


def estimate_doppler(rx, spec, search_window=None, threshold=SYNC_THRESHOLD):
    """
    Estimate the time-dilation factor from the up/down hyperbolic pair.

    The pair's own up/down cross-talk biases each peak slightly; the offset
    measured on the undilated template is subtracted.

    Args:
        rx (Waveform): Received waveform containing the pair
        spec (PreambleSpec): Hyperbolic pair specification
        search_window (tuple | None): Inclusive range of pair start lags

    Returns:
        float: Dilation factor a, with rx[n] ~ tx(a n)
    """
    if spec.kind is not PreambleKind.HYPERBOLIC_UP_DOWN:
        raise ConfigError("Doppler estimation needs the hyperbolic up/down preamble")
    up, down = hyperbolic_templates(spec, rx.fs)
    tau_up, tau_down = _up_down_lags(rx.samples, up, down, search_window, threshold)

    pair = (up + down) / 2
    pad = np.zeros(REFERENCE_PAD)
    reference = np.concatenate([pad, pair, pad])
    ref_up, ref_down = _up_down_lags(reference, up, down, (0, 2 * REFERENCE_PAD), 0.0)
    delta_tau = ((tau_down - tau_up) - (ref_down - ref_up)) / rx.fs

    factor = 1.0 / (1.0 - delta_tau / spec.effective_separation_s)
    logger.debug("Doppler: up/down shift %.3e s -> factor %.6f", delta_tau, factor)
    return factor


def synchronize(rx, cfg, threshold=SYNC_THRESHOLD):
    """
    Acquire a packet: Doppler (hyperbolic preamble only), then timing.

    The front of rx is zero-padded by one template length so a preamble that
    starts at (or, after time compression, slightly before) sample 0 still
    produces a full correlation peak. Template starts are searched up to the
    latest position that leaves room for every symbol of the packet, and at
    least across the leading guard.

    Args:
        rx (Waveform): Received passband packet
        cfg (PacketConfig): Packet configuration

    Returns:
        SyncResult: Timing in rx samples and the Doppler estimate
    """
    spec, template = make_preamble(cfg)
    data_offset = len(template) + cfg.guard_samples + cfg.span_symbols * cfg.sps // 2
    latest = len(rx) - data_offset - (cfg.n_train + cfg.n_payload) * cfg.sps
    margin = len(template)
    padded = Waveform(np.concatenate([np.zeros(margin), rx.samples]), rx.fs, rx.kind)
    window = (0, margin + max(latest, cfg.guard_samples))

    factor = 1.0
    flagged = False
    searched = padded
    if spec.kind is PreambleKind.HYPERBOLIC_UP_DOWN:
        factor = estimate_doppler(padded, spec, window, threshold)
        flagged = not DOPPLER_RANGE[0] < factor < DOPPLER_RANGE[1]
        if flagged:
            warnings.warn(f"Doppler estimate {factor:.5f} outside {DOPPLER_RANGE}", RuntimeWarning, stacklevel=2)
        if factor != 1.0:
            searched = Waveform(resample_by_factor(padded.samples, 1.0 / factor), rx.fs, rx.kind)
            # padded sample m sits at m * factor after undoing the dilation
            window = (0, int(np.ceil(window[1] * factor)) + 1)

    found = detect_preamble(searched, template, window, data_offset, threshold)
    start = int(round(found.start_sample / factor)) - margin
    logger.info("sync: start sample %d, Doppler %.6f, peak %.3f", start, factor, found.peak_metric)
    return SyncResult(start_sample=start, doppler_factor=factor, peak_metric=found.peak_metric, doppler_flagged=flagged)
