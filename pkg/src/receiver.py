#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Receiver

1. Quadrature front end: Doppler correction, mix to baseband, lowpass,
   decimate to 2 samples per symbol
2. Fractionally spaced decision feedback equalizer adapted by exponentially
   weighted RLS, with a second-order PLL rotating the feedforward input
3. Training for the first n_train symbols, decision-directed afterwards
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import signal

from errors import ConfigError, EqualizerDivergenceError, InvalidRateError, MisalignmentError, RlsNumericalError
from modem_defaults import (
    DIVERGENCE_FACTOR,
    DIVERGENCE_WINDOW,
    EQ_MAX_TAPS,
    EQ_N_FB,
    EQ_N_FF,
    EQ_SPS,
    FRONT_END_ATTEN_DB,
    FRONT_END_LEAD_SYMBOLS,
    PLL_DEN,
    PLL_NUM,
    RLS_DELTA,
    RLS_LAMBDA,
    SYNC_THRESHOLD,
)
from signal_model import Waveform, WaveformKind, make_frame
from sync import resample_by_factor, synchronize

logger = logging.getLogger(__name__)


class EqualizerMode(Enum):
    TRAINING = "training"
    DECISION_DIRECTED = "decision_directed"


@dataclass(frozen=True)
class EqualizerConfig:
    n_ff: int = EQ_N_FF
    n_fb: int = EQ_N_FB
    lam: float = RLS_LAMBDA
    delta: float = RLS_DELTA
    pll_num: tuple = PLL_NUM
    pll_den: tuple = PLL_DEN
    sps: int = EQ_SPS
    divergence_window: int = DIVERGENCE_WINDOW
    divergence_factor: float = DIVERGENCE_FACTOR

    def __post_init__(self):
        if not 0 < self.lam <= 1:
            raise ConfigError(f"lambda must lie in (0, 1], got {self.lam}")
        if self.delta <= 0:
            raise ConfigError(f"delta must be > 0, got {self.delta}")
        if not 1 <= self.n_ff <= EQ_MAX_TAPS:
            raise ConfigError(f"n_ff must lie in [1, {EQ_MAX_TAPS}], got {self.n_ff}")
        if not 0 <= self.n_fb <= EQ_MAX_TAPS:
            raise ConfigError(f"n_fb must lie in [0, {EQ_MAX_TAPS}], got {self.n_fb}")
        if self.sps != EQ_SPS:
            raise ConfigError(f"equalizer runs at {EQ_SPS} samples per symbol, got {self.sps}")
        if len(self.pll_num) != 3 or len(self.pll_den) != 3 or self.pll_den[0] == 0:
            raise ConfigError("PLL needs 3 numerator and 3 denominator coefficients with den[0] != 0")

    def to_dict(self):
        return {
            "n_ff": self.n_ff,
            "n_fb": self.n_fb,
            "lambda": self.lam,
            "delta": self.delta,
            "pll_num": list(self.pll_num),
            "pll_den": list(self.pll_den),
        }

    @classmethod
    def from_dict(cls, data):
        keys = {"n_ff": "n_ff", "n_fb": "n_fb", "lambda": "lam", "delta": "delta", "pll_num": "pll_num", "pll_den": "pll_den"}
        unknown = set(data) - set(keys)
        if unknown:
            raise ConfigError(f"equalizer.{sorted(unknown)[0]}: unknown key")
        kwargs = {keys[k]: tuple(v) if k.startswith("pll") else v for k, v in data.items()}
        return cls(**kwargs)


@dataclass
class EqualizerState:
    """
    Adaptive state of one packet run.

    w stacks the feedforward taps (first n_ff) and feedback taps; the
    equalizer output is y = w^H u. P is the inverse correlation matrix.
    """

    w: np.ndarray
    P: np.ndarray
    n_ff: int
    theta: float = 0.0
    # (phi_{k-1}, phi_{k-2}, theta_{k-1}, theta_{k-2})
    pll_hist: tuple = (0.0, 0.0, 0.0, 0.0)
    mode: EqualizerMode = EqualizerMode.TRAINING
    k: int = 0

    @classmethod
    def for_taps(cls, n_ff, n_fb, delta=RLS_DELTA, center_spike=True):
        """Zero taps (plus a unit center feedforward tap) and P = I / delta."""
        w = np.zeros(n_ff + n_fb, dtype=complex)
        if center_spike:
            w[n_ff // 2] = 1.0
        return cls(w=w, P=np.eye(n_ff + n_fb, dtype=complex) / delta, n_ff=n_ff)

    @property
    def w_ff(self):
        return self.w[: self.n_ff]

    @property
    def w_fb(self):
        return self.w[self.n_ff :]


@dataclass(frozen=True)
class SymbolDecisionRecord:
    k: int
    y: complex
    d: complex
    e: complex
    theta: float
    phase_error: float
    mode: EqualizerMode


@dataclass
class PacketReception:
    """Everything the receive chain produced for one packet."""

    sync: object
    baseband: Waveform
    decisions: np.ndarray
    records: list = field(repr=False)
    state: EqualizerState = field(repr=False)


def rls_step(state, u, e, lam=RLS_LAMBDA):
    """
    Exponentially weighted RLS update for y = w^H u, in place.

    g = P u / (lam + u^H P u); w <- w + g conj(e); P <- (P - g u^H P) / lam,
    then P is re-Hermitianized.

    Raises:
        RlsNumericalError: If lam + u^H P u is not a positive finite number, or
            the updated P has a non-finite entry or a non-positive diagonal
    """
    Pu = state.P @ u
    denom = lam + np.real(np.vdot(u, Pu))
    if not np.isfinite(denom) or denom <= 0:
        raise RlsNumericalError(f"RLS denominator {denom!r} at symbol {state.k}", symbol_index=state.k)
    g = Pu / denom
    state.w = state.w + g * np.conj(e)
    # P Hermitian, so g u^H P = g (P u)^H
    P = (state.P - np.outer(g, np.conj(Pu))) / lam
    P = (P + P.conj().T) / 2
    if not np.isfinite(P).all() or not (np.real(np.diag(P)) > 0).all():
        raise RlsNumericalError(
            f"inverse correlation matrix lost definiteness at symbol {state.k}", symbol_index=state.k
        )
    state.P = P
    return state


def pll_step(state, phase_error, num=PLL_NUM, den=PLL_DEN):
    """
    Advance the loop filter num/den by one phase-error sample, in place.

    den[0] theta_k = num . [phi_k, phi_{k-1}, phi_{k-2}] - den[1] theta_{k-1} - den[2] theta_{k-2}

    Returns:
        float: theta_k (unwrapped)
    """
    phi1, phi2, th1, th2 = state.pll_hist
    theta = (num[0] * phase_error + num[1] * phi1 + num[2] * phi2 - den[1] * th1 - den[2] * th2) / den[0]
    state.pll_hist = (phase_error, phi1, theta, th1)
    state.theta = theta
    return theta


def front_end_filter(cfg, atten_db=FRONT_END_ATTEN_DB):
    """
    Kaiser lowpass taps for the mixed-down signal.

    The passband keeps fb(1+rolloff)/2. The stopband starts where decimation
    to 2 fb would fold energy into the signal band, or earlier at the 2 fc
    mixing image when that image clears the signal band.
    """
    half_bw = cfg.half_bandwidth
    stop = 2 * cfg.fb - half_bw
    if 2 * cfg.fc - half_bw > half_bw:
        stop = min(stop, 2 * cfg.fc - half_bw)
    passband = min(half_bw, stop - 0.1 * cfg.fb)
    numtaps, beta = signal.kaiserord(atten_db, (stop - passband) / (cfg.fs / 2))
    numtaps |= 1
    return signal.firwin(numtaps, (passband + stop) / 2, window=("kaiser", beta), fs=cfg.fs)


def front_end(rx, cfg, sync, lead_symbols=FRONT_END_LEAD_SYMBOLS):
    """
    Quadrature demodulation to 2 samples per symbol.

    Even output samples fall on symbol instants; output sample 2 * lead_symbols
    is the first training symbol.

    Args:
        rx (Waveform): Received passband waveform at cfg.fs
        cfg (PacketConfig): Packet configuration
        sync (SyncResult): Timing (rx samples) and Doppler estimate
        lead_symbols (int): Symbols of lead-in kept ahead of the first symbol

    Returns:
        Waveform: Complex baseband at 2 fb

    Raises:
        MisalignmentError: If the start sample lies outside rx
    """
    if rx.fs != cfg.fs:
        raise ConfigError(f"rx sample rate {rx.fs:g} differs from config fs {cfg.fs:g}")
    sps = cfg.sps
    if sps % EQ_SPS:
        raise InvalidRateError(f"fs/fb = {sps} cannot be decimated to {EQ_SPS} samples per symbol")

    x = np.asarray(rx.samples, dtype=float)
    start = sync.start_sample
    if sync.doppler_factor != 1.0:
        x = resample_by_factor(x, 1.0 / sync.doppler_factor)
        start = int(round(start * sync.doppler_factor))
    if not 0 <= start < len(x):
        raise MisalignmentError(f"start sample {start} outside received waveform of {len(x)} samples")

    n = np.arange(len(x))
    mixed = 2 * x * np.exp(-2j * np.pi * cfg.fc * n / cfg.fs)
    taps = front_end_filter(cfg)
    delay = (len(taps) - 1) // 2
    baseband = signal.fftconvolve(mixed, taps)[delay : delay + len(x)]

    first = start - lead_symbols * sps
    if first < 0:
        baseband = np.concatenate([np.zeros(-first, dtype=complex), baseband])
        first = 0
    step = sps // EQ_SPS
    decimated = baseband[first::step]
    logger.debug("front end: %d-tap lowpass, %d samples at 2 sps", len(taps), len(decimated))
    return Waveform(decimated, 2 * cfg.fb, WaveformKind.BASEBAND_COMPLEX, first_symbol_index=EQ_SPS * lead_symbols)


def equalize_packet(bb2, frame, ecfg, constellation):
    """
    Run the DFE over every symbol of the packet.

    Symbol k sits at input sample c_k = first_symbol_index + 2k. Its
    feedforward regressor holds samples c_k + n_ff/2 down to c_k - n_ff/2 + 1,
    rotated by exp(-j theta); the feedback regressor holds the previous n_fb
    decisions, newest first.

    Args:
        bb2 (Waveform): Baseband at 2 samples per symbol
        frame (SymbolFrame): Training symbols (and payload length)
        ecfg (EqualizerConfig): Equalizer configuration
        constellation (Constellation): Slicer alphabet

    Returns:
        tuple: (payload decisions, list of SymbolDecisionRecord, final EqualizerState)

    Raises:
        EqualizerDivergenceError: If decision-directed mean |e| over the
            divergence window exceeds divergence_factor * constellation RMS
        MisalignmentError: If bb2 ends before the last symbol instant
    """
    if bb2.first_symbol_index is None:
        raise MisalignmentError("baseband waveform carries no first-symbol index")
    n_train, n_total = frame.n_train, frame.n_train + frame.n_payload
    x = np.asarray(bb2.samples, dtype=complex)
    first = bb2.first_symbol_index
    last_center = first + EQ_SPS * (n_total - 1)
    if last_center >= len(x):
        raise MisalignmentError(f"packet needs {last_center + 1} baseband samples, got {len(x)}")

    n_ff, n_fb = ecfg.n_ff, ecfg.n_fb
    half = n_ff // 2
    # zero padding so every regressor window is in range
    padded = np.concatenate([np.zeros(n_ff, dtype=complex), x, np.zeros(n_ff, dtype=complex)])

    state = EqualizerState.for_taps(n_ff, n_fb, ecfg.delta)
    past = np.zeros(n_fb, dtype=complex)
    decisions = np.zeros(frame.n_payload, dtype=complex)
    records = []
    recent = deque(maxlen=ecfg.divergence_window)
    limit = ecfg.divergence_factor * constellation.rms

    for k in range(n_total):
        state.k = k
        if k == n_train:
            state.mode = EqualizerMode.DECISION_DIRECTED
        top = first + EQ_SPS * k + half + n_ff
        window = padded[top - n_ff + 1 : top + 1][::-1]
        u = np.concatenate([window * np.exp(-1j * state.theta), past])
        y = np.vdot(state.w, u)

        if state.mode is EqualizerMode.TRAINING:
            d = frame.train[k]
        else:
            d = constellation.slice(y)
            decisions[k - n_train] = d
        e = d - y
        rls_step(state, u, e, ecfg.lam)

        # phase of y relative to d drives theta toward the input rotation
        phase_error = float(np.angle(y * np.conj(d))) if y != 0 else 0.0
        theta_used = state.theta
        pll_step(state, phase_error, ecfg.pll_num, ecfg.pll_den)
        records.append(SymbolDecisionRecord(k, complex(y), complex(d), complex(e), theta_used, phase_error, state.mode))

        if n_fb:
            past = np.concatenate([[d], past[:-1]])

        if state.mode is EqualizerMode.DECISION_DIRECTED:
            recent.append(abs(e))
            if len(recent) == ecfg.divergence_window and np.mean(recent) > limit:
                raise EqualizerDivergenceError(
                    f"equalizer lost lock at symbol {k}: mean |e| {np.mean(recent):.3f} > {limit:.3f}",
                    symbol_index=k,
                )

    logger.info("equalized %d symbols (%d training)", n_total, n_train)
    return decisions, records, state


def receive_packet(rx, cfg, seed, ecfg=None, threshold=SYNC_THRESHOLD):
    """
    Full receive chain: sync -> front end -> equalizer.

    The training symbols are regenerated from the packet seed.

    Returns:
        PacketReception: Sync result, 2 sps baseband, payload decisions and per-symbol records
    """
    ecfg = ecfg or EqualizerConfig()
    sync = synchronize(rx, cfg, threshold)
    bb2 = front_end(rx, cfg, sync)
    frame = make_frame(cfg, seed)
    decisions, records, state = equalize_packet(bb2, frame, ecfg, cfg.constellation)
    return PacketReception(sync=sync, baseband=bb2, decisions=decisions, records=records, state=state)
