#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Signal Model

Constellations, packet layout and transmit waveform construction:
1. Gray-coded QPSK / 8PSK / 16QAM / 64QAM alphabets with unit average energy
2. Bit mapping and hard-decision demapping
3. Raised-cosine pulse shaping (applied once, at the transmitter)
4. Passband upconversion
5. Packet assembly: preamble | guard | training + payload | guard
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from errors import AliasingError, ConfigError, InvalidRateError, LengthMismatchError
from modem_defaults import DEFAULT_OVERSAMPLING, GUARD_S, RC_ROLLOFF, RC_SPAN_SYMBOLS
from util.bit_source import splitmix64_bits

logger = logging.getLogger(__name__)


class ConstellationKind(Enum):
    QPSK = "QPSK"
    PSK8 = "8PSK"
    QAM16 = "16QAM"
    QAM64 = "64QAM"


class PreambleKind(Enum):
    BARKER13 = "barker"
    QUADRATIC_CHIRP = "qchirp"
    HYPERBOLIC_UP_DOWN = "hchirp"


class WaveformKind(Enum):
    PASSBAND_REAL = "passband_real"
    BASEBAND_COMPLEX = "baseband_complex"


BITS_PER_SYMBOL = {
    ConstellationKind.QPSK: 2,
    ConstellationKind.PSK8: 3,
    ConstellationKind.QAM16: 4,
    ConstellationKind.QAM64: 6,
}


def gray_code(n):
    """Reflected binary Gray code of n (works elementwise on arrays)."""
    return n ^ (n >> 1)


@dataclass(frozen=True, eq=False)
class Constellation:
    """
    Symbol alphabet with its bit mapping.

    points[i] carries the label i; bit_labels[i] spells i MSB first.
    """

    kind: ConstellationKind
    bits_per_symbol: int
    points: np.ndarray
    bit_labels: np.ndarray

    @property
    def size(self):
        return len(self.points)

    @property
    def rms(self):
        return float(np.sqrt(np.mean(np.abs(self.points) ** 2)))

    def nearest_index(self, symbols):
        """Index of the nearest point for each symbol (ties go to the lowest index)."""
        symbols = np.atleast_1d(np.asarray(symbols, dtype=complex))
        out = np.empty(len(symbols), dtype=np.int64)
        # chunked so 64QAM over long packets stays small in memory
        chunk = 16384
        for start in range(0, len(symbols), chunk):
            block = symbols[start : start + chunk]
            dist = np.abs(block[:, None] - self.points[None, :])
            out[start : start + chunk] = np.argmin(dist, axis=1)
        return out

    def slice(self, y):
        """Nearest constellation point to a single equalizer output."""
        return self.points[int(np.argmin(np.abs(self.points - y)))]


@dataclass(frozen=True, eq=False)
class PacketConfig:
    """
    Rates, alphabet and layout of one packet.

    fs must be an integer multiple of fb, and high enough that the real
    passband signal (fc +- fb(1+rolloff)/2) is representable.
    """

    fc: float
    fb: float
    constellation: Constellation
    preamble: PreambleKind = PreambleKind.BARKER13
    n_train: int = 1000
    n_payload: int = 4000
    guard_s: float = GUARD_S
    rolloff: float = RC_ROLLOFF
    fs: float = None
    span_symbols: int = RC_SPAN_SYMBOLS

    def __post_init__(self):
        if self.fs is None:
            object.__setattr__(self, "fs", DEFAULT_OVERSAMPLING * self.fb)
        if self.fc <= 0 or self.fb <= 0 or self.fs <= 0:
            raise ConfigError("fc, fb and fs must be positive")
        samples_per_symbol(self.fb, self.fs)
        if not 0 < self.rolloff <= 1:
            raise ConfigError(f"rolloff must lie in (0, 1], got {self.rolloff}")
        if self.n_train < 1:
            raise ConfigError(f"n_train must be >= 1, got {self.n_train}")
        if self.n_payload < 0:
            raise ConfigError(f"n_payload must be >= 0, got {self.n_payload}")
        if self.guard_s < 0:
            raise ConfigError(f"guard_s must be >= 0, got {self.guard_s}")
        if self.span_symbols < 8 or self.span_symbols % 2:
            raise ConfigError(f"span_symbols must be even and >= 8, got {self.span_symbols}")
        if self.fs <= 2 * (self.fc + self.half_bandwidth):
            raise AliasingError(
                f"fs={self.fs:g} Hz cannot represent a passband signal reaching "
                f"{self.fc + self.half_bandwidth:g} Hz"
            )

    @property
    def sps(self):
        return samples_per_symbol(self.fb, self.fs)

    @property
    def half_bandwidth(self):
        """One-sided occupied bandwidth fb(1+rolloff)/2."""
        return self.fb * (1 + self.rolloff) / 2

    @property
    def band(self):
        """Occupied passband (lower edge clipped at DC)."""
        return (max(self.fc - self.half_bandwidth, 0.0), self.fc + self.half_bandwidth)

    @property
    def bits_per_symbol(self):
        return self.constellation.bits_per_symbol

    @property
    def guard_samples(self):
        return int(round(self.guard_s * self.fs))

    def to_dict(self):
        """Canonical dictionary form (used for digests and sidecars)."""
        return {
            "format": self.constellation.kind.value,
            "fc_hz": self.fc,
            "fb_hz": self.fb,
            "fs_hz": self.fs,
            "preamble": self.preamble.value,
            "n_train": self.n_train,
            "n_payload": self.n_payload,
            "guard_s": self.guard_s,
            "rolloff": self.rolloff,
            "span_symbols": self.span_symbols,
        }


@dataclass(frozen=True, eq=False)
class Waveform:
    """Sampled signal; first_symbol_index marks the first symbol instant when known."""

    samples: np.ndarray
    fs: float
    kind: WaveformKind
    first_symbol_index: int = None

    def __post_init__(self):
        if self.fs <= 0:
            raise ConfigError(f"waveform sample rate must be positive, got {self.fs}")

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self):
        return len(self.samples) / self.fs


@dataclass(frozen=True, eq=False)
class SymbolFrame:
    """Training and payload symbols together with the bits they carry."""

    train: np.ndarray
    payload: np.ndarray
    train_bits: np.ndarray = field(repr=False)
    payload_bits: np.ndarray = field(repr=False)

    @property
    def symbols(self):
        return np.concatenate([self.train, self.payload])

    @property
    def n_train(self):
        return len(self.train)

    @property
    def n_payload(self):
        return len(self.payload)


def samples_per_symbol(fb, fs):
    """
    Integer samples per symbol for the rate pair.

    Raises:
        InvalidRateError: If fs is not an integer multiple of fb
    """
    ratio = fs / fb
    sps = int(round(ratio))
    if sps < 1 or not math.isclose(ratio, sps, rel_tol=0, abs_tol=1e-9):
        raise InvalidRateError(f"fs/fb must be an integer, got {fs:g}/{fb:g} = {ratio:g}")
    return sps


def make_constellation(kind):
    """
    Build a Gray-coded, unit-energy constellation.

    PSK labels follow the angular Gray code (QPSK starts at 45 degrees with
    label 00, 8PSK at 0 degrees with label 000). Square QAM uses the reflected
    Gray code per axis: the first k/2 bits select the I level, the last k/2
    the Q level, levels ascending.

    Args:
        kind (ConstellationKind): Alphabet to build

    Returns:
        Constellation: Points ordered by label
    """
    kind = ConstellationKind(kind)
    k = BITS_PER_SYMBOL[kind]
    m = 2**k
    points = np.zeros(m, dtype=complex)

    if kind in (ConstellationKind.QPSK, ConstellationKind.PSK8):
        offset = np.pi / 4 if kind is ConstellationKind.QPSK else 0.0
        positions = np.arange(m)
        angles = 2 * np.pi * positions / m + offset
        points[gray_code(positions)] = np.exp(1j * angles)
    else:
        half = k // 2
        levels_per_axis = 2**half
        levels = 2 * np.arange(levels_per_axis) - (levels_per_axis - 1)
        i_idx, q_idx = np.meshgrid(np.arange(levels_per_axis), np.arange(levels_per_axis), indexing="ij")
        labels = (gray_code(i_idx) << half) | gray_code(q_idx)
        points[labels.ravel()] = (levels[i_idx] + 1j * levels[q_idx]).ravel()

    points = points / np.sqrt(np.mean(np.abs(points) ** 2))
    shifts = np.arange(k - 1, -1, -1)
    bit_labels = ((np.arange(m)[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
    return Constellation(kind=kind, bits_per_symbol=k, points=points, bit_labels=bit_labels)


def map_bits(bits, c):
    """
    Map a bit sequence onto constellation symbols, k bits per symbol, MSB first.

    Raises:
        LengthMismatchError: If the bit count is not a multiple of k
    """
    bits = np.asarray(bits, dtype=np.uint8)
    k = c.bits_per_symbol
    if len(bits) % k:
        raise LengthMismatchError(f"{len(bits)} bits cannot be split into {k}-bit groups")
    groups = bits.reshape(-1, k).astype(np.int64)
    weights = 1 << np.arange(k - 1, -1, -1)
    return c.points[groups @ weights]


def demap_symbols(sym, c):
    """Hard-decision demapping: label bits of the nearest constellation point."""
    sym = np.asarray(sym, dtype=complex)
    if sym.size == 0:
        return np.zeros(0, dtype=np.uint8)
    return c.bit_labels[c.nearest_index(sym)].ravel()


def design_rc_filter(fb, rolloff, fs, span_symbols=RC_SPAN_SYMBOLS):
    """
    Raised-cosine impulse response sampled at fs.

    Args:
        fb (float): Symbol rate in Hz
        rolloff (float): Roll-off factor beta
        fs (float): Sample rate in Hz
        span_symbols (int): Even truncation span in symbols (>= 8)

    Returns:
        np.ndarray: span_symbols * fs/fb + 1 taps, peak 1 at the center tap
    """
    sps = samples_per_symbol(fb, fs)
    if span_symbols < 8 or span_symbols % 2:
        raise ConfigError(f"span_symbols must be even and >= 8, got {span_symbols}")
    half = span_symbols * sps // 2
    # time in symbol periods
    tau = np.arange(-half, half + 1) / sps
    denom = 1.0 - (2.0 * rolloff * tau) ** 2
    singular = np.isclose(np.abs(tau), 1.0 / (2.0 * rolloff), rtol=0, atol=1e-12)
    safe = np.where(singular, 1.0, denom)
    taps = np.sinc(tau) * np.cos(np.pi * rolloff * tau) / safe
    # analytic limit at |t| = Ts / (2 beta)
    taps[singular] = (np.pi / 4) * np.sinc(1.0 / (2.0 * rolloff))
    return taps


def pulse_shape(sym, cfg):
    """
    Zero-insert upsample to fs and filter with the raised-cosine pulse.

    Symbol k is centred on sample k * sps + span_symbols * sps / 2.

    Returns:
        Waveform: Complex baseband of length n_sym * sps + span_symbols * sps
    """
    sym = np.asarray(sym, dtype=complex)
    sps = cfg.sps
    taps = design_rc_filter(cfg.fb, cfg.rolloff, cfg.fs, cfg.span_symbols)
    upsampled = np.zeros(len(sym) * sps, dtype=complex)
    upsampled[::sps] = sym
    if len(sym) == 0:
        shaped = np.zeros(0, dtype=complex)
    else:
        shaped = np.convolve(upsampled, taps)
    return Waveform(shaped, cfg.fs, WaveformKind.BASEBAND_COMPLEX, first_symbol_index=len(taps) // 2)


def upconvert(bb, fc, bandwidth=0.0):
    """
    Shift a complex baseband waveform to a real passband carrier.

    s[n] = Re{bb[n] exp(j 2 pi fc n / fs)}, phase referenced to n = 0.

    Args:
        bb (Waveform): Complex baseband waveform
        fc (float): Carrier frequency in Hz
        bandwidth (float): Two-sided occupied bandwidth of bb in Hz

    Returns:
        Waveform: Real passband waveform

    Raises:
        AliasingError: If bb.fs <= 2 * (fc + bandwidth / 2)
    """
    if bb.fs <= 2 * (fc + bandwidth / 2):
        raise AliasingError(
            f"fs={bb.fs:g} Hz too low for carrier {fc:g} Hz with bandwidth {bandwidth:g} Hz"
        )
    if fc - bandwidth / 2 < 0:
        # lower band edge folds through DC; the real part is still well defined
        warnings.warn(
            f"lower band edge {fc - bandwidth / 2:g} Hz is below DC and folds back",
            RuntimeWarning,
            stacklevel=2,
        )
    n = np.arange(len(bb.samples))
    carrier = np.exp(2j * np.pi * fc * n / bb.fs)
    passband = np.real(np.asarray(bb.samples, dtype=complex) * carrier)
    return Waveform(passband, bb.fs, WaveformKind.PASSBAND_REAL, first_symbol_index=bb.first_symbol_index)


def assemble_packet(frame, cfg, preamble_wave=None):
    """
    Concatenate preamble, guard, shaped data burst and trailing guard.

    Args:
        frame (SymbolFrame): Training and payload symbols
        cfg (PacketConfig): Packet configuration
        preamble_wave (Waveform | None): Passband preamble at cfg.fs (None for none)

    Returns:
        Waveform: Real passband packet; first_symbol_index is the sample of the
        first training symbol instant
    """
    if preamble_wave is None:
        preamble = np.zeros(0)
    else:
        if not math.isclose(preamble_wave.fs, cfg.fs):
            raise ConfigError(f"preamble fs {preamble_wave.fs:g} differs from packet fs {cfg.fs:g}")
        preamble = np.asarray(preamble_wave.samples, dtype=float)

    guard = np.zeros(cfg.guard_samples)
    shaped = pulse_shape(frame.symbols, cfg)
    burst = upconvert(shaped, cfg.fc, 2 * cfg.half_bandwidth)

    samples = np.concatenate([preamble, guard, burst.samples, guard])
    first_symbol = len(preamble) + len(guard) + shaped.first_symbol_index
    logger.debug(
        "assembled packet: %d preamble, %d guard, %d burst samples",
        len(preamble),
        len(guard),
        len(burst.samples),
    )
    return Waveform(samples, cfg.fs, WaveformKind.PASSBAND_REAL, first_symbol_index=first_symbol)


def make_frame(cfg, seed):
    """
    Draw training and payload bits from splitmix64 and map them.

    Training bits come first in the bit stream, payload bits follow.
    """
    c = cfg.constellation
    k = c.bits_per_symbol
    bits = splitmix64_bits(seed, (cfg.n_train + cfg.n_payload) * k)
    train_bits = bits[: cfg.n_train * k]
    payload_bits = bits[cfg.n_train * k :]
    return SymbolFrame(
        train=map_bits(train_bits, c),
        payload=map_bits(payload_bits, c),
        train_bits=train_bits,
        payload_bits=payload_bits,
    )
