"""Tests for constellations, pulse shaping, upconversion and packet assembly."""

import numpy as np
import pytest

from conftest import make_cfg
from errors import AliasingError, ConfigError, InvalidRateError, LengthMismatchError
from metrics import out_of_band_ratio_db
from signal_model import (
    ConstellationKind,
    PacketConfig,
    Waveform,
    WaveformKind,
    assemble_packet,
    demap_symbols,
    design_rc_filter,
    make_constellation,
    make_frame,
    map_bits,
    pulse_shape,
    upconvert,
)
from sync import make_preamble

ALL_KINDS = list(ConstellationKind)
SQRT2 = np.sqrt(2)


class TestConstellation:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_unit_average_energy(self, kind):
        c = make_constellation(kind)
        np.testing.assert_allclose(np.mean(np.abs(c.points) ** 2), 1.0, atol=1e-12)
        assert c.size == 2**c.bits_per_symbol

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_labels_are_a_bijection(self, kind):
        c = make_constellation(kind)
        assert len({tuple(row) for row in c.bit_labels}) == c.size
        assert len(np.unique(np.round(c.points, 9))) == c.size

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_nearest_neighbours_differ_in_one_bit(self, kind):
        c = make_constellation(kind)
        dist = np.abs(c.points[:, None] - c.points[None, :])
        np.fill_diagonal(dist, np.inf)
        d_min = dist.min()
        for i, j in zip(*np.nonzero(np.isclose(dist, d_min, rtol=1e-9))):
            assert np.count_nonzero(c.bit_labels[i] != c.bit_labels[j]) == 1

    def test_qpsk_mapping(self):
        c = make_constellation(ConstellationKind.QPSK)
        np.testing.assert_allclose(c.points[0b00], (1 + 1j) / SQRT2, atol=1e-12)
        np.testing.assert_allclose(c.points[0b01], (-1 + 1j) / SQRT2, atol=1e-12)
        np.testing.assert_allclose(c.points[0b11], (-1 - 1j) / SQRT2, atol=1e-12)
        np.testing.assert_allclose(c.points[0b10], (1 - 1j) / SQRT2, atol=1e-12)

    def test_8psk_label_000_at_zero_angle(self):
        c = make_constellation(ConstellationKind.PSK8)
        np.testing.assert_allclose(c.points[0], 1.0, atol=1e-12)

    @pytest.mark.parametrize(
        "kind, levels, scale",
        [(ConstellationKind.QAM16, [-3, -1, 1, 3], 10), (ConstellationKind.QAM64, [-7, -5, -3, -1, 1, 3, 5, 7], 42)],
    )
    def test_qam_grid_levels(self, kind, levels, scale):
        c = make_constellation(kind)
        expected = np.array(levels) / np.sqrt(scale)
        np.testing.assert_allclose(np.unique(np.round(c.points.real, 12)), expected, atol=1e-12)
        np.testing.assert_allclose(np.unique(np.round(c.points.imag, 12)), expected, atol=1e-12)


class TestBitMapping:
    def test_map_qpsk_00(self):
        c = make_constellation(ConstellationKind.QPSK)
        np.testing.assert_allclose(map_bits([0, 0], c), [(1 + 1j) / SQRT2])

    def test_length_contract(self):
        c = make_constellation(ConstellationKind.QAM64)
        assert len(map_bits(np.zeros(12, dtype=np.uint8), c)) == 2

    def test_length_mismatch(self):
        c = make_constellation(ConstellationKind.QAM64)
        with pytest.raises(LengthMismatchError):
            map_bits(np.zeros(10, dtype=np.uint8), c)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_map_then_demap_is_identity(self, kind, rng):
        c = make_constellation(kind)
        n = 10_000 - 10_000 % c.bits_per_symbol
        bits = rng.integers(0, 2, n, dtype=np.uint8)
        np.testing.assert_array_equal(demap_symbols(map_bits(bits, c), c), bits)

    def test_demap_nearest_region(self):
        c = make_constellation(ConstellationKind.QPSK)
        np.testing.assert_array_equal(demap_symbols([(0.9 + 0.9j) / SQRT2], c), [0, 0])

    def test_demap_empty(self):
        c = make_constellation(ConstellationKind.QPSK)
        assert len(demap_symbols([], c)) == 0

    def test_noisy_qpsk_at_25db(self, rng):
        c = make_constellation(ConstellationKind.QPSK)
        bits = rng.integers(0, 2, 200_000, dtype=np.uint8)
        sym = map_bits(bits, c)
        sigma = np.sqrt(10 ** (-25 / 10) / 2)
        noisy = sym + sigma * (rng.standard_normal(len(sym)) + 1j * rng.standard_normal(len(sym)))
        errors = np.count_nonzero(demap_symbols(noisy, c) != bits)
        assert errors / len(bits) < 1e-4


class TestRaisedCosine:
    SPS = 8

    @pytest.fixture
    def taps(self):
        return design_rc_filter(1.0, 0.8, float(self.SPS), 16)

    def test_length_and_center(self, taps):
        assert len(taps) == 16 * self.SPS + 1
        assert taps[len(taps) // 2] == pytest.approx(1.0, abs=1e-12)

    def test_nyquist_zero_crossings(self, taps):
        center = len(taps) // 2
        off_center = np.delete(taps[center % self.SPS :: self.SPS], center // self.SPS)
        assert np.max(np.abs(off_center)) < 1e-9

    def test_symmetric(self, taps):
        np.testing.assert_allclose(taps, taps[::-1], atol=1e-15)

    def test_singularity_uses_analytic_limit(self, taps):
        # t = Ts / (2 beta) = 0.625 Ts falls on sample 5 at 8 samples per symbol
        center = len(taps) // 2
        expected = (np.pi / 4) * np.sinc(1 / (2 * 0.8))
        assert taps[center + 5] == pytest.approx(expected, abs=1e-12)
        assert taps[center - 5] == pytest.approx(expected, abs=1e-12)

    def test_invalid_rate(self):
        with pytest.raises(InvalidRateError):
            design_rc_filter(3e6, 0.8, 20e6)


class TestPulseShape:
    def test_single_symbol_is_impulse_response(self, qpsk_cfg):
        shaped = pulse_shape([1 + 0j], qpsk_cfg)
        taps = design_rc_filter(qpsk_cfg.fb, qpsk_cfg.rolloff, qpsk_cfg.fs, qpsk_cfg.span_symbols)
        np.testing.assert_allclose(shaped.samples[: len(taps)], taps, atol=1e-15)
        assert shaped.kind is WaveformKind.BASEBAND_COMPLEX

    def test_symbol_instants_recover_symbols(self, qpsk_cfg):
        frame = make_frame(qpsk_cfg, seed=3)
        shaped = pulse_shape(frame.symbols, qpsk_cfg)
        instants = shaped.first_symbol_index + qpsk_cfg.sps * np.arange(len(frame.symbols))
        np.testing.assert_allclose(shaped.samples[instants], frame.symbols, atol=1e-6)
        assert len(shaped) == len(frame.symbols) * qpsk_cfg.sps + qpsk_cfg.span_symbols * qpsk_cfg.sps

    def test_zero_symbols(self, qpsk_cfg):
        shaped = pulse_shape(np.zeros(20, dtype=complex), qpsk_cfg)
        assert not np.any(shaped.samples)


class TestUpconvert:
    def test_quarter_rate_carrier(self):
        bb = Waveform(np.ones(8, dtype=complex), 4.0, WaveformKind.BASEBAND_COMPLEX)
        np.testing.assert_allclose(upconvert(bb, 1.0).samples, [1, 0, -1, 0, 1, 0, -1, 0], atol=1e-12)

    def test_zero_in_zero_out(self):
        bb = Waveform(np.zeros(16, dtype=complex), 40e6, WaveformKind.BASEBAND_COMPLEX)
        assert not np.any(upconvert(bb, 5e6).samples)

    def test_aliasing_rejected(self):
        bb = Waveform(np.ones(16, dtype=complex), 10e6, WaveformKind.BASEBAND_COMPLEX)
        with pytest.raises(AliasingError):
            upconvert(bb, 5e6, bandwidth=2e6)

    def test_dc_fold_warns(self):
        bb = Waveform(np.ones(16, dtype=complex), 40e6, WaveformKind.BASEBAND_COMPLEX)
        with pytest.warns(RuntimeWarning):
            upconvert(bb, 4e6, bandwidth=9e6)


class TestPacketConfig:
    def test_default_sample_rate(self, qpsk_cfg):
        assert qpsk_cfg.fs == 20e6
        assert qpsk_cfg.sps == 8

    def test_non_integer_rate(self):
        with pytest.raises(InvalidRateError):
            make_cfg(fs=21e6)

    def test_aliasing(self):
        with pytest.raises(AliasingError):
            make_cfg(fs=10e6)


class TestAssemblePacket:
    def test_guards_and_layout(self):
        cfg = make_cfg("64QAM", fc=5e6, fb=5e6, n_train=10, n_payload=10)
        frame = make_frame(cfg, seed=1)
        _, preamble = make_preamble(cfg)
        packet = assemble_packet(frame, cfg, preamble)

        n_pre = len(preamble)
        assert cfg.guard_samples == 40_000
        assert not np.any(packet.samples[n_pre : n_pre + 40_000])
        assert not np.any(packet.samples[-40_000:])
        assert len(packet) == n_pre + 2 * 40_000 + 20 * cfg.sps + cfg.span_symbols * cfg.sps
        assert packet.first_symbol_index == n_pre + 40_000 + cfg.span_symbols * cfg.sps // 2

    def test_full_scale_symbol_count(self):
        cfg = make_cfg(n_train=10_000, n_payload=40_000)
        frame = make_frame(cfg, seed=0)
        assert len(frame.symbols) == 50_000
        assert len(frame.payload_bits) == 80_000

    def test_degenerate_assembly_is_shaped_training(self, qpsk_cfg):
        cfg = make_cfg(n_train=50, n_payload=0, guard_s=0.0)
        frame = make_frame(cfg, seed=9)
        packet = assemble_packet(frame, cfg, None)
        burst = upconvert(pulse_shape(frame.train, cfg), cfg.fc)
        np.testing.assert_allclose(packet.samples, burst.samples, atol=1e-15)

    def test_symbols_belong_to_constellation(self):
        cfg = make_cfg("16QAM", n_train=100, n_payload=100)
        frame = make_frame(cfg, seed=4)
        dist = np.abs(frame.symbols[:, None] - cfg.constellation.points[None, :]).min(axis=1)
        assert dist.max() < 1e-12

    def test_occupied_band(self, qpsk_cfg, rng):
        bits = rng.integers(0, 2, 1000, dtype=np.uint8)
        burst = upconvert(pulse_shape(map_bits(bits, qpsk_cfg.constellation), qpsk_cfg), qpsk_cfg.fc)
        margin = 1.1 * qpsk_cfg.half_bandwidth
        ratio = out_of_band_ratio_db(burst, qpsk_cfg.fc - margin, qpsk_cfg.fc + margin)
        assert ratio < -40


def test_packet_config_rejects_bad_counts():
    with pytest.raises(ConfigError):
        PacketConfig(fc=5e6, fb=2.5e6, constellation=make_constellation(ConstellationKind.QPSK), n_train=0)
