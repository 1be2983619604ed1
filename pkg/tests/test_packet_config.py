"""Tests for packet config parsing and digests."""

import json
import os

import pytest

from conftest import CONFIG_DIR
from errors import ConfigError, InvalidRateError
from packet_config import config_digest, config_from_dict, load_packet_config
from signal_model import ConstellationKind, PreambleKind

MINIMAL = {"format": "64QAM", "fc_hz": 5e6, "fb_hz": 5e6}


class TestConfigFromDict:
    def test_defaults(self):
        cfg, seed = config_from_dict(MINIMAL)
        assert cfg.constellation.kind is ConstellationKind.QAM64
        assert (cfg.n_train, cfg.n_payload) == (1000, 4000)
        assert cfg.fs == 40e6
        assert cfg.preamble is PreambleKind.BARKER13
        assert cfg.guard_s == 1e-3
        assert cfg.rolloff == 0.8
        assert seed == 0

    def test_full_scale(self):
        cfg, _ = config_from_dict(MINIMAL, full_scale=True)
        assert (cfg.n_train, cfg.n_payload) == (10_000, 40_000)

    def test_overrides(self):
        cfg, seed = config_from_dict({**MINIMAL, "seed": 4}, preamble="hchirp", seed=9)
        assert cfg.preamble is PreambleKind.HYPERBOLIC_UP_DOWN
        assert seed == 9

    @pytest.mark.parametrize(
        "data, key",
        [
            ({**MINIMAL, "colour": "red"}, "colour"),
            ({"format": "QPSK", "fb_hz": 5e6}, "fc_hz"),
            ({**MINIMAL, "format": "256QAM"}, "format"),
            ({**MINIMAL, "preamble": "zadoff"}, "preamble"),
            ({**MINIMAL, "n_train": 10.5}, "n_train"),
            ({**MINIMAL, "n_payload": True}, "n_payload"),
            ({**MINIMAL, "seed": -1}, "seed"),
        ],
    )
    def test_errors_name_the_key(self, data, key):
        with pytest.raises(ConfigError, match=key):
            config_from_dict(data)

    def test_invalid_rate(self):
        with pytest.raises(InvalidRateError):
            config_from_dict({**MINIMAL, "fs_hz": 41e6})

    def test_not_an_object(self):
        with pytest.raises(ConfigError):
            config_from_dict([1, 2, 3])


class TestLoadPacketConfig:
    def test_table_i_row_5(self):
        cfg, seed = load_packet_config(os.path.join(CONFIG_DIR, "rate_row5.json"))
        assert cfg.constellation.kind is ConstellationKind.QAM64
        assert (cfg.fc, cfg.fb) == (5e6, 5e6)
        assert seed == 105

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_packet_config(str(tmp_path / "nope.json"))

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{format: 64QAM")
        with pytest.raises(ConfigError, match="malformed"):
            load_packet_config(str(path))


class TestDigest:
    def test_stable_and_short(self):
        cfg, _ = config_from_dict(MINIMAL)
        digest = config_digest(cfg, 1)
        assert digest == config_digest(config_from_dict(json.loads(json.dumps(MINIMAL)))[0], 1)
        assert len(digest) == 16
        int(digest, 16)

    def test_sensitive_to_seed_and_extra(self):
        cfg, _ = config_from_dict(MINIMAL)
        assert config_digest(cfg, 1) != config_digest(cfg, 2)
        assert config_digest(cfg, 1) != config_digest(cfg, 1, {"channel": "pork_loin"})
