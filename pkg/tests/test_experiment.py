"""Tests for experiment specs and the results table."""

import json
import os

import pandas as pd
import pytest

from channel_sim import preset
from conftest import CONFIG_DIR, EXPERIMENT_DIR
from errors import ConfigError
from experiment import (
    RESULT_COLUMNS,
    ExperimentRow,
    ExperimentSpec,
    RowStatus,
    Scale,
    load_experiment_spec,
    run_experiment,
    run_link,
    summarize,
)
from metrics import mse_window_db
from packet_config import config_from_dict, load_packet_config
from receiver import EqualizerConfig
from report_renderer import render_results_html

IDEAL_ROW = {"format": "QPSK", "fc_hz": 5e6, "fb_hz": 2.5e6}


def _spec(*rows, **kwargs):
    return ExperimentSpec(rows=tuple(rows), **kwargs)


class TestLoadSpec:
    def test_desk_matrix(self):
        spec = load_experiment_spec(os.path.join(EXPERIMENT_DIR, "table1_desk.json"))
        assert len(spec.rows) == 10
        assert spec.scale is Scale.DESK
        assert spec.equalizer == EqualizerConfig(n_ff=24, n_fb=12)
        assert [row.channel for row in spec.rows].count("pork_loin") == 6
        assert all(row.snr_db >= 25 for row in spec.rows)

    def test_full_scale_flag(self):
        spec = load_experiment_spec(os.path.join(EXPERIMENT_DIR, "table1_desk.json"), full_scale=True)
        assert spec.scale is Scale.FULL

    @pytest.mark.parametrize("name", ["full", "paper"])
    def test_full_scale_names(self, tmp_path, name):
        path = tmp_path / "spec.json"
        path.write_text(json.dumps({"scale": name, "rows": []}))
        assert load_experiment_spec(str(path)).scale is Scale.FULL

    def test_low_snr_spec(self):
        spec = load_experiment_spec(os.path.join(EXPERIMENT_DIR, "beef_liver_low_snr.json"))
        assert len(spec.rows) == 1
        assert spec.rows[0].channel == "beef_liver"
        assert spec.rows[0].snr_db < 25

    def test_invalid_row_is_named(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"rows": [{"channel": "ideal", "format": "QPSK", "fc_hz": 5e6, "fb_hz": 3e6}]}))
        with pytest.raises(ConfigError, match=r"rows\[0\]"):
            load_experiment_spec(str(path))

    def test_unknown_row_key(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"rows": [{**IDEAL_ROW, "channel": "ideal", "colour": "red"}]}))
        with pytest.raises(ConfigError, match="colour"):
            load_experiment_spec(str(path))

    def test_unknown_scale(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"scale": "huge", "rows": []}))
        with pytest.raises(ConfigError, match="scale"):
            load_experiment_spec(str(path))


class TestRunExperiment:
    def test_empty_spec(self, tmp_path):
        spec = load_experiment_spec(os.path.join(EXPERIMENT_DIR, "empty.json"))
        table = run_experiment(spec, str(tmp_path))
        assert table.empty
        assert list(table.columns) == RESULT_COLUMNS
        for name in ("results.csv", "results.json", "results.html"):
            assert (tmp_path / name).exists()
        assert summarize(table) == {"packets": 0, "error_free": 0}

    def test_packets_use_consecutive_seeds(self, tmp_path):
        row = ExperimentRow(channel="ideal", packet=IDEAL_ROW, seed=40, packets=2, label="ideal QPSK")
        table = run_experiment(_spec(row), str(tmp_path), workers=1)
        assert list(table["seed"]) == [40, 41]
        assert list(table["packet"]) == [0, 1]
        assert list(table["status"]) == [RowStatus.OK.value] * 2
        assert list(table["bit_errors"]) == [0, 0]
        assert table["data_rate_bps"].tolist() == [5e6, 5e6]
        assert table["ber"].str.startswith("< ").all()

    def test_failures_are_recorded(self, tmp_path):
        rows = (
            ExperimentRow(channel="seawater", packet=IDEAL_ROW, seed=1, label="missing preset"),
            ExperimentRow(channel="ideal", packet=IDEAL_ROW, seed=2, label="ideal"),
        )
        table = run_experiment(_spec(*rows), str(tmp_path), workers=1)
        assert list(table["status"]) == [RowStatus.ERROR.value, RowStatus.OK.value]
        assert "seawater" in table["message"].iloc[0]
        assert pd.isna(table["bit_errors"].iloc[0])

        saved = pd.read_csv(tmp_path / "results.csv")
        assert list(saved.columns) == RESULT_COLUMNS
        with open(tmp_path / "results.json", encoding="utf-8") as f:
            assert json.load(f)[0]["bit_errors"] is None

    def test_relative_channel_file(self, tmp_path):
        (tmp_path / "quiet.json").write_text(json.dumps({"name": "quiet", "snr_db": 40}))
        row = ExperimentRow(channel="quiet.json", packet=IDEAL_ROW, seed=3)
        table = run_experiment(_spec(row), str(tmp_path / "out"), workers=1, spec_dir=str(tmp_path))
        assert table["status"].iloc[0] == RowStatus.OK.value
        assert table["snr_db"].iloc[0] == 40


def test_html_marks_failed_rows(tmp_path):
    table = pd.DataFrame(
        [
            {"row": 1, "channel": "pork_loin", "format": "QPSK", "fc_hz": 5e6, "fb_hz": 2.5e6, "data_rate_bps": 5e6,
             "ber": "< 1.25E-4", "seed": 1, "packet": 0, "status": "ok", "final_mse_db": -30.0, "evm_percent": 3.0,
             "message": ""},
            {"row": 2, "channel": "beef_liver", "format": "64QAM", "fc_hz": 5e6, "fb_hz": 5e6, "data_rate_bps": 30e6,
             "ber": None, "seed": 2, "packet": 0, "status": "diverged", "final_mse_db": None, "evm_percent": None,
             "message": "lost lock"},
        ]
    )
    path = render_results_html(table, str(tmp_path / "r.html"), title="demo")
    with open(path, encoding="utf-8") as f:
        html = f.read()
    assert "&lt; 1.25E-4" in html
    assert 'class="failed"' in html
    assert "30Mb/s" in html


def _desk_rows():
    return load_experiment_spec(os.path.join(EXPERIMENT_DIR, "table1_desk.json")).rows


@pytest.mark.slow
class TestDeskMatrix:
    @pytest.fixture(scope="class")
    def results(self, tmp_path_factory):
        spec = load_experiment_spec(os.path.join(EXPERIMENT_DIR, "table1_desk.json"))
        out = tmp_path_factory.mktemp("desk_matrix")
        return run_experiment(spec, str(out)), out

    def test_tissue_rows_error_free(self, results):
        table, _ = results
        assert (table["status"] == RowStatus.OK.value).all()
        assert (table["bit_errors"] == 0).all()
        assert table["ber"].str.startswith("< ").all()

    def test_rate_column(self, results):
        table, _ = results
        assert (table["data_rate_bps"] / 1e6).tolist() == [5, 10, 15, 20, 30, 30, 5, 15, 10, 20]

    def test_rerun_is_byte_identical(self, results, tmp_path):
        _, out = results
        spec = load_experiment_spec(os.path.join(EXPERIMENT_DIR, "table1_desk.json"))
        run_experiment(spec, str(tmp_path), workers=1)
        for name in ("results.csv", "results.json"):
            assert (tmp_path / name).read_bytes() == (out / name).read_bytes()

    @pytest.mark.parametrize("index", range(10))
    def test_training_mse_falls(self, index):
        row = _desk_rows()[index]
        cfg, _ = config_from_dict(row.packet, seed=row.seed)
        channel = preset(row.channel).replace(snr_db=float(row.snr_db))
        _, reception = run_link(cfg, channel, row.seed, EqualizerConfig(n_ff=24, n_fb=12))
        assert mse_window_db(reception.records, 500, 1000) < mse_window_db(reception.records, 0, 500)


@pytest.mark.slow
def test_low_snr_row_fails(tmp_path):
    spec = load_experiment_spec(os.path.join(EXPERIMENT_DIR, "beef_liver_low_snr.json"))
    row = run_experiment(spec, str(tmp_path), workers=1).iloc[0]
    assert row["status"] != RowStatus.OK.value or row["bit_errors"] > 0


@pytest.mark.slow
def test_water_120m_decodes_with_residual_errors(tmp_path):
    spec = load_experiment_spec(os.path.join(EXPERIMENT_DIR, "water_120m.json"))
    table = run_experiment(spec, str(tmp_path), workers=1)
    assert list(table["status"]) == [RowStatus.OK.value] * 2
    assert table["data_rate_bps"].tolist() == [120e6, 120e6]
    raw_ber = table["bit_errors"] / table["bits_compared"]
    assert ((raw_ber > 0) & (raw_ber < 1e-2)).all()


def test_tissue_64qam_full_rate_error_free():
    cfg, seed = load_packet_config(os.path.join(CONFIG_DIR, "rate_row5.json"))
    channel = preset("pork_loin").replace(snr_db=25.0)
    report, _ = run_link(cfg, channel, seed, EqualizerConfig(n_ff=24, n_fb=12))
    assert report.bits_compared == 24_000
    assert report.bit_errors == 0


def test_hyperbolic_chirp_through_tissue():
    cfg, _ = config_from_dict({**IDEAL_ROW, "preamble": "hchirp"}, seed=31)
    channel = preset("pork_loin").replace(snr_db=30.0, doppler_factor=1.0005)
    report, reception = run_link(cfg, channel, 31, EqualizerConfig(n_ff=24, n_fb=12))
    assert reception.sync.doppler_factor == pytest.approx(1.0005, abs=1e-4)
    assert report.bit_errors / report.bits_compared < 1e-2


@pytest.mark.parametrize("row", range(1, 12))
def test_rate_matrix_loopback_error_free(row):
    cfg, seed = load_packet_config(os.path.join(CONFIG_DIR, f"rate_row{row}.json"))
    report, reception = run_link(cfg, preset("ideal"), seed, EqualizerConfig(n_ff=24, n_fb=12))
    assert report.bit_errors == 0
    assert report.bits_compared == cfg.n_payload * cfg.bits_per_symbol
    assert abs(reception.sync.doppler_factor - 1.0) < 1e-4
