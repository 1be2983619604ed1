#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Experiment Runner

Runs an experiment spec end to end:
1. Builds each row's packet config (desk or full scale)
2. Generates, propagates and decodes every packet of every row
3. Records one result line per packet (failures included)
4. Saves the table as results.csv, results.json and results.html

Experiment spec schema (data/experiments/*.json):

    {
        "name": "table1_desk",
        "scale": "desk",                       # desk | full (alias paper)
        "equalizer": {"n_ff": 24, "n_fb": 12},   # optional EqualizerConfig overrides
        "rows": [
            {
                "label": "rate matrix row 1",
                "channel": "pork_loin",          # preset name or path to a preset-schema file
                "format": "QPSK",
                "fc_hz": 5e6,
                "fb_hz": 2.5e6,
                "preamble": "barker",            # optional, default barker
                "seed": 101,
                "snr_db": 25,                    # optional, overrides the preset
                "packets": 1                     # optional, packet p uses seed + p
            }
        ]
    }
"""

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import pandas as pd

from channel_sim import apply_channel, load_channel_file, preset
from errors import ConfigError, EqualizerDivergenceError, MisalignmentError, ModemError, SyncNotFoundError
from metrics import build_packet_report
from packet_config import config_digest, config_from_dict
from receiver import EqualizerConfig, receive_packet
from report_renderer import render_results_html
from signal_model import assemble_packet, make_frame
from sync import make_preamble
from waveform_io import atomic_write_csv, atomic_write_text

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "row",
    "label",
    "channel",
    "format",
    "fc_hz",
    "fb_hz",
    "data_rate_bps",
    "ber",
    "bit_errors",
    "bits_compared",
    "seed",
    "packet",
    "status",
    "final_mse_db",
    "evm_percent",
    "snr_db",
    "message",
]

# nullable, so failed packets keep empty cells instead of NaN floats
INTEGER_COLUMNS = {"row": "int64", "packet": "int64", "seed": "int64", "bit_errors": "Int64", "bits_compared": "Int64"}

ROW_KEYS = {"label", "channel", "format", "fc_hz", "fb_hz", "preamble", "seed", "snr_db", "packets", "guard_s", "rolloff"}


class Scale(Enum):
    DESK = "desk"
    FULL = "full"

    @classmethod
    def _missing_(cls, value):
        # "paper" is the 10,000 / 40,000 scale under its interface name
        return cls.FULL if value == "paper" else None


class RowStatus(Enum):
    OK = "ok"
    SYNC_FAILURE = "sync_failure"
    DIVERGED = "diverged"
    ERROR = "error"


@dataclass(frozen=True)
class ExperimentRow:
    channel: str
    packet: dict
    seed: int = 0
    snr_db: float = None
    packets: int = 1
    label: str = ""


@dataclass(frozen=True)
class ExperimentSpec:
    rows: tuple = ()
    equalizer: EqualizerConfig = field(default_factory=EqualizerConfig)
    scale: Scale = Scale.DESK
    name: str = "experiment"


def transmit_packet(cfg, seed):
    """
    Build the transmit packet for a config and seed.

    Returns:
        tuple: (SymbolFrame, passband Waveform)
    """
    frame = make_frame(cfg, seed)
    _, preamble_wave = make_preamble(cfg)
    return frame, assemble_packet(frame, cfg, preamble_wave)


def resolve_channel(name, spec_dir=None):
    """Preset name, or a preset-schema JSON file (relative paths resolve against spec_dir)."""
    if name.endswith(".json"):
        path = name if os.path.isabs(name) or spec_dir is None else os.path.join(spec_dir, name)
        return load_channel_file(path)
    return preset(name)


def run_link(cfg, channel, seed, ecfg, extra=None):
    """
    One packet through transmitter, channel and receiver.

    The channel noise is seeded with the packet seed.

    Returns:
        tuple: (PacketReport, PacketReception)
    """
    frame, tx = transmit_packet(cfg, seed)
    rx = apply_channel(tx, channel.replace(seed=seed), band=cfg.band)
    reception = receive_packet(rx, cfg, seed, ecfg)
    digest = config_digest(cfg, seed, extra)
    return build_packet_report(cfg, frame, reception, digest), reception


def _parse_row(data, index):
    if not isinstance(data, dict):
        raise ConfigError(f"rows[{index}]: expected an object")
    unknown = set(data) - ROW_KEYS
    if unknown:
        raise ConfigError(f"rows[{index}].{sorted(unknown)[0]}: unknown row key")
    if "channel" not in data:
        raise ConfigError(f"rows[{index}].channel: missing required key")
    packet = {k: data[k] for k in ("format", "fc_hz", "fb_hz", "preamble", "guard_s", "rolloff") if k in data}
    packets = data.get("packets", 1)
    if not isinstance(packets, int) or packets < 1:
        raise ConfigError(f"rows[{index}].packets: must be a positive integer, got {packets!r}")
    row = ExperimentRow(
        channel=str(data["channel"]),
        packet=packet,
        seed=int(data.get("seed", 0)),
        snr_db=data.get("snr_db"),
        packets=packets,
        label=str(data.get("label", f"row {index + 1}")),
    )
    # surface rate/format errors at load time rather than inside a worker
    try:
        config_from_dict(packet, seed=row.seed)
    except ConfigError as e:
        raise ConfigError(f"rows[{index}]: {e}") from None
    return row


def load_experiment_spec(path, full_scale=False):
    """
    Read an experiment spec file.

    Raises:
        ConfigError: If the file is missing, malformed or a row is invalid
    """
    print(f"Loading experiment spec from {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"experiment spec not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{os.path.basename(path)}: malformed JSON ({e})") from None
    if not isinstance(data, dict):
        raise ConfigError("experiment spec must be a JSON object")

    try:
        scale = Scale(data.get("scale", Scale.DESK.value))
    except ValueError:
        raise ConfigError(f"scale: unknown value {data.get('scale')!r} (expected desk, full or paper)") from None
    if full_scale:
        scale = Scale.FULL
    rows = tuple(_parse_row(row, i) for i, row in enumerate(data.get("rows", [])))
    equalizer = EqualizerConfig.from_dict(data.get("equalizer", {}))
    name = data.get("name", os.path.splitext(os.path.basename(path))[0])
    return ExperimentSpec(rows=rows, equalizer=equalizer, scale=scale, name=name)


def run_row_packet(index, row, packet_index, ecfg, scale, spec_dir=None):
    """
    Decode one packet of one row; modem errors become a status, not an exception.

    Returns:
        dict: One results-table line
    """
    seed = row.seed + packet_index
    result = {
        "row": index + 1,
        "label": row.label,
        "channel": row.channel,
        "format": row.packet.get("format"),
        "fc_hz": row.packet.get("fc_hz"),
        "fb_hz": row.packet.get("fb_hz"),
        "data_rate_bps": None,
        "ber": None,
        "bit_errors": None,
        "bits_compared": None,
        "seed": seed,
        "packet": packet_index,
        "status": RowStatus.OK.value,
        "final_mse_db": None,
        "evm_percent": None,
        "snr_db": row.snr_db,
        "message": "",
    }
    try:
        cfg, _ = config_from_dict(row.packet, full_scale=scale is Scale.FULL, seed=seed)
        result["data_rate_bps"] = cfg.bits_per_symbol * cfg.fb
        channel = resolve_channel(row.channel, spec_dir)
        if row.snr_db is not None:
            channel = channel.replace(snr_db=float(row.snr_db))
        result["snr_db"] = None if math.isinf(channel.snr_db) else channel.snr_db
        extra = {"channel": channel.to_dict(), "equalizer": ecfg.to_dict()}
        report, _ = run_link(cfg, channel, seed, ecfg, extra)
    except (SyncNotFoundError, MisalignmentError) as e:
        result.update(status=RowStatus.SYNC_FAILURE.value, message=str(e))
    except EqualizerDivergenceError as e:
        result.update(status=RowStatus.DIVERGED.value, message=str(e))
    except ModemError as e:
        result.update(status=RowStatus.ERROR.value, message=str(e))
    else:
        result.update(
            ber=report.ber_text,
            bit_errors=report.bit_errors,
            bits_compared=report.bits_compared,
            final_mse_db=report.final_mse_db,
            evm_percent=report.evm_percent,
        )
    print(f"  {row.label} packet {packet_index}: {result['status']} BER {result['ber']}")
    return result


def _run_one(job):
    return run_row_packet(*job)


def run_experiment(spec, out_dir, workers=None, spec_dir=None):
    """
    Run every packet of every row and save the results table.

    Args:
        spec (ExperimentSpec): Parsed experiment spec
        out_dir (str): Output directory for results.{csv,json,html}
        workers (int | None): Process count; 1 runs in-process
        spec_dir (str | None): Directory used to resolve relative channel files

    Returns:
        pd.DataFrame: One line per packet, ordered by row then packet
    """
    os.makedirs(out_dir, exist_ok=True)
    jobs = [
        (i, row, p, spec.equalizer, spec.scale, spec_dir) for i, row in enumerate(spec.rows) for p in range(row.packets)
    ]
    print(f"Running {len(jobs)} packets from {len(spec.rows)} rows ({spec.scale.value} scale)")

    if workers == 1 or len(jobs) <= 1:
        results = [_run_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map preserves submission order, so the table order is fixed
            results = list(pool.map(_run_one, jobs))

    table = pd.DataFrame(results, columns=RESULT_COLUMNS).astype(INTEGER_COLUMNS)
    save_results(table, out_dir, spec.name)
    return table


def save_results(table, out_dir, name):
    """Write results.csv, results.json and results.html."""
    csv_path = atomic_write_csv(table, os.path.join(out_dir, "results.csv"))
    json_text = table.to_json(orient="records", indent=2)
    json_path = atomic_write_text(os.path.join(out_dir, "results.json"), json_text + "\n")
    html_path = render_results_html(table, os.path.join(out_dir, "results.html"), title=name)
    print(f"Saved results to {csv_path}, {json_path} and {html_path}")
    return csv_path, json_path, html_path


def summarize(table):
    """Counts per status plus how many packets decoded without a bit error."""
    counts = table["status"].value_counts().to_dict() if len(table) else {}
    error_free = int((table["bit_errors"] == 0).sum()) if len(table) else 0
    return {"packets": len(table), "error_free": error_free, **counts}

