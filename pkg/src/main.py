#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tissue Acoustic Modem Main Script

Sub-commands:
1. gen         build a packet waveform from a packet config
2. chan        pass a waveform through a channel preset
3. rx          synchronize, equalize and score a received waveform
4. experiment  run a whole experiment spec (e.g. the rate matrix)
5. presets     list the shipped channel presets
"""

# Import required libraries
import argparse  # Library for parsing command-line arguments
import logging  # Library for library-module diagnostics
import os  # Library for operating system functionality
import sys  # Library for stderr and exit codes

# Import custom modules
from channel_sim import add_noise, list_presets, load_channel_file, measure_snr_db, preset, propagate
from errors import ConfigError, ModemError
from experiment import load_experiment_spec, run_experiment, summarize, transmit_packet
from metrics import build_packet_report, compute_spectrogram, data_rate, write_packet_report
from modem_defaults import EQ_N_FB, EQ_N_FF, EXIT_OK
from packet_config import config_digest, load_packet_config
from receiver import EqualizerConfig, receive_packet
from signal_model import make_frame
from sync import make_preamble
from waveform_io import atomic_write_csv, base_path, read_waveform, write_waveform

PREAMBLE_CHOICES = ["barker", "qchirp", "hchirp"]


def cmd_gen(args):
    """
    Generate a packet waveform file pair from a packet config.
    """
    cfg, seed = load_packet_config(args.config, args.full_scale, args.preamble, args.seed)
    frame, tx = transmit_packet(cfg, seed)
    digest = config_digest(cfg, seed)
    rate = data_rate(cfg)

    meta = {
        "data_rate_bps": rate,
        "band_hz": list(cfg.band),
        "config": {**cfg.to_dict(), "seed": seed},
    }
    write_waveform(tx, args.out, config_digest=digest, meta=meta)
    print(f"Packet: {frame.n_train} training + {frame.n_payload} payload {cfg.constellation.kind.value} symbols")
    print(f"Data rate: {rate / 1e6:g} Mb/s (raw, before FEC)")

    if args.spectrogram:
        spectrogram_path = base_path(args.out) + "_spectrogram.csv"
        atomic_write_csv(compute_spectrogram(tx), spectrogram_path)
        print(f"Saved spectrogram data to {spectrogram_path}")

    if args.template_out:
        _, template = make_preamble(cfg)
        write_waveform(template, args.template_out, config_digest=digest, meta={"preamble": cfg.preamble.value})
    return EXIT_OK


def cmd_chan(args):
    """
    Apply a channel preset (or preset-schema file) to a waveform file pair.
    """
    tx, sidecar = read_waveform(args.input)
    if args.preset_file:
        channel = load_channel_file(args.preset_file)
    else:
        channel = preset(args.preset)
    if args.seed is not None:
        channel = channel.replace(seed=args.seed)
    if args.snr_db is not None:
        channel = channel.replace(snr_db=args.snr_db)

    band = tuple(sidecar["band_hz"]) if sidecar.get("band_hz") else None
    print(f"Applying channel {channel.name} to {args.input}")
    clean = propagate(tx, channel)
    rx = add_noise(clean, channel.snr_db, channel.seed, band)

    meta = {k: v for k, v in sidecar.items() if k not in ("fs_hz", "kind", "first_symbol_index", "config_digest")}
    meta["channel"] = channel.to_dict()
    write_waveform(rx, args.out, config_digest=sidecar.get("config_digest"), meta=meta)
    if rx is not clean:
        snr = measure_snr_db(clean.samples, rx.samples, rx.fs, band)
        print(f"Measured in-band SNR: {snr:.2f} dB")
    return EXIT_OK


def cmd_rx(args):
    """
    Decode a received waveform and write report.json, mse_trace.csv and constellation.csv.
    """
    rx, _ = read_waveform(args.input)
    cfg, seed = load_packet_config(args.config, args.full_scale, args.preamble, args.seed)
    if rx.fs != cfg.fs:
        raise ConfigError(f"fs_hz: waveform is sampled at {rx.fs:g} Hz but the config expects {cfg.fs:g} Hz")
    ecfg = EqualizerConfig(n_ff=args.n_ff, n_fb=args.n_fb)

    reception = receive_packet(rx, cfg, seed, ecfg)
    frame = make_frame(cfg, seed)
    digest = config_digest(cfg, seed, {"equalizer": ecfg.to_dict()})
    report = build_packet_report(cfg, frame, reception, digest)
    paths = write_packet_report(report, reception.records, args.out_dir)

    print(f"Sync: start sample {reception.sync.start_sample}, peak {reception.sync.peak_metric:.3f}")
    print(f"BER: {report.ber_text} ({report.bit_errors} errors in {report.bits_compared} bits)")
    print(f"Saved report to {paths['report']}")
    return EXIT_OK


def cmd_experiment(args):
    """
    Run every row of an experiment spec and save the results table.
    """
    spec = load_experiment_spec(args.spec, full_scale=args.full_scale)
    table = run_experiment(spec, args.out_dir, workers=args.workers, spec_dir=os.path.dirname(os.path.abspath(args.spec)))
    summary = summarize(table)
    print(", ".join(f"{key}: {value}" for key, value in summary.items()))
    return EXIT_OK


def cmd_presets(args):
    """
    List shipped channel presets.
    """
    for name in list_presets():
        model = preset(name)
        flag = " [non-authoritative]" if model.non_authoritative else ""
        print(f"{name}: {model.description}{flag}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(description="Passband QAM acoustic modem: generate, propagate, decode")
    parser.add_argument("--verbose", action="store_true", help="Show debug logging from the modem modules")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="Generate a packet waveform")
    gen.add_argument("config", help="Packet config JSON")
    gen.add_argument("--out", required=True, help="Output waveform base path")
    gen.add_argument("--seed", type=int, default=None, help="Override the config seed")
    gen.add_argument(
        "--paper-scale",
        "--full-scale",
        dest="full_scale",
        action="store_true",
        help="10,000 training / 40,000 payload symbols",
    )
    gen.add_argument("--preamble", choices=PREAMBLE_CHOICES, default=None, help="Override the config preamble")
    gen.add_argument("--spectrogram", action="store_true", help="Also write <out>_spectrogram.csv")
    gen.add_argument("--template-out", default=None, help="Also write the preamble template waveform")
    gen.set_defaults(func=cmd_gen)

    chan = commands.add_parser("chan", help="Apply a channel model")
    chan.add_argument("input", help="Input waveform base path")
    source = chan.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", help="Channel preset name")
    source.add_argument("--preset-file", help="Channel description JSON with the preset schema")
    chan.add_argument("--out", required=True, help="Output waveform base path")
    chan.add_argument("--seed", type=int, default=None, help="Noise seed")
    chan.add_argument("--snr-db", type=float, default=None, help="Override the preset SNR")
    chan.set_defaults(func=cmd_chan)

    rx = commands.add_parser("rx", help="Decode a received waveform")
    rx.add_argument("input", help="Received waveform base path")
    rx.add_argument("--config", required=True, help="Packet config JSON used to generate it")
    rx.add_argument("--out-dir", default="data/reports", help="Directory for report.json and CSVs")
    rx.add_argument("--seed", type=int, default=None, help="Override the config seed")
    rx.add_argument(
        "--paper-scale",
        "--full-scale",
        dest="full_scale",
        action="store_true",
        help="10,000 training / 40,000 payload symbols",
    )
    rx.add_argument("--preamble", choices=PREAMBLE_CHOICES, default=None, help="Override the config preamble")
    rx.add_argument("--n-ff", type=int, default=EQ_N_FF, help="Feedforward taps (<= 40)")
    rx.add_argument("--n-fb", type=int, default=EQ_N_FB, help="Feedback taps (<= 40)")
    rx.set_defaults(func=cmd_rx)

    experiment = commands.add_parser("experiment", help="Run an experiment spec")
    experiment.add_argument("spec", help="Experiment spec JSON")
    experiment.add_argument("--out-dir", default="data/results", help="Directory for results.{csv,json,html}")
    experiment.add_argument(
        "--paper-scale",
        "--full-scale",
        dest="full_scale",
        action="store_true",
        help="10,000 training / 40,000 payload symbols",
    )
    experiment.add_argument("--workers", type=int, default=None, help="Worker processes (1 runs in-process)")
    experiment.set_defaults(func=cmd_experiment)

    presets = commands.add_parser("presets", help="Channel presets")
    presets.add_argument("action", choices=["list"])
    presets.set_defaults(func=cmd_presets)
    return parser


def main(argv=None):
    """
    Parse arguments, run the sub-command, and map modem errors to exit codes.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ModemError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    """
    Execute the main function when the script is run directly.

    Example usage:
    uv run src/main.py gen data/configs/rate_row5.json --out data/waveforms/row5
    """
    sys.exit(main())
