#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Waveform File Pairs

A waveform is stored as two files sharing a base name:
    <name>.f32   raw little-endian float32 samples (baseband: interleaved re, im)
    <name>.json  sidecar with fs_hz, kind, first_symbol_index, config_digest
                 and any extra metadata

Every file is written to a temporary name first and then renamed into place.
"""

import json
import os
import tempfile

import numpy as np

from errors import WaveformIOError
from signal_model import Waveform, WaveformKind

SAMPLE_DTYPE = np.dtype("<f4")


def base_path(path):
    """Strip a .f32 or .json extension so either file of the pair names it."""
    root, ext = os.path.splitext(path)
    return root if ext in (".f32", ".json") else path


def _atomic_write(path, write_fn, mode):
    # Ensure the target directory exists
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({} if "b" in mode else {"encoding": "utf-8", "newline": ""})) as f:
            write_fn(f)
        os.replace(tmp_path, path)
    except OSError as e:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise WaveformIOError(f"could not write {path}: {e}") from e
    return os.path.abspath(path)


def atomic_write_text(path, text):
    """Write text via temp file + rename. Returns the absolute path."""
    return _atomic_write(path, lambda f: f.write(text), "w")


def atomic_write_bytes(path, data):
    return _atomic_write(path, lambda f: f.write(data), "wb")


def atomic_write_json(path, obj):
    """Deterministic JSON (sorted keys, fixed indent) via temp file + rename."""
    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def atomic_write_csv(df, path, header_comment=None):
    """Write a DataFrame as CSV, optionally preceded by a '# ...' comment line."""
    text = df.to_csv(index=False, lineterminator="\n")
    if header_comment:
        text = f"# {header_comment}\n{text}"
    return atomic_write_text(path, text)


def write_waveform(wave, path, config_digest=None, meta=None):
    """
    Save a waveform file pair.

    Args:
        wave (Waveform): Waveform to save
        path (str): Base name (extension optional)
        config_digest (str | None): Digest of the configuration that produced it
        meta (dict | None): Extra sidecar fields

    Returns:
        str: Absolute base path of the pair
    """
    base = base_path(path)
    samples = np.asarray(wave.samples)
    if wave.kind is WaveformKind.BASEBAND_COMPLEX:
        interleaved = np.empty(2 * len(samples), dtype=SAMPLE_DTYPE)
        interleaved[0::2] = samples.real
        interleaved[1::2] = samples.imag
        raw = interleaved.tobytes()
    else:
        raw = np.asarray(samples, dtype=SAMPLE_DTYPE).tobytes()

    sidecar = {
        "fs_hz": wave.fs,
        "kind": wave.kind.value,
        "first_symbol_index": wave.first_symbol_index,
        "config_digest": config_digest,
    }
    for key, value in (meta or {}).items():
        sidecar.setdefault(key, value)

    atomic_write_bytes(base + ".f32", raw)
    atomic_write_json(base + ".json", sidecar)
    print(f"Saved waveform ({len(samples)} samples at {wave.fs / 1e6:g} MHz) to {base}.f32")
    return os.path.abspath(base)


def read_waveform(path):
    """
    Load a waveform file pair.

    Returns:
        tuple: (Waveform, sidecar dict)

    Raises:
        WaveformIOError: If either file is missing, unreadable or inconsistent
    """
    base = base_path(path)
    try:
        with open(base + ".json", "r", encoding="utf-8") as f:
            sidecar = json.load(f)
        raw = np.fromfile(base + ".f32", dtype=SAMPLE_DTYPE)
    except FileNotFoundError as e:
        raise WaveformIOError(f"waveform file missing: {e.filename}") from None
    except (OSError, json.JSONDecodeError) as e:
        raise WaveformIOError(f"could not read waveform {base}: {e}") from None

    try:
        kind = WaveformKind(sidecar["kind"])
        fs = float(sidecar["fs_hz"])
    except (KeyError, ValueError, TypeError) as e:
        raise WaveformIOError(f"{base}.json: malformed sidecar ({e})") from None

    if kind is WaveformKind.BASEBAND_COMPLEX:
        if len(raw) % 2:
            raise WaveformIOError(f"{base}.f32: odd float count for interleaved baseband")
        samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
    else:
        samples = raw.astype(np.float64)

    first = sidecar.get("first_symbol_index")
    return Waveform(samples, fs, kind, first_symbol_index=first), sidecar
