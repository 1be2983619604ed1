"""
Packet configuration files.

A packet config is a JSON object:

    {
        "format": "64QAM",          # QPSK | 8PSK | 16QAM | 64QAM
        "fc_hz": 5e6,
        "fb_hz": 5e6,
        "preamble": "barker",       # barker | qchirp | hchirp
        "n_train": 1000,
        "n_payload": 4000,
        "guard_s": 0.001,
        "rolloff": 0.8,
        "fs_hz": 40e6,              # optional, defaults to 8 * fb_hz
        "span_symbols": 16,         # optional
        "seed": 5
    }

Only format, fc_hz and fb_hz are required. Any other key is rejected.
"""

import hashlib
import json
import logging
import os

from errors import ConfigError
from modem_defaults import DESK_N_PAYLOAD, DESK_N_TRAIN, GUARD_S, FULL_N_PAYLOAD, FULL_N_TRAIN, RC_ROLLOFF, RC_SPAN_SYMBOLS
from signal_model import ConstellationKind, PacketConfig, PreambleKind, make_constellation

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("format", "fc_hz", "fb_hz")
OPTIONAL_KEYS = {
    "preamble": PreambleKind.BARKER13.value,
    "n_train": DESK_N_TRAIN,
    "n_payload": DESK_N_PAYLOAD,
    "guard_s": GUARD_S,
    "rolloff": RC_ROLLOFF,
    "fs_hz": None,
    "span_symbols": RC_SPAN_SYMBOLS,
    "seed": 0,
}


def _parse_enum(enum_cls, value, key):
    try:
        return enum_cls(value)
    except ValueError:
        choices = ", ".join(member.value for member in enum_cls)
        raise ConfigError(f"{key}: unknown value {value!r} (expected one of {choices})") from None


def _as_number(value, key, cast=float):
    # bool is an int subclass; a config saying "n_train": true is a mistake
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if cast is int and float(value) != int(value):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    return cast(value)


def config_from_dict(data, full_scale=False, preamble=None, seed=None):
    """
    Build a PacketConfig and its seed from a parsed config object.

    Args:
        data (dict): Parsed JSON object
        full_scale (bool): Use the 10,000 / 40,000 symbol split
        preamble (str | None): Override for the preamble key
        seed (int | None): Override for the seed key

    Returns:
        tuple: (PacketConfig, seed)

    Raises:
        ConfigError: Naming the offending key
    """
    if not isinstance(data, dict):
        raise ConfigError("packet config must be a JSON object")

    for key in data:
        if key not in REQUIRED_KEYS and key not in OPTIONAL_KEYS:
            raise ConfigError(f"{key}: unknown config key")
    for key in REQUIRED_KEYS:
        if key not in data:
            raise ConfigError(f"{key}: missing required config key")

    values = {**OPTIONAL_KEYS, **data}
    if preamble is not None:
        values["preamble"] = preamble
    if seed is not None:
        values["seed"] = seed
    if full_scale:
        values["n_train"] = FULL_N_TRAIN
        values["n_payload"] = FULL_N_PAYLOAD

    kind = _parse_enum(ConstellationKind, values["format"], "format")
    fs = None if values["fs_hz"] is None else _as_number(values["fs_hz"], "fs_hz")
    cfg = PacketConfig(
        fc=_as_number(values["fc_hz"], "fc_hz"),
        fb=_as_number(values["fb_hz"], "fb_hz"),
        constellation=make_constellation(kind),
        preamble=_parse_enum(PreambleKind, values["preamble"], "preamble"),
        n_train=_as_number(values["n_train"], "n_train", int),
        n_payload=_as_number(values["n_payload"], "n_payload", int),
        guard_s=_as_number(values["guard_s"], "guard_s"),
        rolloff=_as_number(values["rolloff"], "rolloff"),
        fs=fs,
        span_symbols=_as_number(values["span_symbols"], "span_symbols", int),
    )
    seed_value = _as_number(values["seed"], "seed", int)
    if seed_value < 0:
        raise ConfigError(f"seed: must be non-negative, got {seed_value}")
    return cfg, seed_value


def load_packet_config(path, full_scale=False, preamble=None, seed=None):
    """
    Read a packet config JSON file.

    Returns:
        tuple: (PacketConfig, seed)
    """
    print(f"Loading packet config from {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{os.path.basename(path)}: malformed JSON ({e})") from None
    return config_from_dict(data, full_scale=full_scale, preamble=preamble, seed=seed)


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_digest(cfg, seed=None, extra=None):
    """
    Stable 16-hex-digit digest of a packet configuration.

    Args:
        cfg (PacketConfig): Packet configuration
        seed (int | None): Packet seed, included when given
        extra (dict | None): Further settings that shape the result (e.g. channel, equalizer)

    Returns:
        str: First 16 hex characters of SHA-256 over canonical JSON
    """
    payload = {"packet": cfg.to_dict()}
    if seed is not None:
        payload["seed"] = seed
    if extra:
        payload["extra"] = extra
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()[:16]
