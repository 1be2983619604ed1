"""
Exception hierarchy for the modem chain.

Every error carries the CLI exit code it maps to, so main.py can report it
without a lookup table of its own.
"""

from modem_defaults import EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_IO, EXIT_SYNC


class ModemError(Exception):
    """Base class for all errors raised by the modem chain."""

    exit_code = 1


class ConfigError(ModemError):
    """Invalid configuration value or file."""

    exit_code = EXIT_CONFIG


class LengthMismatchError(ConfigError):
    """Sequence lengths do not agree (bit groups, BER inputs)."""


class InvalidRateError(ConfigError):
    """Sample rate is not an integer multiple of the symbol rate."""


class AliasingError(ConfigError):
    """Sample rate too low for the passband signal."""


class InvalidBandError(ConfigError):
    """Frequency band unusable for the requested waveform."""


class UnknownPresetError(ConfigError):
    """No channel preset with the requested name."""


class ChannelConfigError(ConfigError):
    """Channel model parameters violate their invariants."""


class SyncNotFoundError(ModemError):
    """Preamble correlation peak below the detection threshold."""

    exit_code = EXIT_SYNC


class MisalignmentError(ModemError):
    """Symbol timing points outside the received waveform."""

    exit_code = EXIT_SYNC


class EqualizerDivergenceError(ModemError):
    """Equalizer lost lock during decision-directed operation."""

    exit_code = EXIT_DIVERGENCE

    def __init__(self, message, symbol_index=None):
        super().__init__(message)
        self.symbol_index = symbol_index


class RlsNumericalError(EqualizerDivergenceError):
    """Inverse correlation matrix lost positive definiteness."""


class WaveformIOError(ModemError):
    """Waveform file pair missing, unreadable, or inconsistent."""

    exit_code = EXIT_IO
