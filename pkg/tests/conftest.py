"""Shared fixtures for the modem test suite."""

import os

import numpy as np
import pytest

from signal_model import ConstellationKind, PacketConfig, make_constellation

REPO_ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..")
CONFIG_DIR = os.path.join(REPO_ROOT, "data", "configs")
EXPERIMENT_DIR = os.path.join(REPO_ROOT, "data", "experiments")


def make_cfg(fmt="QPSK", fc=5e6, fb=2.5e6, **kwargs):
    """PacketConfig with desk-scale defaults."""
    return PacketConfig(fc=fc, fb=fb, constellation=make_constellation(ConstellationKind(fmt)), **kwargs)


@pytest.fixture
def qpsk_cfg():
    """QPSK at fc=5 MHz, fb=2.5 MHz (fs=20 MHz), 1,000 training / 4,000 payload symbols."""
    return make_cfg()


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
