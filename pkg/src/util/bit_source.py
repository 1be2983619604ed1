"""
Deterministic bit source (splitmix64).

Bits are taken MSB-first from each 64-bit output so test vectors can be
reproduced bit-exactly outside Python.
"""

import numpy as np

GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
MIX_2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed, count):
    """
    Generate `count` consecutive splitmix64 outputs.

    Args:
        seed (int): Initial 64-bit state
        count (int): Number of outputs

    Returns:
        np.ndarray: uint64 outputs, in generation order
    """
    # state_i = seed + i * gamma (mod 2^64), i = 1..count
    steps = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.full(count, seed & 0xFFFFFFFFFFFFFFFF, dtype=np.uint64) + steps * GOLDEN_GAMMA
        z = (z ^ (z >> np.uint64(30))) * MIX_1
        z = (z ^ (z >> np.uint64(27))) * MIX_2
        z = z ^ (z >> np.uint64(31))
    return z


def splitmix64_bits(seed, n_bits):
    """
    Draw `n_bits` bits from splitmix64, MSB first from each output word.

    Args:
        seed (int): Initial 64-bit state
        n_bits (int): Number of bits required

    Returns:
        np.ndarray: uint8 array of 0/1 values
    """
    n_words = -(-n_bits // 64)
    words = splitmix64(seed, n_words)
    # big-endian bytes so unpackbits yields the MSB of each word first
    bits = np.unpackbits(words.astype(">u8").view(np.uint8))
    return bits[:n_bits]
