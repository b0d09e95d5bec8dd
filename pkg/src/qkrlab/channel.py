"""
Bit/basis-level qubit channel.

A qubit is a (basis, bit) pair. Measuring in the preparation basis returns
the bit; measuring in any other basis returns a uniform bit, since Z, X and
Y are pairwise mutually unbiased. Channel noise is a logical bit flip with
probability ``qber``, and an intercept-resend eavesdropper may measure and
re-prepare a fraction of the qubits first.

The ``*_batch`` functions operate on numpy arrays of basis codes and bits;
the scalar helpers wrap them for single qubits.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import numpy as np


class Basis(IntEnum):
    Z = 0
    X = 1
    Y = 2


@dataclass(frozen=True)
class PreparedQubit:
    basis: Basis
    bit: int


@dataclass(frozen=True)
class InterceptResend:
    """Eve intercepts each qubit with probability ``fraction`` and measures it
    in a basis drawn uniformly from the first ``num_bases`` of Z, X, Y."""

    fraction: float = 1.0
    num_bases: int = 2

    def __post_init__(self) -> None:
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"intercept fraction {self.fraction} outside [0, 1]")
        if self.num_bases not in (2, 3):
            raise ValueError("eavesdropper basis set must have 2 or 3 bases")


@dataclass(frozen=True)
class ChannelModel:
    qber: float = 0.0
    eavesdropper: Optional[InterceptResend] = None

    def __post_init__(self) -> None:
        # qber > 0.5 is accepted for tests of the flip mechanics
        if not 0.0 <= self.qber <= 1.0:
            raise ValueError(f"qber {self.qber} outside [0, 1]")


def prepare(bit: int, basis: Basis) -> PreparedQubit:
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    return PreparedQubit(Basis(basis), int(bit))


def measure_batch(
    bases: np.ndarray, bits: np.ndarray, meas_bases: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Outcomes of measuring qubits (bases, bits) in ``meas_bases``."""
    bases = np.asarray(bases)
    bits = np.asarray(bits, dtype=np.uint8)
    coin = rng.integers(0, 2, size=bits.shape, dtype=np.uint8)
    return np.where(np.asarray(meas_bases) == bases, bits, coin).astype(np.uint8)


def transmit_batch(
    bases: np.ndarray, bits: np.ndarray, ch: ChannelModel, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """
    Send qubits through ``ch``; returns the (bases, bits) that arrive.

    Draw order is fixed (eavesdropper draws first, then noise), so the
    output is a deterministic function of the stream state and batch size.
    """
    bases = np.asarray(bases, dtype=np.uint8).copy()
    bits = np.asarray(bits, dtype=np.uint8).copy()
    n = bits.shape[0]
    eve = ch.eavesdropper
    if eve is not None:
        hit = rng.random(n) < eve.fraction
        eve_bases = rng.integers(0, eve.num_bases, size=n, dtype=np.uint8)
        eve_bits = measure_batch(bases, bits, eve_bases, rng)
        bases = np.where(hit, eve_bases, bases).astype(np.uint8)
        bits = np.where(hit, eve_bits, bits).astype(np.uint8)
    flip = rng.random(n) < ch.qber
    bits ^= flip.astype(np.uint8)
    return bases, bits


def transmit(q: PreparedQubit, ch: ChannelModel, rng: np.random.Generator) -> PreparedQubit:
    bases, bits = transmit_batch(np.array([q.basis]), np.array([q.bit]), ch, rng)
    return PreparedQubit(Basis(int(bases[0])), int(bits[0]))


def measure(q: PreparedQubit, basis: Basis, rng: np.random.Generator) -> int:
    if Basis(basis) == q.basis:
        return q.bit
    return int(rng.integers(0, 2))
