import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from qkrlab import rng as rngmod
from qkrlab.channel import (
    Basis,
    ChannelModel,
    InterceptResend,
    PreparedQubit,
    measure,
    measure_batch,
    prepare,
    transmit,
    transmit_batch,
)

N = 100_000


def enumerate_intercept_error(num_bases):
    """Exact error probability on a matched Alice/Bob basis under full intercept-resend."""
    err = Fraction(0)
    for eve_basis in range(num_bases):
        for eve_bit, bob_bit in itertools.product((0, 1), repeat=2):
            if eve_basis == 0:  # Eve matches: she forwards the sent state |0>
                p = Fraction(eve_bit == 0) * Fraction(bob_bit == 0)
            else:  # both Eve's and then Bob's outcome are uniform
                p = Fraction(1, 4)
            if bob_bit != 0:
                err += Fraction(1, num_bases) * p
    return err


def test_prepare():
    assert prepare(0, Basis.Z) == PreparedQubit(Basis.Z, 0)
    assert prepare(1, Basis.X) == PreparedQubit(Basis.X, 1)
    assert prepare(1, Basis.Y) == PreparedQubit(Basis.Y, 1)
    with pytest.raises(ValueError):
        prepare(2, Basis.Z)


def test_identity_channel():
    g = np.random.default_rng(0)
    for b, basis in itertools.product((0, 1), Basis):
        q = prepare(b, basis)
        assert transmit(q, ChannelModel(0.0), g) == q
        assert measure(transmit(q, ChannelModel(0.0), g), basis, g) == b


def test_full_flip():
    g = np.random.default_rng(0)
    bases = np.zeros(1000, np.uint8)
    bits = g.integers(0, 2, 1000).astype(np.uint8)
    _, out = transmit_batch(bases, bits, ChannelModel(1.0), g)
    assert (out == 1 - bits).all()


def test_matched_measure_is_deterministic():
    g = np.random.default_rng(0)
    assert measure(PreparedQubit(Basis.Z, 1), Basis.Z, g) == 1
    assert measure(PreparedQubit(Basis.Y, 1), Basis.Y, g) == 1


def test_mismatched_measure_is_uniform():
    g = rngmod.stream(1, 0, "measure")
    out = measure_batch(np.zeros(N, np.uint8), np.zeros(N, np.uint8), np.ones(N, np.uint8), g)
    assert abs(out.mean() - 0.5) <= 0.01


@pytest.mark.parametrize("num_bases, expected", [(2, 0.25), (3, 1 / 3)])
def test_intercept_resend_error_rate(num_bases, expected):
    assert float(enumerate_intercept_error(num_bases)) == pytest.approx(expected)
    g = rngmod.stream(5, 0, "channel")
    ch = ChannelModel(0.0, InterceptResend(1.0, num_bases))
    bases, bits = transmit_batch(np.zeros(N, np.uint8), np.zeros(N, np.uint8), ch, g)
    out = measure_batch(bases, bits, np.zeros(N, np.uint8), g)
    se = math.sqrt(expected * (1 - expected) / N)
    assert abs(out.mean() - expected) <= (0.01 if num_bases == 2 else 3 * se)


@pytest.mark.parametrize("q", [0.01, 0.05, 0.2])
def test_noise_rate(q):
    g = rngmod.stream(6, 0, "channel")
    bits = np.zeros(N, np.uint8)
    _, out = transmit_batch(np.full(N, 1, np.uint8), bits, ChannelModel(q), g)
    assert abs(out.mean() - q) <= 3 * math.sqrt(q * (1 - q) / N)


def test_partial_interception():
    g = rngmod.stream(7, 0, "channel")
    ch = ChannelModel(0.0, InterceptResend(0.4, 2))
    bases, bits = transmit_batch(np.zeros(N, np.uint8), np.zeros(N, np.uint8), ch, g)
    out = measure_batch(bases, bits, np.zeros(N, np.uint8), g)
    assert abs(out.mean() - 0.1) <= 3 * math.sqrt(0.09 / N)


def test_transcript_reproducible():
    ch = ChannelModel(0.1, InterceptResend(0.5, 3))
    runs = []
    for _ in range(2):
        g = rngmod.stream(11, 4, "channel")
        bases, bits = transmit_batch(np.arange(300, dtype=np.uint8) % 3, np.arange(300, dtype=np.uint8) % 2, ch, g)
        runs.append((bases.tobytes(), bits.tobytes()))
    assert runs[0] == runs[1]


def test_streams_are_distinct():
    a = rngmod.stream(1, 0, "channel").random(4)
    b = rngmod.stream(1, 1, "channel").random(4)
    c = rngmod.stream(1, 0, "measure").random(4)
    assert not np.allclose(a, b) and not np.allclose(a, c)
    with pytest.raises(ValueError):
        rngmod.stream(1, 0, "bogus")


def test_channel_validation():
    with pytest.raises(ValueError):
        ChannelModel(-0.1)
    with pytest.raises(ValueError):
        InterceptResend(1.5)
    with pytest.raises(ValueError):
        InterceptResend(1.0, 4)
