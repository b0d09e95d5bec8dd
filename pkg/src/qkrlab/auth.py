"""
Wegman-Carter polynomial MAC over GF(2^t) and Toeplitz privacy amplification.

Bit sequences are numpy uint8 arrays. Within a t-bit MAC block the first
bit is the most significant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# reduction polynomials, leading term included
REDUCTION_POLY = {
    8: (1 << 8) | 0b11011,  # x^8+x^4+x^3+x+1
    16: (1 << 16) | 0b101011,  # x^16+x^5+x^3+x+1
    32: (1 << 32) | 0b10001101,  # x^32+x^7+x^3+x^2+1
    64: (1 << 64) | 0b11011,  # x^64+x^4+x^3+x+1
}

# use FFT convolution above this many matrix entries
_FFT_THRESHOLD = 1 << 16


def _check_t(t: int) -> None:
    if t not in REDUCTION_POLY:
        raise ValueError(f"unsupported tag size {t}; expected one of {sorted(REDUCTION_POLY)}")


def bits_to_int(bits) -> int:
    out = 0
    for b in np.asarray(bits, dtype=np.uint8).ravel():
        out = (out << 1) | int(b)
    return out


def int_to_bits(value: int, width: int) -> np.ndarray:
    if value < 0 or value >> width:
        raise ValueError(f"{value} does not fit in {width} bits")
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def gf_mul(a: int, b: int, t: int) -> int:
    """Carry-less product of ``a`` and ``b`` reduced modulo the degree-t polynomial."""
    _check_t(t)
    poly = REDUCTION_POLY[t]
    top = 1 << t
    acc = 0
    while b:
        if b & 1:
            acc ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= poly
    return acc


@dataclass(frozen=True)
class MacKey:
    point_key: int
    pad_key: int
    t: int

    def __post_init__(self) -> None:
        _check_t(self.t)
        for v in (self.point_key, self.pad_key):
            if v < 0 or v >> self.t:
                raise ValueError(f"key component {v:#x} is not a {self.t}-bit value")

    @classmethod
    def from_bits(cls, bits, t: int) -> "MacKey":
        """Split 2t key bits into point_key || pad_key."""
        bits = np.asarray(bits, dtype=np.uint8).ravel()
        if bits.shape[0] != 2 * t:
            raise ValueError(f"MAC key needs {2 * t} bits, got {bits.shape[0]}")
        return cls(bits_to_int(bits[:t]), bits_to_int(bits[t:]), t)


def _blocks(message, t: int) -> list[int]:
    bits = np.asarray(message, dtype=np.uint8).ravel()
    rem = bits.shape[0] % t
    if rem:
        pad = np.zeros(t - rem, dtype=np.uint8)
        pad[0] = 1
        bits = np.concatenate([bits, pad])
    return [bits_to_int(bits[i : i + t]) for i in range(0, bits.shape[0], t)]


def mac_tag(key: MacKey, message, t: "int | None" = None) -> np.ndarray:
    """
    Polynomial-hash tag pad ⊕ Σ m_i · k^(L-i+1) over GF(2^t).

    Messages whose length is not a multiple of t get a single 1 bit and
    then zeros appended.
    """
    t = key.t if t is None else t
    if t != key.t:
        raise ValueError(f"key is for t={key.t}, not t={t}")
    acc = 0
    for block in _blocks(message, t):
        acc = gf_mul(acc ^ block, key.point_key, t)
    return int_to_bits(acc ^ key.pad_key, t)


def mac_verify(key: MacKey, message, tag) -> bool:
    tag = np.asarray(tag, dtype=np.uint8).ravel()
    if tag.shape[0] != key.t:
        return False
    return bool(np.array_equal(mac_tag(key, message), tag))


def privacy_amplify(seed, data, out_len: int) -> np.ndarray:
    """
    Toeplitz hash of ``data`` down to ``out_len`` bits.

    T[i][j] = seed[i - j + len(data) - 1], so the seed needs
    len(data) + out_len - 1 bits.
    """
    x = np.asarray(data, dtype=np.uint8).ravel()
    s = np.asarray(seed, dtype=np.uint8).ravel()
    n = x.shape[0]
    if out_len < 0 or out_len > n:
        raise ValueError(f"out_len {out_len} must lie in [0, {n}]")
    if s.shape[0] != n + out_len - 1 and out_len > 0:
        raise ValueError(f"seed must have {n + out_len - 1} bits, got {s.shape[0]}")
    if out_len == 0:
        return np.zeros(0, dtype=np.uint8)
    # output[i] = (seed * data)[i + n - 1], a full linear convolution
    if n * out_len <= _FFT_THRESHOLD:
        conv = np.convolve(s.astype(np.int64), x.astype(np.int64))
    else:
        size = 1 << int(s.shape[0] + n - 1).bit_length()
        conv = np.fft.irfft(np.fft.rfft(s, size) * np.fft.rfft(x, size), size)
        conv = np.rint(conv).astype(np.int64)
    return (conv[n - 1 : n - 1 + out_len] & 1).astype(np.uint8)
