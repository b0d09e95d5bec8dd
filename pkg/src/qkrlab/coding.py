"""
Binary linear error-correcting codes.

Concrete codes are systematic, codeword = message || parity, and decode by
syndrome lookup of the minimum-weight error pattern. :class:`IdealCode`
models a capacity-achieving code for long messages: it has no matrices and
is decoded with the sent codeword as a genie reference, succeeding iff the
channel flipped at most ``floor(q_predict * n_code)`` bits.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from qkrlab.entropy_rates import DomainError, binary_entropy

MAX_SYNDROME_BITS = 20
MAX_EXHAUSTIVE_K = 16


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _bits(x, length: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(x, dtype=np.uint8).ravel()
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"expected {length} bits, got {arr.shape[0]}")
    return arr


@dataclass(frozen=True)
class DecodeResult:
    success: bool
    message: np.ndarray
    errors_corrected: int


class LinearCode:
    """
    Systematic binary linear code with generator [I | P].

    Parameters
    ----------
    parity : array_like
        k_msg x (n_code - k_msg) parity part P of the generator.
    distance : int, optional
        Minimum distance. Computed exhaustively when omitted, which
        requires k_msg <= 16.
    """

    def __init__(self, parity, distance: Optional[int] = None, name: str = "linear"):
        p = np.atleast_2d(np.asarray(parity, dtype=np.uint8)) & 1
        k, r = p.shape
        if r > MAX_SYNDROME_BITS:
            raise ValueError(
                f"syndrome table needs 2^{r} entries; limit is 2^{MAX_SYNDROME_BITS}"
            )
        self.name = name
        self.k_msg = k
        self.n_code = k + r
        self.generator = np.hstack([np.eye(k, dtype=np.uint8), p])
        self.parity_check = np.hstack([p.T.copy(), np.eye(r, dtype=np.uint8)])
        self.generator.setflags(write=False)
        self.parity_check.setflags(write=False)
        if distance is None:
            distance = self._min_distance()
        self.d = int(distance)
        self._weights = 1 << np.arange(r, dtype=np.int64)
        self._table = self._build_table()
        self._patterns = np.stack([self._table[s] for s in range(1 << r)])
        self._pattern_weights = self._patterns.sum(axis=1).astype(np.int64)

    def __repr__(self) -> str:
        return f"LinearCode({self.name}, n={self.n_code}, k={self.k_msg}, d={self.d})"

    @property
    def correctable(self) -> int:
        return (self.d - 1) // 2

    def _min_distance(self) -> int:
        if self.k_msg > MAX_EXHAUSTIVE_K:
            raise ValueError("distance must be given for k_msg > 16")
        msgs = np.array(list(itertools.product((0, 1), repeat=self.k_msg))[1:], dtype=np.uint8)
        words = (msgs.astype(np.int64) @ self.generator) & 1
        return int(words.sum(axis=1).min())

    def syndrome(self, word) -> np.ndarray:
        return ((self.parity_check.astype(np.int64) @ _bits(word, self.n_code)) & 1).astype(np.uint8)

    def _key(self, syn: np.ndarray) -> int:
        return int(syn.astype(np.int64) @ self._weights)

    def _build_table(self) -> dict[int, np.ndarray]:
        r = self.n_code - self.k_msg
        table: dict[int, np.ndarray] = {}
        for w in range(self.n_code + 1):
            for pos in itertools.combinations(range(self.n_code), w):
                e = np.zeros(self.n_code, dtype=np.uint8)
                e[list(pos)] = 1
                table.setdefault(self._key(self.syndrome(e)), e)
            if len(table) == 1 << r:
                break
        return table

    def encode(self, message) -> np.ndarray:
        m = _bits(message, self.k_msg)
        return ((m.astype(np.int64) @ self.generator) & 1).astype(np.uint8)

    def decode(self, received) -> DecodeResult:
        word = _bits(received, self.n_code)
        e = self._table[self._key(self.syndrome(word))]
        w = int(e.sum())
        if w > self.correctable:
            return DecodeResult(False, word[: self.k_msg].copy(), 0)
        return DecodeResult(True, (word ^ e)[: self.k_msg], w)

    def decode_many(self, words: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Row-wise decode; returns (messages, success flags, error weights)."""
        words = np.asarray(words, dtype=np.uint8).reshape(-1, self.n_code)
        syn = (words.astype(np.int64) @ self.parity_check.T.astype(np.int64)) & 1
        keys = syn @ self._weights
        weights = self._pattern_weights[keys]
        ok = weights <= self.correctable
        corrected = np.where(ok[:, None], words ^ self._patterns[keys], words)
        return corrected[:, : self.k_msg], ok, np.where(ok, weights, 0)


HAMMING74_PARITY = [[1, 1, 0], [1, 0, 1], [0, 1, 1], [1, 1, 1]]


def hamming74() -> LinearCode:
    return LinearCode(HAMMING74_PARITY, name="hamming74")


def repetition(n: int) -> LinearCode:
    if n < 1:
        raise ValueError("repetition length must be positive")
    return LinearCode(np.ones((1, n - 1), dtype=np.uint8), distance=n, name=f"repetition{n}")


class BlockCoder:
    """Applies a short :class:`LinearCode` block-wise to a payload of any length.

    The payload is zero-padded to a whole number of blocks.
    """

    def __init__(self, code: LinearCode, payload_len: int):
        if payload_len <= 0:
            raise ValueError("payload length must be positive")
        self.code = code
        self.k_msg = payload_len
        self.blocks = -(-payload_len // code.k_msg)
        self.n_code = self.blocks * code.n_code

    def encode(self, message) -> np.ndarray:
        m = _bits(message, self.k_msg)
        padded = np.zeros(self.blocks * self.code.k_msg, dtype=np.uint8)
        padded[: self.k_msg] = m
        blocks = padded.reshape(self.blocks, self.code.k_msg).astype(np.int64)
        return ((blocks @ self.code.generator) & 1).astype(np.uint8).ravel()

    def decode(self, received, reference=None) -> DecodeResult:
        word = _bits(received, self.n_code).reshape(self.blocks, self.code.n_code)
        msgs, ok, weights = self.code.decode_many(word)
        success = bool(ok.all())
        return DecodeResult(success, msgs.ravel()[: self.k_msg], int(weights.sum()) if success else 0)


@dataclass(frozen=True)
class IdealCode:
    """Capacity-achieving idealization sized for a predicted QBER."""

    k_msg: int
    q_predict: float
    n_code: int = field(init=False)
    capacity: int = field(init=False)

    def __post_init__(self) -> None:
        if self.k_msg <= 0:
            raise DomainError(f"m={self.k_msg} must be positive")
        if not 0.0 <= self.q_predict < 0.5:
            raise DomainError(f"q_predict={self.q_predict} outside [0, 0.5)")
        n = round_half_up(self.k_msg / (1.0 - binary_entropy(self.q_predict)))
        object.__setattr__(self, "n_code", n)
        object.__setattr__(self, "capacity", int(math.floor(self.q_predict * n + 1e-9)))

    def encode(self, message) -> np.ndarray:
        # redundancy is virtual; the parity slots carry zeros
        word = np.zeros(self.n_code, dtype=np.uint8)
        word[: self.k_msg] = _bits(message, self.k_msg)
        return word

    def decode(self, received, reference) -> DecodeResult:
        """Genie decoding against the transmitted codeword ``reference``."""
        word = _bits(received, self.n_code)
        ref = _bits(reference, self.n_code)
        errors = int(np.count_nonzero(word ^ ref))
        if errors > self.capacity:
            return DecodeResult(False, word[: self.k_msg].copy(), 0)
        return DecodeResult(True, ref[: self.k_msg].copy(), errors)


def ideal_code(m: int, q_predict: float) -> IdealCode:
    return IdealCode(int(m), float(q_predict))


def required_syndrome_length(m: int, q_predict: float) -> int:
    """Syndrome bits a self-protecting code needs for ``m`` message bits."""
    if not 0.0 <= q_predict < 0.5:
        raise DomainError(f"q_predict={q_predict} outside [0, 0.5)")
    h = binary_entropy(q_predict)
    return round_half_up(m * h / (1.0 - h))


ECC_MODES = ("ideal", "hamming74", "repetition3", "repetition5")


def make_coder(mode: str, payload_len: int, q_predict: float):
    """Coder for ``payload_len`` bits: the ideal code or a block-wise concrete code."""
    if mode == "ideal":
        return ideal_code(payload_len, q_predict)
    if mode == "hamming74":
        return BlockCoder(hamming74(), payload_len)
    if mode == "repetition3":
        return BlockCoder(repetition(3), payload_len)
    if mode == "repetition5":
        return BlockCoder(repetition(5), payload_len)
    raise ValueError(f"unknown ecc mode {mode!r}; expected one of {ECC_MODES}")
