"""
Closed-form key rates, key recycling rates and key sharing rates.

Every function here is a pure function of its arguments. Rates are
returned as signed reals; clamping at zero is left to presentation code.

The recycling-rate model is pluggable: any callable
``model(q, protocol) -> float`` may be passed where a ``model`` keyword
is accepted. The default is :func:`qkr_recycling_rate`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Sequence


class DomainError(ValueError):
    """An argument lies outside the domain of a rate function."""


class UnsupportedProtocolError(ValueError):
    """The operation is not defined for the given protocol."""


class Protocol(str, Enum):
    BB84 = "bb84"
    SIX_STATE = "six_state"
    QKR4 = "qkr4"
    QKR6 = "qkr6"

    @classmethod
    def parse(cls, name: "str | Protocol") -> "Protocol":
        if isinstance(name, Protocol):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {"sixstate": "six_state", "six_state_qkd": "six_state", "six": "six_state"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise UnsupportedProtocolError(f"unknown protocol {name!r}") from None

    @property
    def is_qkr(self) -> bool:
        return self in (Protocol.QKR4, Protocol.QKR6)

    @property
    def num_bases(self) -> int:
        return 3 if self in (Protocol.SIX_STATE, Protocol.QKR6) else 2


RecyclingModel = Callable[[float, Protocol], float]

# bisection bracket and stopping rule for thresholds
ROOT_BRACKET = (1e-9, 0.33)
ROOT_TOL = 1e-6
ROOT_MAX_ITER = 200


def _check_range(name: str, x: float, lo: float, hi: float, *, hi_open: bool = False) -> None:
    if math.isnan(x) or x < lo or x > hi or (hi_open and x == hi):
        bracket = ")" if hi_open else "]"
        raise DomainError(f"{name}={x} outside [{lo}, {hi}{bracket}")


def _xlog2x(x: float) -> float:
    return 0.0 if x == 0.0 else x * math.log2(x)


def binary_entropy(q: float) -> float:
    """
    Shannon entropy of a Bernoulli(q) bit, in bits.

    Uses the convention 0·log2(0) = 0.

    Examples
    --------
    >>> binary_entropy(0.5)
    1.0
    >>> binary_entropy(0.0)
    0.0
    """
    _check_range("q", q, 0.0, 1.0)
    return -_xlog2x(q) - _xlog2x(1.0 - q)


def six_state_entropy(q: float) -> float:
    """
    Entropy term S6(q) of the six-state protocol.

    S6(q) = -(1 - 3q/2)·log2(1 - 3q/2) - (3q/2)·log2(q/2), the entropy
    of the Bell-diagonal distribution {1 - 3q/2, q/2, q/2, q/2}.
    """
    _check_range("q", q, 0.0, 2.0 / 3.0)
    return -_xlog2x(1.0 - 1.5 * q) - 3.0 * _xlog2x(q / 2.0)


def bb84_key_rate(q: float) -> float:
    """Asymptotic BB84 key rate 1 - 2·H(q); negative past the threshold."""
    _check_range("q", q, 0.0, 0.5)
    return 1.0 - 2.0 * binary_entropy(q)


def six_state_key_rate(q: float) -> float:
    """Asymptotic six-state QKD key rate 1 - S6(q), defined for q in [0, 1/3]."""
    _check_range("q", q, 0.0, 1.0 / 3.0)
    return 1.0 - six_state_entropy(q)


def qkr_recycling_rate(q: float, protocol: "Protocol | str") -> float:
    """
    Fraction of the one-time-pad key K_v that can be recycled at QBER ``q``.

    QKR4 recycles 1 - H(q); QKR6 recycles 1 - (S6(q) - H(q)). Both are
    clamped to [0, 1] and vanish at q = 0.5.
    """
    protocol = Protocol.parse(protocol)
    if not protocol.is_qkr:
        raise UnsupportedProtocolError(f"no recycling rate for {protocol.value}")
    _check_range("q", q, 0.0, 0.5)
    if protocol is Protocol.QKR4:
        rate = 1.0 - binary_entropy(q)
    else:
        rate = 1.0 - (six_state_entropy(q) - binary_entropy(q))
    return min(1.0, max(0.0, rate))


def _check_qkr_args(q_predict: float, q_real: float, protocol: "Protocol | str") -> Protocol:
    protocol = Protocol.parse(protocol)
    if not protocol.is_qkr:
        raise UnsupportedProtocolError(f"{protocol.value} is not a key recycling protocol")
    _check_range("q_predict", q_predict, 0.0, 0.5, hi_open=True)
    _check_range("q_real", q_real, 0.0, 0.5)
    return protocol


def used_key_factor(q_predict: float) -> float:
    """Pad bits spent per message bit: 1 + H/(1 - H) = 1/(1 - H) at the predicted QBER."""
    _check_range("q_predict", q_predict, 0.0, 0.5, hi_open=True)
    return 1.0 + binary_entropy(q_predict) / (1.0 - binary_entropy(q_predict))


def consumed_key_length(
    q_predict: float,
    q_real: float,
    m: float,
    protocol: "Protocol | str",
    *,
    model: RecyclingModel = qkr_recycling_rate,
) -> float:
    """
    Pre-shared key consumed when sharing ``m`` raw bits through QKR.

    The pad covers the message plus a syndrome sized for ``q_predict``;
    the unrecycled share of that pad is consumed. When the real QBER
    exceeds the prediction, decoding fails and nothing is recycled.

    Parameters
    ----------
    q_predict : float
        QBER the code was sized for, in [0, 0.5).
    q_real : float
        QBER actually seen on the channel, in [0, 0.5].
    m : float
        Raw key (message) length in bits, > 0.
    protocol : Protocol
        QKR4 or QKR6.
    model : callable, optional
        Recycling-rate model ``(q, protocol) -> float``.

    Returns
    -------
    float
        Consumed key length in bits (not rounded).
    """
    protocol = _check_qkr_args(q_predict, q_real, protocol)
    if not m > 0:
        raise DomainError(f"m={m} must be positive")
    recycled = 0.0 if q_real > q_predict else model(q_real, protocol)
    return used_key_factor(q_predict) * m * (1.0 - recycled)


def qkr_key_sharing_rate(
    q_predict: float,
    q_real: float,
    protocol: "Protocol | str",
    *,
    model: RecyclingModel = qkr_recycling_rate,
) -> float:
    """
    Key sharing rate (n - k)/m of a QKR round.

    On success n = m, giving 1 - k/m. On decode failure (q_real > q_predict)
    n = 0 and the rate is -k/m, reported unclamped.
    """
    k = consumed_key_length(q_predict, q_real, 1.0, protocol, model=model)
    if q_real > q_predict:
        return -k
    return 1.0 - k


def qkd_key_sharing_rate(q: float, protocol: "Protocol | str") -> float:
    """QKD consumes no pre-shared key, so its sharing rate is its key rate."""
    protocol = Protocol.parse(protocol)
    if protocol is Protocol.BB84:
        return bb84_key_rate(q)
    if protocol is Protocol.SIX_STATE:
        return six_state_key_rate(q)
    raise UnsupportedProtocolError(f"{protocol.value} is not a QKD protocol")


def key_sharing_rate(
    protocol: "Protocol | str",
    q: float,
    q_predict: "float | None" = None,
    *,
    model: RecyclingModel = qkr_recycling_rate,
) -> float:
    """Dispatch to the QKD or QKR sharing rate; QKR defaults to q_predict = q."""
    protocol = Protocol.parse(protocol)
    if protocol.is_qkr:
        return qkr_key_sharing_rate(q if q_predict is None else q_predict, q, protocol, model=model)
    return qkd_key_sharing_rate(q, protocol)


def bisect_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    tol: float = ROOT_TOL,
    max_iter: int = ROOT_MAX_ITER,
) -> float:
    """Root of a continuous ``f`` with a sign change on [lo, hi], by bisection."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise DomainError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


@lru_cache(maxsize=None)
def threshold(protocol: "Protocol | str") -> float:
    """
    QBER at which the protocol's best key sharing rate reaches zero.

    For QKR protocols the prediction is taken to be perfect (q_predict = q).
    """
    protocol = Protocol.parse(protocol)
    return bisect_root(lambda q: key_sharing_rate(protocol, q), *ROOT_BRACKET)


def sharing_rate_delta(q: float, variant: str) -> float:
    """
    Sharing-rate advantage of QKR over its QKD counterpart at q_predict = q.

    ``variant`` is ``"four_state"`` (QKR4 vs BB84) or ``"six_state"``
    (QKR6 vs six-state QKD).
    """
    pairs = {
        "four_state": (Protocol.QKR4, Protocol.BB84),
        "six_state": (Protocol.QKR6, Protocol.SIX_STATE),
    }
    if variant not in pairs:
        raise UnsupportedProtocolError(f"unknown variant {variant!r}")
    qkr, qkd = pairs[variant]
    _check_range("q", q, 0.0, threshold(qkd) + ROOT_TOL)
    return qkr_key_sharing_rate(q, q, qkr) - qkd_key_sharing_rate(q, qkd)


# ---------------------------------------------------------------------------
# Figure data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateCurve:
    """A named series of (q, value) points for one protocol."""

    name: str
    protocol: Protocol
    points: tuple[tuple[float, float], ...]
    q_predict: "float | None" = None

    def __post_init__(self) -> None:
        qs = [q for q, _ in self.points]
        if any(b <= a for a, b in zip(qs, qs[1:])):
            raise ValueError(f"curve {self.name!r}: q values must be strictly increasing")

    @property
    def qs(self) -> list[float]:
        return [q for q, _ in self.points]

    @property
    def values(self) -> list[float]:
        return [v for _, v in self.points]

    def value_at(self, q: float, tol: float = 1e-12) -> float:
        for x, v in self.points:
            if abs(x - q) <= tol:
                return v
        raise KeyError(q)


def qber_grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive grid start, start+step, ..., <= stop (values rounded to 12 digits)."""
    if not step > 0:
        raise DomainError(f"grid step {step} must be positive")
    if stop < start:
        raise DomainError(f"empty grid [{start}, {stop}]")
    count = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + k * step, 12) for k in range(count + 1)]


# q ranges plotted for each figure
FIGURE_RANGES = {1: (0.0, 0.5), 2: (0.0, 0.2), 3: (0.0, 0.5), 4: (0.0, 0.2), 5: (0.0, 0.11)}
FIGURE_PREDICTION = 0.07


def _curve(name: str, protocol: Protocol, qs: Sequence[float], fn, q_predict=None) -> RateCurve:
    return RateCurve(name, protocol, tuple((q, fn(q)) for q in qs), q_predict)


def figure_data(figure_id: int, grid_step: float) -> list[RateCurve]:
    """
    Curve data behind figures 1-5.

    1: QKR4 recycling rate. 2: QKR4 sharing rate at q_predict = 0.07, at
    q_predict = q, and BB84. 3: QKR6 recycling rate. 4: as 2 for the
    six-state pair. 5: sharing-rate deltas for both pairs.
    """
    if figure_id not in FIGURE_RANGES:
        raise ValueError(f"unknown figure id {figure_id!r}; expected 1..5")
    qs = qber_grid(*FIGURE_RANGES[figure_id], grid_step)
    qp = FIGURE_PREDICTION
    if figure_id in (1, 3):
        p = Protocol.QKR4 if figure_id == 1 else Protocol.QKR6
        return [_curve(f"{p.value}_recycling", p, qs, lambda q: qkr_recycling_rate(q, p))]
    if figure_id in (2, 4):
        qkr, qkd, qkd_name = (
            (Protocol.QKR4, Protocol.BB84, "bb84")
            if figure_id == 2
            else (Protocol.QKR6, Protocol.SIX_STATE, "six_state_qkd")
        )
        return [
            _curve(f"{qkr.value}_pred_{qp}", qkr, qs, lambda q: qkr_key_sharing_rate(qp, q, qkr), qp),
            _curve(f"{qkr.value}_optimal", qkr, qs, lambda q: qkr_key_sharing_rate(q, q, qkr)),
            _curve(qkd_name, qkd, qs, lambda q: qkd_key_sharing_rate(q, qkd)),
        ]
    return [
        _curve("delta_four_state", Protocol.QKR4, qs, lambda q: sharing_rate_delta(q, "four_state")),
        _curve("delta_six_state", Protocol.QKR6, qs, lambda q: sharing_rate_delta(q, "six_state")),
    ]
