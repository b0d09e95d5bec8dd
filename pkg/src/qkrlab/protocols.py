"""
Executable rounds of BB84, six-state QKD and the 2-/3-basis QKR protocol.

A QKR round encrypts ``ECC(m || MAC(m)) ⊕ K_v`` into qubits whose bases come
from ``K_b``; Bob decodes, checks the MAC and answers with one authenticated
accept/reject bit. On accept, K_v is privacy-amplified to its recyclable
length. QKD rounds sift, estimate the QBER and apply the asymptotic key rate.

Every round draws its randomness from streams keyed by
``(master_seed, trial_index, purpose)`` and returns a :class:`TrialLedger`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from qkrlab import rng as rngmod
from qkrlab.auth import MacKey, mac_tag, mac_verify, privacy_amplify
from qkrlab.channel import ChannelModel, InterceptResend, measure_batch, transmit_batch
from qkrlab.coding import ECC_MODES, IdealCode, ideal_code, make_coder
from qkrlab.entropy_rates import (
    Protocol,
    RecyclingModel,
    qkd_key_sharing_rate,
    qkr_recycling_rate,
)


class ConfigError(ValueError):
    """Invalid trial configuration."""


class KeyExhaustedError(ValueError):
    """A pre-shared key ran out before all qubits had a basis."""


MAC_BITS = (8, 16, 32, 64)


@dataclass(frozen=True)
class TrialParams:
    protocol: Protocol
    m: int
    q_channel: float = 0.0
    q_predict: Optional[float] = None
    ecc_mode: str = "ideal"
    mac_bits: int = 32
    eavesdropper: Optional[InterceptResend] = None
    master_seed: int = 0
    trial_index: int = 0
    # QKR: "decoder" uses corrected-error count, "channel" uses q_channel
    qber_source: str = "decoder"
    recycle_on_reject: bool = True
    # QKD: "analytic" or "concrete" post-processing; 0 => no sacrificed sample
    qkd_postprocessing: str = "analytic"
    sample_fraction: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "protocol", Protocol.parse(self.protocol))
        if self.m <= 0:
            raise ConfigError(f"m must be positive, got {self.m}")
        if not 0.0 <= self.q_channel <= 0.5:
            raise ConfigError(f"q_channel {self.q_channel} outside [0, 0.5]")
        if self.protocol.is_qkr:
            if self.q_predict is None:
                raise ConfigError(f"{self.protocol.value} needs q_predict")
            if not 0.0 <= self.q_predict < 0.5:
                raise ConfigError(f"q_predict {self.q_predict} outside [0, 0.5)")
        elif self.q_predict is not None:
            raise ConfigError(f"q_predict is meaningless for {self.protocol.value}")
        if self.ecc_mode not in ECC_MODES:
            raise ConfigError(f"ecc_mode must be one of {ECC_MODES}")
        if self.mac_bits not in MAC_BITS:
            raise ConfigError(f"mac_bits must be one of {MAC_BITS}")
        if self.qber_source not in ("decoder", "channel"):
            raise ConfigError("qber_source must be 'decoder' or 'channel'")
        if self.qkd_postprocessing not in ("analytic", "concrete"):
            raise ConfigError("qkd_postprocessing must be 'analytic' or 'concrete'")
        if not 0.0 <= self.sample_fraction < 1.0:
            raise ConfigError("sample_fraction must lie in [0, 1)")
        if self.master_seed < 0 or self.trial_index < 0:
            raise ConfigError("seed and trial index must be non-negative")

    @property
    def channel(self) -> ChannelModel:
        return ChannelModel(self.q_channel, self.eavesdropper)

    def stream(self, purpose: str) -> np.random.Generator:
        return rngmod.stream(self.master_seed, self.trial_index, purpose)


@dataclass(frozen=True)
class KeyMaterial:
    u: np.ndarray
    k_b: np.ndarray
    k_v: np.ndarray


@dataclass(frozen=True)
class ClassicalMessage:
    sender: str
    receiver: str
    kind: str
    bits: int


@dataclass
class TrialLedger:
    """Per-trial key accounting; lengths are in bits."""

    protocol: str
    trial_index: int
    m_raw: int
    n_secret: int
    accepted: bool
    errors_observed: int
    qber_estimate: Optional[float]
    k_consumed: int = 0
    k_consumed_u: int = 0
    k_consumed_kb: int = 0
    k_consumed_kv: int = 0
    # consumption with the MAC tag dropped from the pad (rate-formula accounting)
    k_consumed_ideal: int = 0
    key_used: dict = field(default_factory=dict)
    recycled: dict = field(default_factory=dict)
    n_code: int = 0
    mac_bits: int = 0
    response_bits: int = 0
    sift_fraction: Optional[float] = None
    message_recovered: Optional[bool] = None
    transcript: tuple = ()
    q_channel: float = 0.0
    q_predict: Optional[float] = None
    m_param: int = 0
    trace: Optional[dict] = field(default=None, repr=False, compare=False)

    def sharing_rate(self, idealized: bool = True) -> float:
        k = self.k_consumed_ideal if idealized else self.k_consumed
        if self.m_raw <= 0:
            raise ValueError("ledger has no raw key")
        return (self.n_secret - k) / self.m_raw

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("trace")
        d["transcript"] = [asdict(msg) for msg in self.transcript]
        return d



def derive_bases(k_b, count: int, num_bases: int) -> tuple[np.ndarray, int]:
    """
    Map key bits to a basis per qubit (0=Z, 1=X, 2=Y).

    Two bases use one bit per qubit. Three bases read bit pairs
    00->Z, 01->X, 10->Y and reject 11. Returns (bases, bits consumed).
    """
    bits = np.asarray(k_b, dtype=np.uint8).ravel()
    if num_bases == 2:
        if bits.shape[0] < count:
            raise KeyExhaustedError(f"K_b has {bits.shape[0]} bits, need {count}")
        return bits[:count].copy(), count
    if num_bases != 3:
        raise ConfigError("num_bases must be 2 or 3")
    if count == 0:
        return np.zeros(0, dtype=np.uint8), 0
    pairs = bits[: bits.shape[0] // 2 * 2].reshape(-1, 2)
    codes = 2 * pairs[:, 0] + pairs[:, 1]
    valid = np.flatnonzero(codes != 3)
    if valid.shape[0] < count:
        raise KeyExhaustedError(f"K_b too short for {count} three-basis choices")
    return codes[valid[:count]].astype(np.uint8), 2 * int(valid[count - 1] + 1)


def _kb_provision(n_qubits: int, num_bases: int) -> int:
    # three bases spend 8/3 bits per qubit on average; 3 bits/qubit leaves a wide margin
    return n_qubits if num_bases == 2 else 3 * n_qubits + 64


def draw_key_material(params: TrialParams, n_code: int) -> KeyMaterial:
    """Pre-shared keys for one QKR round: u (two MAC keys), K_b, K_v."""
    g = params.stream("keys")
    t = params.mac_bits
    u = rngmod.random_bits(g, 4 * t)
    k_b = rngmod.random_bits(g, _kb_provision(n_code, params.protocol.num_bases))
    k_v = rngmod.random_bits(g, n_code)
    return KeyMaterial(u, k_b, k_v)


def _ideal_pad_length(params: TrialParams) -> int:
    return make_coder(params.ecc_mode, params.m, params.q_predict).n_code


def run_qkr_trial(
    params: TrialParams,
    *,
    model: RecyclingModel = qkr_recycling_rate,
    keep_trace: bool = False,
) -> TrialLedger:
    """Run one QKR round and account for every key it touches."""
    if not params.protocol.is_qkr:
        raise ConfigError(f"{params.protocol.value} is not a QKR protocol")
    t = params.mac_bits
    coder = make_coder(params.ecc_mode, params.m + t, params.q_predict)
    n_code = coder.n_code
    keys = draw_key_material(params, n_code)
    msg_key = MacKey.from_bits(keys.u[: 2 * t], t)
    resp_key = MacKey.from_bits(keys.u[2 * t :], t)

    # Alice
    message = rngmod.random_bits(params.stream("message"), params.m)
    payload = np.concatenate([message, mac_tag(msg_key, message)])
    codeword = coder.encode(payload)
    cipher = codeword ^ keys.k_v
    bases, kb_used = derive_bases(keys.k_b, n_code, params.protocol.num_bases)

    # quantum channel, Bob measures in the K_b bases
    rx_bases, rx_bits = transmit_batch(bases, cipher, params.channel, params.stream("channel"))
    received = measure_batch(rx_bases, rx_bits, bases, params.stream("measure")) ^ keys.k_v

    # Bob
    if isinstance(coder, IdealCode):
        result = coder.decode(received, codeword)
    else:
        result = coder.decode(received)
    decoded_msg, decoded_tag = result.message[: params.m], result.message[params.m :]
    accepted = result.success and mac_verify(msg_key, decoded_msg, decoded_tag)
    response = np.array([int(accepted)], dtype=np.uint8)
    response_tag = mac_tag(resp_key, response)
    if not mac_verify(resp_key, response, response_tag):
        raise RuntimeError("response authentication failed on an untampered channel")
    transcript = (ClassicalMessage("bob", "alice", "accept_reject", 1 + t),)

    n_ideal = _ideal_pad_length(params)
    if accepted:
        errors = result.errors_corrected
        qber = errors / n_code if params.qber_source == "decoder" else params.q_channel
        rate = model(min(qber, 0.5), params.protocol)
        kv_recycled = min(n_code, math.ceil(rate * n_code))
        kv_ideal_consumed = n_ideal - min(n_ideal, math.ceil(rate * n_ideal))
        pa_len = kv_recycled
        recycle_ub = True
    else:
        errors, qber = 0, None
        kv_recycled, kv_ideal_consumed, pa_len = 0, n_ideal, 0
        recycle_ub = params.recycle_on_reject

    seed = rngmod.random_bits(params.stream("pa_seed"), n_code + pa_len - 1) if pa_len else None
    recycled_kv = privacy_amplify(seed, keys.k_v, pa_len) if pa_len else np.zeros(0, np.uint8)

    u_len, kb_len = keys.u.shape[0], kb_used
    recycled = {
        "u": u_len if recycle_ub else 0,
        "k_b": kb_len if recycle_ub else 0,
        "k_v": int(recycled_kv.shape[0]),
    }
    consumed_u = u_len - recycled["u"]
    consumed_kb = kb_len - recycled["k_b"]
    consumed_kv = n_code - recycled["k_v"]
    ledger = TrialLedger(
        protocol=params.protocol.value,
        trial_index=params.trial_index,
        m_raw=params.m,
        n_secret=params.m if accepted else 0,
        accepted=bool(accepted),
        errors_observed=int(errors),
        qber_estimate=qber,
        k_consumed=consumed_u + consumed_kb + consumed_kv,
        k_consumed_u=consumed_u,
        k_consumed_kb=consumed_kb,
        k_consumed_kv=consumed_kv,
        k_consumed_ideal=int(kv_ideal_consumed),
        key_used={"u": u_len, "k_b": kb_len, "k_v": n_code},
        recycled=recycled,
        n_code=n_code,
        mac_bits=t,
        response_bits=1 + t,
        message_recovered=bool(accepted and np.array_equal(decoded_msg, message)),
        transcript=transcript,
        q_channel=params.q_channel,
        q_predict=params.q_predict,
        m_param=params.m,
    )
    if keep_trace:
        ledger.trace = {
            "message": message,
            "decoded": decoded_msg,
            "cipher": cipher,
            "bases": bases,
            "recycled_kv": recycled_kv,
        }
    return ledger


def _qkd_rate(qber: float, protocol: Protocol) -> float:
    top = 0.5 if protocol is Protocol.BB84 else 1.0 / 3.0
    if qber > top:
        return -1.0
    return qkd_key_sharing_rate(qber, protocol)


def run_qkd_trial(params: TrialParams, *, keep_trace: bool = False) -> TrialLedger:
    """Run one BB84 or six-state round with symmetric basis choice."""
    if params.protocol.is_qkr:
        raise ConfigError(f"{params.protocol.value} is not a QKD protocol")
    n, nb = params.m, params.protocol.num_bases
    a_bits = rngmod.random_bits(params.stream("alice_bits"), n)
    a_bases = params.stream("alice_bases").integers(0, nb, size=n, dtype=np.uint8)
    b_bases = params.stream("bob_bases").integers(0, nb, size=n, dtype=np.uint8)
    rx_bases, rx_bits = transmit_batch(a_bases, a_bits, params.channel, params.stream("channel"))
    b_bits = measure_batch(rx_bases, rx_bits, b_bases, params.stream("measure"))

    sift = np.flatnonzero(a_bases == b_bases)
    key_a, key_b = a_bits[sift], b_bits[sift]
    transcript = [
        ClassicalMessage("bob", "alice", "bases", int(np.ceil(n * np.log2(nb)))),
        ClassicalMessage("alice", "bob", "sift_mask", n),
    ]

    if params.sample_fraction > 0 and sift.shape[0]:
        n_sample = int(round(params.sample_fraction * sift.shape[0]))
        picked = params.stream("sample").permutation(sift.shape[0])
        sample, keep = np.sort(picked[:n_sample]), np.sort(picked[n_sample:])
        errors = int(np.count_nonzero(key_a[sample] != key_b[sample]))
        qber = errors / n_sample if n_sample else 0.0
        key_a, key_b = key_a[keep], key_b[keep]
        transcript.append(ClassicalMessage("alice", "bob", "sample", 2 * n_sample))
    else:
        errors = int(np.count_nonzero(key_a != key_b))
        qber = errors / key_a.shape[0] if key_a.shape[0] else 0.0

    m_raw = int(key_a.shape[0])
    rate = _qkd_rate(qber, params.protocol) if m_raw else -1.0
    n_secret = int(math.floor(max(0.0, rate) * m_raw))
    accepted = n_secret > 0

    if params.qkd_postprocessing == "concrete" and accepted:
        # one-way reconciliation with an ideal code sized for the estimate, then Toeplitz PA
        coder = ideal_code(m_raw, min(qber, 0.499))
        leak = coder.n_code - m_raw
        fixed = coder.decode(np.concatenate([key_b, np.zeros(leak, np.uint8)]),
                             np.concatenate([key_a, np.zeros(leak, np.uint8)]))
        seed = rngmod.random_bits(params.stream("pa_seed"), m_raw + n_secret - 1)
        final_a = privacy_amplify(seed, key_a, n_secret)
        final_b = privacy_amplify(seed, fixed.message if fixed.success else key_b, n_secret)
        accepted = bool(fixed.success and np.array_equal(final_a, final_b))
        if not accepted:
            n_secret = 0
        transcript += [
            ClassicalMessage("alice", "bob", "syndrome", leak),
            ClassicalMessage("alice", "bob", "pa_seed", m_raw + n_secret - 1),
        ]

    ledger = TrialLedger(
        protocol=params.protocol.value,
        trial_index=params.trial_index,
        m_raw=m_raw,
        n_secret=n_secret,
        accepted=accepted,
        errors_observed=errors,
        qber_estimate=qber,
        sift_fraction=sift.shape[0] / n,
        transcript=tuple(transcript),
        q_channel=params.q_channel,
        m_param=params.m,
    )
    if keep_trace:
        ledger.trace = {"key_a": key_a, "key_b": key_b}
    return ledger


def run_trial(params: TrialParams, **kwargs) -> TrialLedger:
    if params.protocol.is_qkr:
        return run_qkr_trial(params, **kwargs)
    return run_qkd_trial(params, **kwargs)
