"""Key-sharing-rate laboratory for quantum key recycling and QKD baselines."""

from qkrlab.entropy_rates import (
    DomainError,
    Protocol,
    RateCurve,
    UnsupportedProtocolError,
    bb84_key_rate,
    binary_entropy,
    consumed_key_length,
    figure_data,
    qkd_key_sharing_rate,
    qkr_key_sharing_rate,
    qkr_recycling_rate,
    sharing_rate_delta,
    six_state_key_rate,
    threshold,
)

__version__ = "0.1.0"
