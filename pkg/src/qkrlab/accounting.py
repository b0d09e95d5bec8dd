"""Key-sharing-rate statistics over trial ledgers, and the trial runners behind them."""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Callable, Iterable, Optional, Sequence, Union

from qkrlab.entropy_rates import (
    DomainError,
    Protocol,
    qkd_key_sharing_rate,
    qkr_key_sharing_rate,
)
from qkrlab.protocols import TrialLedger, TrialParams, run_trial


def sharing_rate_of(ledger: TrialLedger, idealized: bool = True) -> float:
    """(n - k)/m for one ledger; ``idealized`` drops the MAC tag from the pad."""
    if ledger.m_raw <= 0:
        raise ValueError("cannot compute a sharing rate with m_raw = 0")
    return ledger.sharing_rate(idealized)


def analytic_rate(protocol: "Protocol | str", q: float, q_predict: Optional[float] = None) -> Optional[float]:
    """Closed-form sharing rate for a sweep point, or None outside the formula's domain."""
    protocol = Protocol.parse(protocol)
    try:
        if protocol.is_qkr:
            return qkr_key_sharing_rate(q if q_predict is None else q_predict, q, protocol)
        return qkd_key_sharing_rate(q, protocol)
    except DomainError:
        return None


@dataclass(frozen=True)
class SweepSummary:
    protocol: str
    q: float
    q_predict: Optional[float]
    m: int
    trials: int
    mean_rate: Optional[float]
    stderr: Optional[float]
    acceptance: float
    analytic_rate: Optional[float]
    abs_error: Optional[float]
    mean_rate_exact: Optional[float]
    mean_qber_estimate: Optional[float]
    mean_sift_fraction: Optional[float]
    include_failures: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


def _mean(xs: Sequence[float]) -> Optional[float]:
    return math.fsum(xs) / len(xs) if xs else None


def _stderr(xs: Sequence[float]) -> Optional[float]:
    if not xs:
        return None
    if len(xs) == 1:
        return 0.0
    return statistics.stdev(xs) / math.sqrt(len(xs))


def aggregate(
    ledgers: Iterable[TrialLedger],
    analytic: Union[None, float, Callable[[], Optional[float]]] = None,
    *,
    include_failures: bool = True,
) -> SweepSummary:
    """
    Summarize ledgers from one sweep point.

    Ledgers are reduced in trial-index order, so the result does not depend
    on input order. ``analytic`` defaults to the closed-form rate for the
    ledgers' (protocol, q, q_predict). With ``include_failures=False``
    rejected trials are left out of the mean rates.
    """
    rows = sorted(ledgers, key=lambda lg: lg.trial_index)
    if not rows:
        raise ValueError("aggregate needs at least one ledger")
    first = rows[0]
    signature = (first.protocol, first.q_channel, first.q_predict, first.m_param)
    for lg in rows[1:]:
        if (lg.protocol, lg.q_channel, lg.q_predict, lg.m_param) != signature:
            raise ValueError("ledgers mix protocols or parameters")
    indices = [lg.trial_index for lg in rows]
    if len(set(indices)) != len(indices):
        raise ValueError("duplicate trial indices")

    used = rows if include_failures else [lg for lg in rows if lg.accepted]
    ideal = [lg.sharing_rate(True) for lg in used if lg.m_raw > 0]
    exact = [lg.sharing_rate(False) for lg in used if lg.m_raw > 0]
    qbers = [lg.qber_estimate for lg in rows if lg.qber_estimate is not None]
    sifts = [lg.sift_fraction for lg in rows if lg.sift_fraction is not None]

    if analytic is None:
        ref = analytic_rate(first.protocol, first.q_channel, first.q_predict)
    elif callable(analytic):
        ref = analytic()
    else:
        ref = float(analytic)
    mean = _mean(ideal)
    return SweepSummary(
        protocol=first.protocol,
        q=first.q_channel,
        q_predict=first.q_predict,
        m=first.m_param,
        trials=len(rows),
        mean_rate=mean,
        stderr=_stderr(ideal),
        acceptance=sum(lg.accepted for lg in rows) / len(rows),
        analytic_rate=ref,
        abs_error=None if ref is None or mean is None else abs(mean - ref),
        mean_rate_exact=_mean(exact),
        mean_qber_estimate=_mean(qbers),
        mean_sift_fraction=_mean(sifts),
        include_failures=include_failures,
    )


def _run_params(params: TrialParams) -> TrialLedger:
    return run_trial(params)


def run_trials(template: TrialParams, trials: int, workers: int = 1) -> list[TrialLedger]:
    """Run trial indices 0..trials-1 of ``template``; output is in index order."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    jobs = [replace(template, trial_index=i) for i in range(trials)]
    return run_jobs(jobs, workers)


def run_jobs(jobs: Sequence[TrialParams], workers: int = 1) -> list[TrialLedger]:
    if workers <= 1 or len(jobs) <= 1:
        return [_run_params(p) for p in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, len(jobs) // (4 * workers))
        return list(pool.map(_run_params, jobs, chunksize=chunk))


def run_sweep(
    template: TrialParams,
    qs: Sequence[float],
    q_predicts: Optional[Sequence[Optional[float]]] = None,
    trials: int = 10,
    workers: int = 1,
    *,
    include_failures: bool = True,
) -> list[SweepSummary]:
    """
    Simulate every (q, q_predict) grid point and summarize each.

    ``q_predicts=None`` pairs each q with q_predict = q for QKR protocols.
    Rows come back in lexicographic (q, q_predict) order; each point uses
    trial indices 0..trials-1 under the template's master seed.
    """
    protocol = template.protocol
    if protocol.is_qkr:
        points = (
            [(q, q) for q in qs]
            if q_predicts is None
            else [(q, qp) for q in qs for qp in q_predicts]
        )
    else:
        points = [(q, None) for q in qs]
    points = sorted(set(points), key=lambda p: (p[0], -1.0 if p[1] is None else p[1]))
    jobs = [
        replace(template, q_channel=q, q_predict=qp, trial_index=i)
        for q, qp in points
        for i in range(trials)
    ]
    ledgers = run_jobs(jobs, workers)
    return [
        aggregate(ledgers[k * trials : (k + 1) * trials], include_failures=include_failures)
        for k in range(len(points))
    ]
