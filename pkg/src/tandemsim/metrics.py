"""Per-station performance criteria.

The running sums are accumulated inside the wavefront sweep (see
``WavefrontEngine(metrics=True, idle=True)``); this module turns them into
criteria and recomputes the same criteria from a full epoch trace.

Finalization divides in exact rational arithmetic and rounds once, so each
criterion is the correctly rounded value of its defining ratio.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from fractions import Fraction
from typing import Optional

import numpy as np

from .model import BlockingMode, EpochTrace, RunReport, Scenario

CRITERIA = ("S", "W", "T", "U", "J", "Q", "I")


class TraceUnavailable(ValueError):
    pass


@dataclass
class MetricAccumulators:
    """Running sums per station n = 0..N.

    x: sum of (D - A), y: sum of (B - A), z: sum of durations,
    idle: sum of (D - C) under manufacturing or (B - H) under communication.
    Arrays that were not requested are None.
    """

    x: Optional[list] = None
    y: Optional[list] = None
    z: Optional[list] = None
    idle: Optional[list] = None


@dataclass
class CriteriaRecord:
    station: int
    S: Optional[float] = None
    W: Optional[float] = None
    T: Optional[float] = None
    U: Optional[float] = None
    J: Optional[float] = None
    Q: Optional[float] = None
    I: Optional[float] = None

    @property
    def role(self) -> str:
        return "arrivals" if self.station == 0 else "server"

    def as_dict(self) -> dict:
        out = asdict(self)
        out["role"] = self.role
        return out


def _ratio(num, den, exact):
    if den == 0:
        return None  # degenerate horizon
    q = Fraction(num) / Fraction(den)
    return q if exact else float(q)


def criteria_from_sums(n, K, last_departure, system=None, waiting=None, work=None, idle=None,
                       exact=False) -> CriteriaRecord:
    rec = CriteriaRecord(station=n)
    d = last_departure
    if system is not None:
        rec.S = _ratio(system, K, exact)
        rec.W = _ratio(waiting, K, exact)
        rec.T = _ratio(K, d, exact)
        rec.U = _ratio(work, d, exact)
        rec.J = _ratio(system, d, exact)
        rec.Q = _ratio(waiting, d, exact)
    if idle is not None:
        rec.I = _ratio(idle, K, exact)
    return rec


def finalize(acc: MetricAccumulators, departures, K: int, mode: BlockingMode, exact=False) -> list:
    """Criteria for stations 0..N from streamed sums and final departures."""
    records = []
    for n, d in enumerate(departures):
        records.append(criteria_from_sums(
            n, K, d,
            system=acc.x[n] if acc.x is not None else None,
            waiting=acc.y[n] if acc.y is not None else None,
            work=acc.z[n] if acc.z is not None else None,
            idle=acc.idle[n] if acc.idle is not None else None,
            exact=exact))
    return records


def _exact_row_sum(row) -> Fraction:
    return sum((Fraction(float(v)) for v in row), Fraction(0))


def trace_sums(trace: EpochTrace, durations: np.ndarray, mode: BlockingMode) -> dict:
    """Per-station sums behind every criterion, computed exactly from a trace."""
    if trace is None:
        raise TraceUnavailable("a full epoch trace is required")
    A = trace.arrivals()
    out = {"x": [], "y": [], "z": [], "idle": []}
    for n in range(trace.D.shape[0]):
        out["x"].append(_exact_row_sum(trace.D[n]) - _exact_row_sum(A[n]))
        out["y"].append(_exact_row_sum(trace.B[n]) - _exact_row_sum(A[n]))
        out["z"].append(_exact_row_sum(durations[n]))
        if mode is BlockingMode.MANUFACTURING:
            out["idle"].append(_exact_row_sum(trace.D[n]) - _exact_row_sum(trace.C[n]))
        elif mode is BlockingMode.COMMUNICATION:
            out["idle"].append(_exact_row_sum(trace.B[n]) - _exact_row_sum(trace.H[n]))
        else:
            out["idle"].append(None)
    return out


def criteria_from_trace(trace: EpochTrace, durations: np.ndarray, mode: BlockingMode,
                        exact=False) -> list:
    """Criteria recomputed from their definitions on a full trace."""
    sums = trace_sums(trace, durations, mode)
    K = trace.D.shape[1]
    return [criteria_from_sums(n, K, float(trace.D[n, -1]), sums["x"][n], sums["y"][n], sums["z"][n],
                               sums["idle"][n], exact=exact)
            for n in range(trace.D.shape[0])]


def unified_idle(trace: EpochTrace, durations: np.ndarray, exact=False) -> list:
    """Mean idle time per station written only with departures and durations:
    sum_k (D_n^k - max(D_{n-1}^k, D_n^{k-1}) - tau_n^k) / K.
    """
    if trace is None:
        raise TraceUnavailable("a full epoch trace is required")
    D = trace.D
    A = trace.arrivals()
    prev = np.zeros_like(D)
    prev[:, 1:] = D[:, :-1]
    K = D.shape[1]
    out = []
    for n in range(D.shape[0]):
        total = Fraction(0)
        for k in range(K):
            total += Fraction(float(D[n, k])) - Fraction(float(max(A[n, k], prev[n, k]))) - Fraction(float(durations[n, k]))
        out.append(total / K if exact else float(total / K))
    return out


def run_infinite_with_metrics(scenario: Scenario, workers=None, **kw) -> RunReport:
    from .engine import WavefrontEngine
    if scenario.mode is not BlockingMode.INFINITE:
        raise ValueError("scenario is not an infinite-buffer system")
    return WavefrontEngine(scenario, workers, metrics=True, **kw).run()


def run_manufacturing_with_idle(scenario: Scenario, workers=None, **kw) -> RunReport:
    from .engine import WavefrontEngine
    if scenario.mode is not BlockingMode.MANUFACTURING:
        raise ValueError("scenario does not use manufacturing blocking")
    return WavefrontEngine(scenario, workers, idle=True, **kw).run()


def run_communication_with_idle(scenario: Scenario, workers=None, **kw) -> RunReport:
    from .engine import WavefrontEngine
    if scenario.mode is not BlockingMode.COMMUNICATION:
        raise ValueError("scenario does not use communication blocking")
    return WavefrontEngine(scenario, workers, idle=True, **kw).run()
