"""Sequential wavefront kernels.

All loops visit diagonal i = n + k in increasing order and, inside a
diagonal, customers j = max(1, i-N) .. min(i, K) in increasing order, so
station n = i - j is visited from the last server back to station 0. The
in-place updates below rely on that direction: station n reads the cell of
station n-1 before station n-1 overwrites it on the same diagonal.
"""

from __future__ import annotations

import time

import numpy as np

from .model import BlockingMode, RunReport, EpochTrace, StepCounters, Scenario, validate
from .variates import ServiceTimes
from .engine import RingLayout, diagonal_bounds


def _prepare(scenario: Scenario, mode: BlockingMode):
    if scenario.mode is not mode:
        raise ValueError(f"{mode.value} kernel called with a {scenario.mode.value} scenario")
    warnings = validate(scenario)
    trace = EpochTrace.empty(scenario.stations, scenario.customers, mode) if scenario.trace else None
    return warnings, ServiceTimes(scenario.sources, scenario.seed), trace


def infinite_two_step(scenario: Scenario) -> RunReport:
    """Infinite buffers, separate service-start and departure updates."""
    t0 = time.perf_counter()
    warnings, tau, trace = _prepare(scenario, BlockingMode.INFINITE)
    N, K = scenario.stations, scenario.customers
    # d[n + 1] holds station n; d[0] is the virtual station -1
    d = [0.0] * (N + 2)
    b = [0.0] * (N + 1)
    ops = 0
    for i in range(1, K + N + 1):
        j0, J = diagonal_bounds(i, N, K)
        for j in range(j0, J + 1):
            n = i - j
            b[n] = max(d[n], d[n + 1])
            d[n + 1] = b[n] + tau.value(n, j)
            ops += 2
            if trace is not None:
                trace.B[n, j - 1] = b[n]
                trace.D[n, j - 1] = d[n + 1]
    counters = StepCounters(arithmetic_ops=ops, peak_live_cells=len(d) + len(b))
    return RunReport(scenario, "infinite-two-step", d[1:], counters, trace=trace,
                     warnings=warnings, wall_clock=time.perf_counter() - t0)


def infinite_fused(scenario: Scenario) -> RunReport:
    """Infinite buffers, single in-place update per (n, k); N+2 live cells."""
    t0 = time.perf_counter()
    warnings, tau, trace = _prepare(scenario, BlockingMode.INFINITE)
    N, K = scenario.stations, scenario.customers
    d = [0.0] * (N + 2)
    ops = 0
    for i in range(1, K + N + 1):
        j0, J = diagonal_bounds(i, N, K)
        for j in range(j0, J + 1):
            n = i - j
            d[n + 1] = max(d[n], d[n + 1]) + tau.value(n, j)
            ops += 2
            if trace is not None:
                trace.D[n, j - 1] = d[n + 1]
    if trace is not None:
        # service starts are implied by the departures
        A = trace.arrivals()
        trace.B[:, 0] = A[:, 0]
        trace.B[:, 1:] = np.maximum(A[:, 1:], trace.D[:, :-1])
    counters = StepCounters(arithmetic_ops=ops, peak_live_cells=len(d))
    return RunReport(scenario, "infinite-fused", d[1:], counters, trace=trace,
                     warnings=warnings, wall_clock=time.perf_counter() - t0)


def _finite(scenario: Scenario, mode: BlockingMode, name: str) -> RunReport:
    t0 = time.perf_counter()
    warnings, tau, trace = _prepare(scenario, mode)
    N, K = scenario.stations, scenario.customers
    ring = RingLayout(N, scenario.capacities)
    cells = [0.0] * ring.size
    slot = ring.slot
    manufacturing = mode is BlockingMode.MANUFACTURING
    ops = 0
    for i in range(1, K + N + 1):
        j0, J = diagonal_bounds(i, N, K)
        for j in range(j0, J + 1):
            n = i - j
            ready = max(cells[slot(n - 1, j)], cells[slot(n, j - 1)])
            # D_{n+1}^{j - m_{n+1} - 1} shares its slot with D_{n+1}^j
            freed = cells[slot(n + 1, j)]
            if manufacturing:
                start = ready
                done = start + tau.value(n, j)
                dep = max(done, freed)
            else:
                start = max(ready, freed)
                dep = start + tau.value(n, j)
            cells[slot(n, j)] = dep
            ops += 3
            if trace is not None:
                trace.B[n, j - 1] = start
                trace.D[n, j - 1] = dep
                if manufacturing:
                    trace.C[n, j - 1] = done
                else:
                    trace.H[n, j - 1] = ready
    departures = [cells[slot(n, K)] for n in range(N + 1)]
    counters = StepCounters(arithmetic_ops=ops, peak_live_cells=ring.size)
    return RunReport(scenario, name, departures, counters, trace=trace,
                     warnings=warnings, wall_clock=time.perf_counter() - t0)


def manufacturing_sequential(scenario: Scenario) -> RunReport:
    return _finite(scenario, BlockingMode.MANUFACTURING, "manufacturing-sequential")


def communication_sequential(scenario: Scenario) -> RunReport:
    return _finite(scenario, BlockingMode.COMMUNICATION, "communication-sequential")


def run_sequential(scenario: Scenario) -> RunReport:
    if scenario.mode is BlockingMode.INFINITE:
        return infinite_two_step(scenario)
    if scenario.mode is BlockingMode.MANUFACTURING:
        return manufacturing_sequential(scenario)
    return communication_sequential(scenario)
