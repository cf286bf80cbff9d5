import dataclasses
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tandemsim import Constant, Scenario
from tandemsim.engine import (BarrierPool, RingLayout, WavefrontEngine, diagonal_width, rho, run,
                              run_parallel_communication, run_parallel_infinite,
                              run_parallel_manufacturing, substep_count)
from tandemsim.kernels import run_sequential

from conftest import blocking_micro, infinite_micro, lists, scenarios, with_mode


def test_rho_examples():
    assert rho(3, 1, (1,)) == 1
    assert rho(7, 0, (1, 2)) == 0
    assert rho(0, 2, (1, 4)) == 0
    assert rho(5, 3, (1, 2)) == 0  # past the last server


def test_layout_matches_rho():
    caps = (1, 3, 2)
    lay = RingLayout(3, caps)
    assert lay.size == sum(caps) + 3 + 3
    for n in range(-1, 5):
        for k in range(0, 12):
            assert lay.slot(n, k) == lay.off[n + 1] + rho(k, n, caps)


def test_infinite_micro_counts():
    r = run_parallel_infinite(infinite_micro(), 8)
    assert r.departures == [3, 7, 9]
    assert r.counters.parallel_substeps == 2 * (3 + 2)
    r1 = run_parallel_infinite(infinite_micro(), 1)
    assert r1.departures == [3, 7, 9]
    assert r1.counters.parallel_substeps == 2 * 3 * 3


@pytest.mark.parametrize("P", [1, 2, 4, 8])
def test_infinite_micro_any_worker_count(P):
    r = run_parallel_infinite(infinite_micro(trace=True), P)
    assert r.trace.D.tolist() == [[1, 2, 3], [3, 4, 7], [4, 8, 9]]


def test_manufacturing_micro():
    r = run_parallel_manufacturing(blocking_micro("manufacturing", trace=True), 3)
    assert r.trace.D[1:].tolist() == [[2, 3, 7], [7, 12, 17]]
    assert r.counters.parallel_substeps == 3 * (3 + 2)


def test_communication_micro():
    sc = blocking_micro("communication", trace=True)
    r = run_parallel_communication(sc, 1)
    assert r.trace.D[1:].tolist() == [[2, 3, 8], [7, 12, 17]]
    assert r.counters.parallel_substeps == 3 * 3 * 3


def test_zero_durations_leave_cells_zero():
    sc = Scenario(3, 20, "communication", [Constant(0)] * 4, capacities=(1, 2, 1))
    r = run(sc, 2, audit=True)
    assert not any(r.audit)


@pytest.mark.parametrize("mode", ["manufacturing", "communication"])
def test_large_buffers_equal_infinite(mode):
    sc = blocking_micro(mode, trace=True)
    big = dataclasses.replace(sc, capacities=(3, 3))
    inf = run_parallel_infinite(with_mode(sc, "infinite"), 2)
    assert np.array_equal(run(big, 2).trace.D, inf.trace.D)


def test_wrong_mode_rejected():
    with pytest.raises(ValueError):
        run_parallel_manufacturing(infinite_micro())
    with pytest.raises(ValueError):
        WavefrontEngine(infinite_micro(), idle=True)


@settings(max_examples=120, deadline=None)
@given(scenarios(max_stations=8, max_customers=200), st.sampled_from([1, 2, 3, 5, 8, 13]))
def test_parallel_equals_sequential(sc, P):
    seq = run_sequential(sc)
    par = run(sc, P)
    assert par.departures == seq.departures
    assert par.trace.first_divergence(seq.trace) is None


@settings(max_examples=40, deadline=None)
@given(scenarios(max_stations=6, max_customers=60), st.integers(0, 2**32))
def test_lane_order_does_not_matter(sc, seed):
    rng = random.Random(seed)

    def shuffle(lanes):
        rng.shuffle(lanes)
        return lanes

    metrics = dict(metrics=True, idle=sc.finite)
    ref = run(sc, 2, **metrics)
    perm = WavefrontEngine(sc, 2, permute=shuffle, **metrics).run()
    rev = WavefrontEngine(sc, 3, permute=lambda lanes: lanes[::-1], **metrics).run()
    for other in (perm, rev):
        assert other.trace.first_divergence(ref.trace) is None
        assert other.criteria == ref.criteria


@settings(max_examples=25, deadline=None)
@given(scenarios(max_stations=5, max_customers=40), st.sampled_from([1, 2, 3, 8]))
def test_threads_match_serial(sc, P):
    kw = dict(metrics=True, idle=sc.finite)
    a = run(sc, P, **kw)
    b = run(sc, P, executor="threads", **kw)
    assert b.trace.first_divergence(a.trace) is None
    assert a.criteria == b.criteria
    assert a.counters == b.counters


def test_pool_propagates_worker_errors():
    pool = BarrierPool(2)
    try:
        def boom(i, lanes):
            for j in lanes:
                raise RuntimeError("lane failed")
        with pytest.raises(RuntimeError):
            pool.run(boom, 1, 1, 2, 2)
    finally:
        pool._errors.clear()
        pool.close()


@settings(max_examples=60, deadline=None)
@given(scenarios(max_stations=6, max_customers=40, trace=False), st.sampled_from([1, 2, 4, 8]))
def test_audit_ring_safety_and_liveness(sc, P):
    r = run(sc, P, audit=True, metrics=True, idle=sc.finite)
    assert r.audit.violations == []
    # each departure is written exactly once
    N, K = sc.stations, sc.customers
    assert r.audit.writes_per_version == {(n, k): 1 for n in range(N + 1) for k in range(1, K + 1)}


def test_audit_catches_short_ring():
    sc = Scenario(2, 12, "manufacturing", lists([1] * 12, [1] * 12, [5] * 12), capacities=(1, 1))

    def short(k, n, caps):
        return k % caps[n - 1] if caps and 1 <= n <= len(caps) else 0

    r = run(sc, 2, audit=True, rho_fn=short)
    assert r.audit.violations


def test_counter_law_matches_closed_forms():
    for N, K in [(1, 10), (4, 1000), (8, 10)]:
        for s in (2, 3, 5, 7):
            assert substep_count(N, K, N + 1, s) == s * (K + N)
            assert substep_count(N, K, 1, s) == s * (N + 1) * K


def test_diagonal_width_never_exceeds_stations():
    N, K = 4, 9
    widths = [diagonal_width(i, N, K) for i in range(1, K + N + 1)]
    assert max(widths) == N + 1 and sum(widths) == (N + 1) * K


def test_peak_cells_do_not_grow_with_customers():
    cells = set()
    for K in (10, 100, 1000):
        sc = Scenario(3, K, "infinite", [Constant(1)] * 4)
        cells.add(run(sc, 2).counters.peak_live_cells)
    assert cells == {2 * 3 + 3}


def test_finite_peak_cells():
    sc = Scenario(3, 50, "manufacturing", [Constant(1)] * 4, capacities=(2, 1, 4))
    assert run(sc).counters.peak_live_cells == 7 + 3 + 3 + 2 * 4
    assert run(sc, idle=True).counters.peak_live_cells == 7 + 3 + 3 + 3 * 4
