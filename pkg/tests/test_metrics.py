from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings

from tandemsim import Constant, Exponential, Scenario, ServiceTimes, Uniform
from tandemsim.engine import run
from tandemsim.metrics import (TraceUnavailable, criteria_from_trace, finalize, run_communication_with_idle,
                               run_infinite_with_metrics, run_manufacturing_with_idle, unified_idle)

from conftest import blocking_micro, lists, scenarios, with_mode


def durations(sc):
    return ServiceTimes(sc.sources, sc.seed).matrix(sc.customers)


def test_single_server_criteria():
    # B_1 = [1, 3], D_1 = [3, 5]
    sc = Scenario(1, 2, "infinite", lists([1, 1], [2, 2]), trace=True)
    r = run_infinite_with_metrics(sc, 2)
    assert r.trace.B[1].tolist() == [1, 3] and r.trace.D[1].tolist() == [3, 5]
    c = r.criteria[1]
    assert (c.S, c.W, c.T, c.U, c.J, c.Q) == (2.5, 0.5, 0.4, 0.8, 1.0, 0.2)
    assert c.J == c.S * c.T and c.Q == c.W * c.T
    assert c.I is None


def test_arrival_stream_always_busy():
    sc = Scenario(3, 40, "infinite", [Exponential(1.0), Uniform(0, 1), Constant(0.3), Exponential(2.0)], seed=8)
    r = run_infinite_with_metrics(sc, 3)
    assert r.criteria[0].U == 1.0
    assert r.criteria[0].role == "arrivals" and r.criteria[1].role == "server"


def test_manufacturing_idle_micro():
    r = run_manufacturing_with_idle(blocking_micro("manufacturing"), 3)
    assert [c.I for c in r.criteria] == [0.0, 1.0, 0.0]
    assert r.counters.parallel_substeps == 5 * (3 + 2)


def test_communication_idle_micro():
    r = run_communication_with_idle(blocking_micro("communication"), 3)
    assert r.criteria[1].I == 4 / 3
    assert r.criteria[2].I == 0.0


@pytest.mark.parametrize("mode", ["manufacturing", "communication"])
def test_no_idle_without_blocking(mode):
    sc = Scenario(3, 6, mode, lists(*[[1, 4, 2, 0, 3, 1]] * 4), capacities=(6, 6, 6))
    assert all(c.I == 0 for c in run(sc, 2, idle=True).criteria)


@pytest.mark.parametrize("mode", ["manufacturing", "communication"])
def test_single_customer_never_idle(mode):
    sc = Scenario(2, 1, mode, lists([3], [1], [2]), capacities=(1, 1))
    assert all(c.I == 0 for c in run(sc, 1, idle=True).criteria)


def test_zero_work_gives_undefined_rates():
    sc = Scenario(2, 5, "infinite", [Constant(0)] * 3)
    c = run_infinite_with_metrics(sc).criteria[1]
    assert c.S == 0 and c.W == 0
    assert c.T is None and c.U is None and c.J is None and c.Q is None
    sc = Scenario(2, 5, "manufacturing", [Constant(0)] * 3, capacities=(1, 1))
    assert all(c.I == 0 for c in run_manufacturing_with_idle(sc).criteria)


def test_unified_idle_matches_manufacturing_micro():
    sc = blocking_micro("manufacturing", trace=True)
    r = run(sc, 1, idle=True)
    assert unified_idle(r.trace, durations(sc)) == [0.0, 1.0, 0.0]


def test_unified_idle_zero_for_infinite_buffers():
    sc = Scenario(3, 30, "infinite", [Exponential(1.0)] * 4, seed=3, trace=True)
    # D = B + tau, so only float rounding of the addition remains
    assert unified_idle(run(sc, 2).trace, durations(sc)) == pytest.approx([0] * 4, abs=1e-12)
    sc = Scenario(3, 30, "infinite", lists(*[[k % 4 for k in range(30)]] * 4), trace=True)
    assert unified_idle(run(sc, 2).trace, durations(sc), exact=True) == [0] * 4


def test_unified_idle_needs_trace():
    with pytest.raises(TraceUnavailable):
        unified_idle(None, np.zeros((1, 1)))
    with pytest.raises(TraceUnavailable):
        criteria_from_trace(None, np.zeros((1, 1)), None)


def test_finalize_exact_fractions():
    from tandemsim.metrics import MetricAccumulators
    acc = MetricAccumulators(x=[1.0], y=[0.0], z=[1.0])
    rec = finalize(acc, [3.0], 3, None, exact=True)[0]
    assert rec.S == Fraction(1, 3) and rec.J == rec.S * rec.T


@settings(max_examples=120, deadline=None)
@given(scenarios())
def test_streaming_sums_equal_trace_definitions(sc):
    r = run(sc, 3, metrics=True, idle=sc.finite)
    tau = durations(sc)
    recomputed = criteria_from_trace(r.trace, tau, sc.mode)
    for mine, ref in zip(r.criteria, recomputed):
        assert mine == ref
    if sc.mode.value == "manufacturing":
        assert [c.I for c in r.criteria] == unified_idle(r.trace, tau)


@settings(max_examples=80, deadline=None)
@given(scenarios(modes=["communication"]))
def test_unified_idle_equals_communication_idle(sc):
    # follows from D = B + tau and H = max(D_{n-1}^k, D_n^{k-1})
    r = run(sc, 2, idle=True)
    assert [c.I for c in r.criteria] == unified_idle(r.trace, durations(sc))


@settings(max_examples=120, deadline=None)
@given(scenarios())
def test_identities(sc):
    r = run(sc, 2, metrics=True)
    exact = finalize(r.accumulators, r.departures, sc.customers, sc.mode, exact=True)
    for c, q in zip(r.criteria, exact):
        if q.T is None:
            continue
        assert q.J == q.S * q.T and q.Q == q.W * q.T
        assert 0 <= c.U <= 1 and 0 <= c.W <= c.S and c.Q <= c.J
        assert c.J == pytest.approx(c.S * c.T, rel=1e-12)
    if sc.mode.value == "infinite":
        for n in range(sc.stations + 1):
            assert r.accumulators.x[n] - r.accumulators.y[n] == r.accumulators.z[n]


def test_identities_on_random_durations():
    sc = Scenario(4, 3000, "communication", [Exponential(1.0), Exponential(1.3), Uniform(0.1, 1.2),
                                             Exponential(2.0), Uniform(0.3, 0.9)], capacities=(1, 2, 1, 3), seed=17)
    r = run(sc, 3, metrics=True, idle=True)
    for c in r.criteria:
        assert c.J == pytest.approx(c.S * c.T, rel=1e-12)
        assert c.Q == pytest.approx(c.W * c.T, rel=1e-12)
        assert 0 <= c.U <= 1 and c.W <= c.S


def test_metrics_for_finite_modes_match_infinite_when_unblocked():
    sc = Scenario(2, 8, "infinite", lists([1, 2, 1, 3, 1, 1, 2, 1], [2] * 8, [1, 3, 1, 1, 2, 2, 1, 1]))
    inf = run(sc, metrics=True).criteria
    for mode in ("manufacturing", "communication"):
        big = with_mode(sc, mode, (8, 8))
        assert [dict(c.as_dict(), I=None) for c in run(big, metrics=True).criteria] == [c.as_dict() for c in inf]
