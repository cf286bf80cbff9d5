import random

import pytest
from hypothesis import strategies as st

from tandemsim import BlockingMode, ExplicitList, Scenario

MODES = [m.value for m in BlockingMode]


def lists(*rows):
    return [ExplicitList(r) for r in rows]


def infinite_micro(**kw):
    return Scenario(2, 3, "infinite", lists([1, 1, 1], [2, 1, 3], [1, 4, 1]), **kw)


def blocking_micro(mode, **kw):
    return Scenario(2, 3, mode, lists([1, 1, 1], [1, 1, 1], [5, 5, 5]), capacities=(1, 1), **kw)


def with_mode(sc, mode, capacities=None):
    """Same durations under another blocking mode."""
    caps = None if mode == "infinite" else (capacities or sc.capacities or (1,) * sc.stations)
    return Scenario(sc.stations, sc.customers, mode, sc.sources, capacities=caps, seed=sc.seed,
                    trace=sc.trace, workers=sc.workers)


@st.composite
def scenarios(draw, modes=MODES, max_stations=5, max_customers=50, max_duration=9, max_capacity=3,
              trace=True):
    mode = draw(st.sampled_from(modes))
    N = draw(st.integers(1, max_stations))
    K = draw(st.integers(1, max_customers))
    rows = draw(st.lists(st.lists(st.integers(0, max_duration), min_size=K, max_size=K),
                         min_size=N + 1, max_size=N + 1))
    caps = None
    if mode != "infinite":
        caps = tuple(draw(st.lists(st.integers(1, max_capacity), min_size=N, max_size=N)))
    return Scenario(N, K, mode, [ExplicitList(r) for r in rows], capacities=caps, trace=trace)


@pytest.fixture
def rng():
    return random.Random(12345)
