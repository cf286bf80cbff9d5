"""Barrier-synchronized wavefront engine with cyclic departure storage.

Every diagonal i = n + k is evaluated as a fixed list of substeps. A substep
touches each (n, k) of the diagonal exactly once and only writes cells owned
by station n, so its lanes can run in any order or concurrently; substeps are
separated by full barriers. A diagonal wider than the worker count P runs
each substep as ceil(width / P) consecutive groups of at most P lanes.

Departures of server n live in m_n + 1 cells used cyclically (slot
``k mod (m_n + 1)``); the arrival stream, the virtual station -1 and the
virtual station N+1 get one cell each. With infinite buffers every station
keeps a single cell.
"""

from __future__ import annotations

import functools
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional

from .model import BlockingMode, EpochTrace, RunReport, Scenario, StepCounters, validate
from .variates import ServiceTimes


def diagonal_bounds(i: int, stations: int, customers: int) -> tuple[int, int]:
    """First and last customer index on diagonal ``i``."""
    return max(1, i - stations), min(i, customers)


def diagonal_width(i: int, stations: int, customers: int) -> int:
    j0, J = diagonal_bounds(i, stations, customers)
    return J - j0 + 1


def substep_count(stations: int, customers: int, workers: int, per_diagonal: int) -> int:
    """Barrier-delimited steps needed by a plan of ``per_diagonal`` substeps."""
    return sum(per_diagonal * -(-diagonal_width(i, stations, customers) // workers)
               for i in range(1, stations + customers + 1))


def rho(k: int, n: int, capacities) -> int:
    """Ring slot holding D_n^k: ``k mod (m_n + 1)`` for a server, else 0."""
    if capacities is not None and 1 <= n <= len(capacities):
        return k % (capacities[n - 1] + 1)
    return 0


class RingLayout:
    """Flat cell layout for stations -1..N+1 (N+1 only with finite buffers)."""

    def __init__(self, stations: int, capacities=None):
        self.stations = stations
        self.capacities = tuple(capacities) if capacities is not None else None
        sizes = [1, 1]  # stations -1 and 0
        sizes += [(m + 1) for m in self.capacities] if self.capacities else [1] * stations
        if self.capacities is not None:
            sizes.append(1)  # station N+1
        self.mod = sizes
        self.off = [0] * len(sizes)
        for s in range(1, len(sizes)):
            self.off[s] = self.off[s - 1] + sizes[s - 1]
        self.size = sum(sizes)
        self.station_of = [s - 1 for s, width in enumerate(sizes) for _ in range(width)]

    def slot(self, n: int, k: int) -> int:
        return self.off[n + 1] + k % self.mod[n + 1]

    def with_rho(self, fn) -> Callable[[int, int], int]:
        """Slot function using a substitute index function (fault injection)."""
        off, caps = self.off, self.capacities

        def slot(n, k):
            return off[n + 1] + fn(k, n, caps)
        return slot


class SerialExecutor:
    """Runs the lane groups of a substep one after another in this thread.

    ``permute`` may reorder the lanes of every substep; results must not
    change, which is how lane-order independence is tested.
    """

    def __init__(self, permute: Optional[Callable[[list], list]] = None):
        self.permute = permute

    def run(self, fn, i: int, j0: int, J: int, P: int) -> None:
        if self.permute is None:
            for lo in range(j0, J + 1, P):
                fn(i, range(lo, min(lo + P, J + 1)))
            return
        lanes = self.permute(list(range(j0, J + 1)))
        for lo in range(0, len(lanes), P):
            fn(i, lanes[lo:lo + P])

    def close(self) -> None:
        pass


class BarrierPool:
    """A fixed pool of worker threads driven one substep at a time.

    Worker w executes lanes j0+w, j0+w+W, ... of the substep (W = pool size),
    i.e. position w of each consecutive group. The coordinator waits on a
    barrier before and after every substep, which is the only synchronization.
    """

    def __init__(self, workers: int):
        self.workers = workers
        self._start = threading.Barrier(workers + 1)
        self._done = threading.Barrier(workers + 1)
        self._task = None
        self._errors = []
        self._threads = [threading.Thread(target=self._loop, args=(w,), daemon=True,
                                          name=f"wavefront-{w}") for w in range(workers)]
        for t in self._threads:
            t.start()

    def _loop(self, w: int) -> None:
        stride = self.workers
        while True:
            self._start.wait()
            task = self._task
            if task is None:
                return
            fn, i, j0, J = task
            try:
                fn(i, range(j0 + w, J + 1, stride))
            except BaseException as exc:  # re-raised by the coordinator
                self._errors.append(exc)
            self._done.wait()

    def run(self, fn, i: int, j0: int, J: int, P: int) -> None:
        self._task = (fn, i, j0, J)
        self._start.wait()
        self._done.wait()
        if self._errors:
            raise self._errors[0]

    def close(self) -> None:
        if self._task is False:
            return
        self._task = None
        self._start.wait()
        for t in self._threads:
            t.join()
        self._task = False


@dataclass
class Substep:
    name: str
    fn: Callable
    # which departure versions the substep reads: "pred" (D_{n-1}^k, D_n^{k-1}),
    # "block" (D_{n+1}^{k-m-1}), "own" (D_n^k) or None
    reads: Optional[str] = None
    ops: int = 1


class CellAudit(list):
    """Cell storage that checks every access against the wavefront contract.

    Each cell carries the customer index of the value it holds. A read must
    find exactly the version its substep needs (or the initial zero when that
    version is <= 0), and no cell may be both read and written in one substep.
    """

    def __init__(self, layout: RingLayout, customers: int):
        super().__init__([0.0] * layout.size)
        self.layout = layout
        self.customers = customers
        self.tags = [0] * layout.size
        self.violations = []
        self.writes_per_version = {}
        self.i = 0
        self.step = None
        self._reads, self._writes = set(), set()

    def begin(self, i: int, step: Optional[Substep]) -> None:
        self.i, self.step = i, step
        self._reads, self._writes = set(), set()

    def end(self) -> None:
        clash = self._reads & self._writes
        if clash:
            self.violations.append(f"diagonal {self.i} {self.step.name}: cells {sorted(clash)} read and written")

    def _expected(self, s: int) -> int:
        if s == -1 or s == self.layout.stations + 1:
            return 0
        kind = self.step.reads
        if kind == "pred":
            v = self.i - s - 1
        elif kind == "block":
            v = self.i - s - self.layout.capacities[s - 1]
        elif kind == "own":
            v = self.i - s
        else:
            raise AssertionError(f"substep {self.step.name} is not declared to read cells")
        return max(v, 0)

    def __getitem__(self, idx):
        if self.step is not None:
            s = self.layout.station_of[idx]
            want = self._expected(s)
            if self.tags[idx] != want:
                self.violations.append(f"diagonal {self.i} {self.step.name}: station {s} cell {idx} "
                                       f"holds customer {self.tags[idx]}, needed {want}")
            self._reads.add(idx)
        return list.__getitem__(self, idx)

    def __setitem__(self, idx, value):
        if self.step is not None:
            s = self.layout.station_of[idx]
            version = self.i - s
            if idx != self.layout.off[s + 1] + rho(version, s, self.layout.capacities):
                self.violations.append(f"diagonal {self.i}: D_{s}^{version} stored in wrong cell {idx}")
            self.tags[idx] = version
            self.writes_per_version[(s, version)] = self.writes_per_version.get((s, version), 0) + 1
            self._writes.add(idx)
        list.__setitem__(self, idx, value)


def default_workers() -> int:
    env = os.environ.get("TANDEMSIM_WORKERS")
    if env:
        return int(env)
    return os.cpu_count() or 1


class WavefrontEngine:
    """Evaluates a scenario diagonal by diagonal with P-wide substeps.

    ``metrics`` adds the running sums behind S, W, T, U, J, Q; ``idle`` adds
    the blocked-time sum of a finite-buffer mode. ``executor`` is "serial"
    (lane groups run in the calling thread) or "threads" (a pool of
    min(P, N+1) workers); both produce identical results and counters.
    """

    def __init__(self, scenario: Scenario, workers: Optional[int] = None, *, metrics: bool = False,
                 idle: bool = False, executor: str = "serial", permute=None, rho_fn=None,
                 audit: bool = False):
        self.warnings = validate(scenario)
        if idle and scenario.mode is BlockingMode.INFINITE:
            raise ValueError("idle time is only defined for finite-buffer modes")
        self.scenario = scenario
        self.P = workers if workers is not None else scenario.workers
        if self.P < 1:
            raise ValueError(f"worker count must be >= 1, got {self.P}")
        self.metrics, self.idle = metrics, idle
        self.executor_kind = executor
        self.permute = permute
        self.layout = RingLayout(scenario.stations, scenario.capacities if scenario.finite else None)
        self.slot = self.layout.slot if rho_fn is None else self.layout.with_rho(rho_fn)
        self.audit = audit
        self.tau = ServiceTimes(scenario.sources, scenario.seed)

    @property
    def algorithm(self) -> str:
        name = {BlockingMode.INFINITE: "infinite-parallel", BlockingMode.MANUFACTURING: "manufacturing-parallel",
                BlockingMode.COMMUNICATION: "communication-parallel"}[self.scenario.mode]
        if self.metrics:
            name += "+metrics"
        if self.idle:
            name += "+idle"
        return name

    def _make_executor(self):
        if self.executor_kind == "serial":
            return SerialExecutor(self.permute)
        if self.executor_kind == "threads":
            if self.permute is not None:
                raise ValueError("lane permutation is only supported by the serial executor")
            return BarrierPool(min(self.P, self.scenario.stations + 1))
        raise ValueError(f"unknown executor {self.executor_kind!r}")

    def _plan(self, cells, t, arrays):
        """Substep list for one diagonal; ``arrays`` receives the scratch arrays."""
        N = self.scenario.stations
        mode = self.scenario.mode
        slot = self.slot

        def new(name):
            arrays[name] = [0.0] * (N + 1)
            return arrays[name]

        if mode is BlockingMode.INFINITE:
            b = new("b")

            def start(i, lanes):
                for j in lanes:
                    n = i - j
                    b[n] = max(cells[slot(n - 1, j)], cells[slot(n, j - 1)])

            def depart(i, lanes):
                for j in lanes:
                    n = i - j
                    cells[slot(n, j)] = b[n] + t[n]

            core = [Substep("b", start, "pred"), Substep("d", depart)]
        elif mode is BlockingMode.MANUFACTURING:
            b, c = new("b"), new("c")

            def start(i, lanes):
                for j in lanes:
                    n = i - j
                    b[n] = max(cells[slot(n - 1, j)], cells[slot(n, j - 1)])

            def complete(i, lanes):
                for j in lanes:
                    n = i - j
                    c[n] = b[n] + t[n]

            def depart(i, lanes):
                for j in lanes:
                    n = i - j
                    cells[slot(n, j)] = max(c[n], cells[slot(n + 1, j)])

            core = [Substep("b", start, "pred"), Substep("c", complete), Substep("d", depart, "block")]
            if self.idle:
                idle = new("idle")

                def idle_sub(i, lanes):
                    for j in lanes:
                        n = i - j
                        idle[n] -= c[n]

                def idle_add(i, lanes):
                    for j in lanes:
                        n = i - j
                        idle[n] += cells[slot(n, j)]

                core = core[:2] + [Substep("idle-=c", idle_sub)] + core[2:] + [Substep("idle+=d", idle_add, "own")]
        else:
            h, b = new("h"), new("b")

            def ready(i, lanes):
                for j in lanes:
                    n = i - j
                    h[n] = max(cells[slot(n - 1, j)], cells[slot(n, j - 1)])

            def start(i, lanes):
                for j in lanes:
                    n = i - j
                    b[n] = max(h[n], cells[slot(n + 1, j)])

            def depart(i, lanes):
                for j in lanes:
                    n = i - j
                    cells[slot(n, j)] = b[n] + t[n]

            core = [Substep("h", ready, "pred"), Substep("b", start, "block"), Substep("d", depart)]
            if self.idle:
                idle = new("idle")

                def idle_sub(i, lanes):
                    for j in lanes:
                        n = i - j
                        idle[n] -= h[n]

                def idle_add(i, lanes):
                    for j in lanes:
                        n = i - j
                        idle[n] += b[n]

                core = core[:1] + [Substep("idle-=h", idle_sub), core[1], Substep("idle+=b", idle_add), core[2]]

        if not self.metrics:
            return core

        b = arrays["b"]
        x, y, z = new("x"), new("y"), new("z")

        def x_sub(i, lanes):
            for j in lanes:
                n = i - j
                x[n] -= cells[slot(n - 1, j)]

        def y_sub(i, lanes):
            for j in lanes:
                n = i - j
                y[n] -= cells[slot(n - 1, j)]

        def x_add(i, lanes):
            for j in lanes:
                n = i - j
                x[n] += cells[slot(n, j)]

        def y_add(i, lanes):
            for j in lanes:
                n = i - j
                y[n] += b[n]

        def z_add(i, lanes):
            for j in lanes:
                n = i - j
                z[n] += t[n]

        return ([Substep("x-=a", x_sub, "pred"), Substep("y-=a", y_sub, "pred")] + core
                + [Substep("x+=d", x_add, "own"), Substep("y+=b", y_add), Substep("z+=tau", z_add)])

    def run(self) -> RunReport:
        t0 = time.perf_counter()
        sc = self.scenario
        N, K, P = sc.stations, sc.customers, self.P
        cells = CellAudit(self.layout, K) if self.audit else [0.0] * self.layout.size
        peek = functools.partial(list.__getitem__, cells)
        t = [0.0] * (N + 1)  # durations of the current diagonal, staged before the barriers
        arrays = {}
        plan = self._plan(cells, t, arrays)
        ops_per_lane = sum(s.ops for s in plan)
        trace = EpochTrace.empty(N, K, sc.mode) if sc.trace else None
        tau = self.tau.value
        slot = self.slot
        ops = substeps = 0
        executor = self._make_executor()
        try:
            for i in range(1, K + N + 1):
                j0, J = diagonal_bounds(i, N, K)
                for j in range(j0, J + 1):
                    t[i - j] = tau(i - j, j)
                groups = -(-(J - j0 + 1) // P)
                for step in plan:
                    if self.audit:
                        cells.begin(i, step)
                    executor.run(step.fn, i, j0, J, P)
                    if self.audit:
                        cells.end()
                substeps += groups * len(plan)
                ops += (J - j0 + 1) * ops_per_lane
                if trace is not None:
                    self._record(trace, arrays, peek, i, j0, J)
        finally:
            executor.close()

        departures = [peek(slot(n, K)) for n in range(N + 1)]
        counters = StepCounters(arithmetic_ops=ops, parallel_substeps=substeps,
                                peak_live_cells=self.layout.size + len(arrays) * (N + 1))
        report = RunReport(sc, self.algorithm, departures, counters, trace=trace,
                           warnings=list(self.warnings))
        if self.metrics or self.idle:
            from .metrics import MetricAccumulators, finalize
            acc = MetricAccumulators(x=arrays.get("x"), y=arrays.get("y"), z=arrays.get("z"),
                                     idle=arrays.get("idle"))
            report.accumulators = acc
            report.criteria = finalize(acc, departures, K, sc.mode)
        if self.audit:
            report.audit = cells
        report.wall_clock = time.perf_counter() - t0
        return report

    def _record(self, trace, arrays, peek, i, j0, J):
        mode = self.scenario.mode
        for j in range(j0, J + 1):
            n = i - j
            trace.D[n, j - 1] = peek(self.slot(n, j))
            trace.B[n, j - 1] = arrays["b"][n]
            if mode is BlockingMode.MANUFACTURING:
                trace.C[n, j - 1] = arrays["c"][n]
            elif mode is BlockingMode.COMMUNICATION:
                trace.H[n, j - 1] = arrays["h"][n]


def run_parallel_infinite(scenario: Scenario, workers: Optional[int] = None, **kw) -> RunReport:
    if scenario.mode is not BlockingMode.INFINITE:
        raise ValueError("scenario is not an infinite-buffer system")
    return WavefrontEngine(scenario, workers, **kw).run()


def run_parallel_manufacturing(scenario: Scenario, workers: Optional[int] = None, **kw) -> RunReport:
    if scenario.mode is not BlockingMode.MANUFACTURING:
        raise ValueError("scenario does not use manufacturing blocking")
    return WavefrontEngine(scenario, workers, **kw).run()


def run_parallel_communication(scenario: Scenario, workers: Optional[int] = None, **kw) -> RunReport:
    if scenario.mode is not BlockingMode.COMMUNICATION:
        raise ValueError("scenario does not use communication blocking")
    return WavefrontEngine(scenario, workers, **kw).run()


def run(scenario: Scenario, workers: Optional[int] = None, **kw) -> RunReport:
    return WavefrontEngine(scenario, workers, **kw).run()
