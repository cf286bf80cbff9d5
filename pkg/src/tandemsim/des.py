"""Event-driven reference simulator for the same tandem systems.

This is deliberately written from the operational description of the
queues (customers move, servers start, finish, block and release) and never
from the departure-time recursions, so it can serve as an independent
oracle for the wavefront engines.

Station 0 is the arrival stream: a server whose queue holds all K
customers from time 0 and whose "service" is the interarrival time. A
buffer of capacity m at server n holds m waiting customers; together with
the one in service (or held after service) at most m + 1 customers are at
station n at any time.
"""

from __future__ import annotations

import enum
import heapq
from collections import deque
from dataclasses import dataclass, field

from .model import BlockingMode, EpochTrace, Scenario, validate
from .variates import ServiceTimes


class Kind(enum.IntEnum):
    # lower value = handled first among events at the same time and station
    DEPARTURE = 0
    UNBLOCK = 1
    SERVICE_END = 2
    ARRIVAL = 3
    SERVICE_START = 4


@dataclass(order=True)
class Event:
    time: float
    neg_station: int
    kind: Kind
    seq: int
    customer: int = field(compare=False, default=0)

    @property
    def station(self) -> int:
        return -self.neg_station


class TandemDES:
    def __init__(self, scenario: Scenario):
        validate(scenario)
        self.sc = scenario
        self.N, self.K = scenario.stations, scenario.customers
        self.mode = scenario.mode
        self.tau = ServiceTimes(scenario.sources, scenario.seed)
        self.trace = EpochTrace.empty(self.N, self.K, self.mode)
        self.H = self.trace.H if self.trace.H is not None else [[None] * self.K for _ in range(self.N + 1)]
        self.queue = [deque() for _ in range(self.N + 1)]
        self.queue[0].extend(range(1, self.K + 1))
        self.in_service = [None] * (self.N + 1)  # customer being served
        self.held = [None] * (self.N + 1)  # finished but blocked (manufacturing)
        self.occupancy = [0] * (self.N + 2)  # customers present at each station
        self.seen_ready = [set() for _ in range(self.N + 1)]
        self.events = []
        self.log = []
        self._seq = 0
        self.now = 0.0

    # -- helpers -----------------------------------------------------------

    def push(self, time, kind, station, customer=0):
        self._seq += 1
        heapq.heappush(self.events, Event(time, -station, kind, self._seq, customer))

    def limit(self, n):
        """Maximum number of customers station n may hold, None if unbounded."""
        if self.mode is BlockingMode.INFINITE or n < 1 or n > self.N:
            return None
        return self.sc.capacities[n - 1] + 1

    def has_room(self, n):
        cap = self.limit(n)
        return cap is None or self.occupancy[n] < cap

    def server_free(self, n):
        return self.in_service[n] is None and self.held[n] is None

    # -- state changes -----------------------------------------------------

    def leave(self, n, k):
        """Customer k departs station n and enters station n+1 at once."""
        t = self.now
        self.trace.D[n, k - 1] = t
        self.held[n] = None
        self.in_service[n] = None
        if n > 0:
            self.occupancy[n] -= 1
        if n < self.N:
            self.occupancy[n + 1] += 1
            self.push(t, Kind.ARRIVAL, n + 1, k)
        # this server may take its next customer; the upstream server may
        # have been waiting for the place just freed
        self.push(t, Kind.SERVICE_START, n)
        if n > 0:
            self.push(t, Kind.UNBLOCK, n - 1)
            self.push(t, Kind.SERVICE_START, n - 1)

    def try_start(self, n):
        if not self.server_free(n) or not self.queue[n]:
            return
        k = self.queue[n][0]
        if k not in self.seen_ready[n]:
            # customer at the head and server idle: the moment it may check downstream
            self.seen_ready[n].add(k)
            self.H[n][k - 1] = self.now
        if self.mode is BlockingMode.COMMUNICATION and n < self.N and not self.has_room(n + 1):
            return  # retried when station n+1 releases a customer
        self.queue[n].popleft()
        self.in_service[n] = k
        self.trace.B[n, k - 1] = self.now
        self.push(self.now + self.tau.value(n, k), Kind.SERVICE_END, n, k)

    def finish(self, n, k):
        self.in_service[n] = None
        if self.trace.C is not None:
            self.trace.C[n, k - 1] = self.now
        if self.mode is BlockingMode.MANUFACTURING and n < self.N and not self.has_room(n + 1):
            self.held[n] = k  # stays on the server until downstream frees a place
            return
        self.leave(n, k)

    def unblock(self, n):
        k = self.held[n]
        if k is not None and self.has_room(n + 1):
            self.leave(n, k)

    # -- main loop ---------------------------------------------------------

    def run(self) -> EpochTrace:
        self.push(0.0, Kind.SERVICE_START, 0)
        while self.events:
            ev = heapq.heappop(self.events)
            self.now = ev.time
            n, k = ev.station, ev.customer
            if ev.kind is Kind.ARRIVAL:
                self.queue[n].append(k)
                self.try_start(n)
            elif ev.kind is Kind.SERVICE_START:
                self.try_start(n)
            elif ev.kind is Kind.SERVICE_END:
                self.finish(n, k)
            elif ev.kind is Kind.UNBLOCK:
                self.unblock(n)
            self.log.append(ev)
        done = int(sum(1 for n in range(self.N + 1) for k in range(self.K) if k + 1 in self.seen_ready[n]))
        if done != (self.N + 1) * self.K or any(self.queue) or any(self.held):
            raise RuntimeError("simulation ended with customers still in the system")
        return self.trace


def simulate_des(scenario: Scenario) -> EpochTrace:
    """Full B/D (plus C or H) epoch trace of the scenario, event by event."""
    return TandemDES(scenario).run()
