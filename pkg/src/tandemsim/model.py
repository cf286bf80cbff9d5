"""Domain types shared by every engine: blocking modes, scenarios, traces."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

class BlockingMode(str, enum.Enum):
    INFINITE = "infinite"
    MANUFACTURING = "manufacturing"
    COMMUNICATION = "communication"


@dataclass(frozen=True)
class Scenario:
    """A tandem of ``stations`` servers fed by the arrival stream (station 0).

    ``sources[n]`` supplies the durations of station ``n``; ``sources[0]``
    holds the interarrival times. ``capacities[n - 1]`` is the number of
    waiting places in front of server ``n`` (the customer in service is not
    counted).
    """

    stations: int
    customers: int
    mode: BlockingMode
    sources: tuple
    capacities: Optional[tuple] = None
    seed: int = 0
    trace: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", BlockingMode(self.mode))
        object.__setattr__(self, "sources", tuple(self.sources))
        if self.capacities is not None:
            object.__setattr__(self, "capacities", tuple(self.capacities))

    @property
    def finite(self) -> bool:
        return self.mode is not BlockingMode.INFINITE

    def capacity(self, n: int) -> Optional[int]:
        """Buffer size of server ``n`` (1-based), None for infinite buffers."""
        if not self.finite or not 1 <= n <= self.stations:
            return None
        return self.capacities[n - 1]

    @property
    def total_capacity(self) -> int:
        return sum(self.capacities) if self.finite else 0


@dataclass(frozen=True)
class Issue:
    code: str
    message: str


class ValidationError(ValueError):
    """Raised with the full list of violated scenario invariants."""

    def __init__(self, issues: Sequence[Issue]):
        self.issues = list(issues)
        super().__init__("; ".join(f"{i.code}: {i.message}" for i in self.issues))

    @property
    def codes(self) -> list[str]:
        return [i.code for i in self.issues]


def validate(scenario: Scenario) -> list[str]:
    """Check every scenario invariant; return warnings or raise ValidationError.

    Negative service times are not checked here: sources report them when
    the offending value is first materialized.
    """
    issues = []
    for name in ("stations", "customers", "workers"):
        value = getattr(scenario, name)
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            issues.append(Issue("NonPositiveDimension", f"{name} must be a positive integer, got {value!r}"))
    if not isinstance(scenario.seed, int) or not 0 <= scenario.seed < 2**64:
        issues.append(Issue("InvalidSeed", f"seed must be an unsigned 64-bit integer, got {scenario.seed!r}"))

    n_ok = isinstance(scenario.stations, int) and scenario.stations >= 1
    if n_ok and len(scenario.sources) != scenario.stations + 1:
        issues.append(Issue("SourceArity", f"expected {scenario.stations + 1} service sources "
                                           f"(station 0 = arrivals), got {len(scenario.sources)}"))

    if scenario.finite:
        caps = scenario.capacities or ()
        if n_ok and len(caps) < scenario.stations:
            missing = ", ".join(str(n) for n in range(len(caps) + 1, scenario.stations + 1))
            issues.append(Issue("MissingCapacities", f"no buffer capacity for station(s) {missing}"))
        elif n_ok and len(caps) > scenario.stations:
            issues.append(Issue("MissingCapacities", f"{len(caps)} capacities given for {scenario.stations} stations"))
        for n, m in enumerate(caps, start=1):
            if isinstance(m, bool) or not isinstance(m, int) or m < 1:
                issues.append(Issue("InvalidCapacity", f"station {n}: capacity must be an integer >= 1, got {m!r}"))
    elif scenario.capacities is not None:
        issues.append(Issue("UnexpectedCapacities", "capacities are only allowed with a finite-buffer mode"))

    if issues:
        raise ValidationError(issues)

    warnings = []
    if scenario.customers <= scenario.stations:
        msg = f"K <= N (K={scenario.customers}, N={scenario.stations}); results are valid but the run is shorter than the pipeline"
        warnings.append(msg)
    return warnings


def boundary_departure(n: int, k: int, stations: int) -> Optional[float]:
    """Return the fixed zero of an out-of-range departure epoch, else None.

    D_n^k is identically zero for k <= 0, for the virtual station -1 and for
    any station past the last server. None means "read it from live state".
    """
    if k <= 0 or n == -1 or n > stations:
        return 0.0
    return None


@dataclass
class EpochTrace:
    """Dense (N+1) x K epoch matrices; column k-1 holds customer k."""

    B: np.ndarray
    D: np.ndarray
    C: Optional[np.ndarray] = None
    H: Optional[np.ndarray] = None

    @classmethod
    def empty(cls, stations: int, customers: int, mode: BlockingMode) -> "EpochTrace":
        shape = (stations + 1, customers)
        return cls(
            B=np.zeros(shape),
            D=np.zeros(shape),
            C=np.zeros(shape) if mode is BlockingMode.MANUFACTURING else None,
            H=np.zeros(shape) if mode is BlockingMode.COMMUNICATION else None,
        )

    def arrivals(self) -> np.ndarray:
        """A_n^k = D_{n-1}^k, with zeros for the arrival stream itself."""
        A = np.zeros_like(self.D)
        A[1:] = self.D[:-1]
        return A

    def matrices(self) -> dict:
        out = {"B": self.B, "D": self.D}
        if self.C is not None:
            out["C"] = self.C
        if self.H is not None:
            out["H"] = self.H
        return out

    def first_divergence(self, other: "EpochTrace"):
        """(matrix, station, customer, mine, theirs) of the first mismatch, or None."""
        mine, theirs = self.matrices(), other.matrices()
        if mine.keys() != theirs.keys():
            return ("keys", None, None, sorted(mine), sorted(theirs))
        stations, customers = self.D.shape
        for k in range(customers):
            for n in range(stations):
                for name in ("H", "B", "C", "D"):
                    if name in mine and mine[name][n, k] != theirs[name][n, k]:
                        return (name, n, k + 1, float(mine[name][n, k]), float(theirs[name][n, k]))
        return None

    def equals(self, other: "EpochTrace") -> bool:
        return self.first_divergence(other) is None


@dataclass
class StepCounters:
    arithmetic_ops: int = 0
    parallel_substeps: Optional[int] = None
    peak_live_cells: int = 0

    def as_dict(self) -> dict:
        return {
            "arithmetic_ops": self.arithmetic_ops,
            "parallel_substeps": self.parallel_substeps,
            "peak_live_cells": self.peak_live_cells,
        }


@dataclass
class RunReport:
    scenario: Scenario
    algorithm: str
    departures: list  # D_n^K for n = 0..N
    counters: StepCounters
    criteria: Optional[list] = None
    trace: Optional[EpochTrace] = None
    accumulators: Optional[object] = None
    warnings: list = field(default_factory=list)
    wall_clock: float = 0.0
    audit: Optional[object] = None
