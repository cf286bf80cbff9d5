"""Service and interarrival durations, addressable by (seed, station, customer).

Random sources are counter based: customer k of station n lives in block
``(k - 1) // BLOCK`` of a Philox stream keyed by (seed, n), so any value can
be produced without generating the ones before it. Blocks are cached per
station; the cache only affects speed, never values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

BLOCK = 512


class NegativeValue(ValueError):
    pass


class OutOfRange(IndexError):
    pass


@dataclass(frozen=True)
class ExplicitList:
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Exponential:
    rate: float


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float


@dataclass(frozen=True)
class Erlang:
    shape: int
    rate: float


Source = Union[ExplicitList, Constant, Exponential, Uniform, Erlang]


def _uniform_block(seed: int, n: int, block: int, width: int) -> np.ndarray:
    bitgen = np.random.Philox(key=(n << 64) | seed, counter=[0, block, 0, 0])
    return np.random.Generator(bitgen).random(BLOCK * width).reshape(BLOCK, width)


def _random_block(source: Source, seed: int, n: int, block: int) -> np.ndarray:
    if isinstance(source, Exponential):
        u = _uniform_block(seed, n, block, 1)[:, 0]
        return -np.log1p(-u) / source.rate
    if isinstance(source, Uniform):
        u = _uniform_block(seed, n, block, 1)[:, 0]
        return source.low + (source.high - source.low) * u
    if isinstance(source, Erlang):
        # one sub-stream column per phase
        u = _uniform_block(seed, n, block, source.shape)
        return (-np.log1p(-u) / source.rate).sum(axis=1)
    raise TypeError(f"not a random source: {source!r}")


def check_source(source: Source) -> None:
    """Reject parameters that could produce negative or non-finite durations."""
    if isinstance(source, ExplicitList):
        return  # reported per value, when materialized
    if isinstance(source, Constant):
        ok = math.isfinite(source.value) and source.value >= 0
    elif isinstance(source, Exponential):
        ok = math.isfinite(source.rate) and source.rate > 0
    elif isinstance(source, Uniform):
        ok = math.isfinite(source.low) and math.isfinite(source.high) and 0 <= source.low <= source.high
    elif isinstance(source, Erlang):
        ok = isinstance(source.shape, int) and source.shape >= 1 and math.isfinite(source.rate) and source.rate > 0
    else:
        raise TypeError(f"unknown source type {type(source).__name__}")
    if not ok:
        raise ValueError(f"invalid parameters for {source!r}")


def materialize(source: Source, n: int, k: int, seed: int = 0) -> float:
    """tau_n^k for customer ``k`` (1-based) at station ``n``, uncached."""
    if k < 1:
        raise OutOfRange(f"customer index must be >= 1, got {k}")
    if isinstance(source, ExplicitList):
        if k > len(source.values):
            raise OutOfRange(f"station {n}: list has {len(source.values)} values, customer {k} requested")
        value = source.values[k - 1]
        if not value >= 0 or not math.isfinite(value):
            raise NegativeValue(f"station {n}, customer {k}: duration {value} is not a finite nonnegative number")
        return value
    if isinstance(source, Constant):
        return float(source.value)
    block, offset = divmod(k - 1, BLOCK)
    return float(_random_block(source, seed, n, block)[offset])


class ServiceTimes:
    """All durations of a scenario, with a per-station block cache."""

    def __init__(self, sources, seed: int = 0):
        self.sources = tuple(sources)
        self.seed = seed
        for s in self.sources:
            check_source(s)
        self._blocks = [dict() for _ in self.sources]

    def value(self, n: int, k: int) -> float:
        source = self.sources[n]
        if isinstance(source, Constant):
            return float(source.value)
        if isinstance(source, ExplicitList):
            return materialize(source, n, k, self.seed)
        if k < 1:
            raise OutOfRange(f"customer index must be >= 1, got {k}")
        block, offset = divmod(k - 1, BLOCK)
        cache = self._blocks[n]
        values = cache.get(block)
        if values is None:
            if len(cache) > 4:
                cache.clear()
            values = cache[block] = _random_block(source, self.seed, n, block).tolist()
        return values[offset]

    def matrix(self, customers: int) -> np.ndarray:
        """Dense (N+1) x K matrix of every duration."""
        return np.array([[self.value(n, k) for k in range(1, customers + 1)]
                         for n in range(len(self.sources))])
