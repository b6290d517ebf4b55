"""Seeded, chunked Monte Carlo execution with deterministic reduction.

Every estimator splits its sample budget into fixed-size chunks.  Chunk ``c``
draws from its own generator seeded by ``(master_seed, stream_id + c)``, and
chunk moments are merged in chunk order, so results do not depend on how
many worker threads evaluated the chunks.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ParameterError

CHUNK_SIZE = 1 << 16
_U64 = 1 << 64


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            value = getattr(self, name)
            if int(value) != value or not 0 <= value < _U64:
                raise ParameterError(f"{name} must be an unsigned 64-bit integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    def derive(self, offset: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, (self.stream_id + offset) % _U64)

    def generator(self, offset: int = 0) -> np.random.Generator:
        stream = (self.stream_id + offset) % _U64
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.master_seed, stream])))


def as_seed(seed) -> SeedSpec:
    if isinstance(seed, SeedSpec):
        return seed
    if isinstance(seed, (tuple, list)):
        return SeedSpec(*seed)
    return SeedSpec(int(seed))


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get("MECHLAB_THREADS", "1") or 1)
    if threads < 1:
        raise ParameterError(f"threads must be positive, got {threads}")
    return threads


def chunk_sizes(count: int, chunk_size: int = CHUNK_SIZE) -> list[int]:
    if int(count) != count or count < 1:
        raise ParameterError(f"sample count must be a positive integer, got {count!r}")
    full, rest = divmod(int(count), chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


@dataclass
class Moments:
    """Column-wise count, sum and centred second moment of a sample."""

    n: int
    total: np.ndarray
    m2: np.ndarray

    @classmethod
    def from_samples(cls, values: np.ndarray) -> "Moments":
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, np.newaxis]
        n = values.shape[0]
        total = values.sum(axis=0)
        m2 = ((values - total / n) ** 2).sum(axis=0)
        return cls(n, total, m2)

    def merge(self, other: "Moments") -> "Moments":
        n = self.n + other.n
        delta = other.total / other.n - self.total / self.n
        m2 = self.m2 + other.m2 + delta**2 * (self.n * other.n / n)
        return Moments(n, self.total + other.total, m2)

    @property
    def mean(self) -> np.ndarray:
        # sum / n keeps indicator means exactly monotone in the indicator counts
        return self.total / self.n

    @property
    def std_error(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros_like(self.m2)
        return np.sqrt(self.m2 / (self.n - 1)) / np.sqrt(self.n)


def map_chunks(kernel: Callable[[np.random.Generator, int], object], count: int,
               seed: SeedSpec, threads: int | None = None) -> list:
    """Evaluate ``kernel(rng, size)`` on every chunk and return results in chunk order."""
    sizes = chunk_sizes(count)
    threads = resolve_threads(threads)

    def job(c):
        return kernel(seed.generator(c), sizes[c])

    if threads == 1 or len(sizes) == 1:
        return [job(c) for c in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=min(threads, len(sizes))) as pool:
        return list(pool.map(job, range(len(sizes))))


def run_chunked(kernel: Callable[[np.random.Generator, int], np.ndarray], count: int,
                seed: SeedSpec, threads: int | None = None) -> Moments:
    """Streaming column moments of ``kernel`` output over ``count`` draws."""
    return run_chunked_moments(lambda rng, size: Moments.from_samples(kernel(rng, size)),
                               count, seed, threads)


def run_chunked_moments(kernel: Callable[[np.random.Generator, int], Moments], count: int,
                        seed: SeedSpec, threads: int | None = None) -> Moments:
    """Like :func:`run_chunked` for kernels that reduce their chunk themselves."""
    parts = map_chunks(kernel, count, seed, threads)
    acc = parts[0]
    for part in parts[1:]:
        acc = acc.merge(part)
    return acc
