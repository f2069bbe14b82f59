"""
Uncertainty Lab — Simulation Core
===================================
Seeded random streams, standard samplers and Monte-Carlo estimates shared by
every experiment.

Streams use numpy's Philox4x64 counter-based generator. A stream is the pair
(base_seed, stream_index) packed into the 128-bit Philox key, so creating the
stream for replication r is O(1) and never depends on how many draws other
replications consumed. Two streams with different keys are independent
Philox sequences.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

import numpy as np

import config
from utils import NumericalError, ValidationError

_MASK64 = (1 << 64) - 1

T = TypeVar("T")
R = TypeVar("R")


# ──────────────────────────────────────────────
#  Random streams
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class RngStream:
    base_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("base_seed", "stream_index"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) <= _MASK64:
                raise ValidationError(f"{name} must be a 64-bit unsigned integer, got {value!r}")

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        key = (int(self.stream_index) << 64) | int(self.base_seed)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, index: int) -> "RngStream":
        """
        Child stream `index` of this stream. The child's base seed is derived
        from (base_seed, stream_index) so nested loops never collide with the
        parent's siblings.
        """
        if index < 0:
            raise ValidationError(f"substream index must be >= 0, got {index}")
        seq = np.random.SeedSequence([int(self.base_seed), int(self.stream_index)])
        child_seed = int(seq.generate_state(1, dtype=np.uint64)[0])
        return RngStream(child_seed, int(index))


def sample_std_normal(stream: RngStream, n: int) -> np.ndarray:
    """n standard normal draws, identical for identical streams."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    return stream.generator().standard_normal(n)


# ──────────────────────────────────────────────
#  Monte-Carlo estimates
# ──────────────────────────────────────────────
@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int

    @classmethod
    def from_values(cls, values) -> "McEstimate":
        """Compensated mean and standard error (sample SD / sqrt(n))."""
        arr = np.asarray(values, dtype=float).ravel()
        n = arr.size
        if n < 2:
            raise ValidationError(f"need at least 2 samples, got {n}")
        if np.all(arr == arr[0]):
            return cls(float(arr[0]), 0.0, n)
        mean = math.fsum(arr) / n
        var = math.fsum((arr - mean) ** 2) / (n - 1)
        return cls(mean, math.sqrt(var / n), n)

    def within(self, target: float, n_se: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.mean - target) <= n_se * self.std_error + slack


def mc_estimate(
    evaluator: Callable,
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    n: int,
    stream: RngStream,
    *,
    vectorized: bool = False,
) -> McEstimate:
    """
    Average `evaluator` over `n` draws from `sampler(generator, n)`.

    With `vectorized=True` the evaluator receives the whole batch and must
    return one value per draw.
    """
    if n < 2:
        raise ValidationError(f"n must be >= 2, got {n}")
    draws = sampler(stream.generator(), n)
    if vectorized:
        values = np.asarray(evaluator(draws), dtype=float).ravel()
        if values.size != n:
            raise NumericalError(f"evaluator returned {values.size} values for {n} draws")
    else:
        values = np.fromiter((evaluator(d) for d in draws), dtype=float, count=n)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NumericalError(
            f"evaluator returned non-finite value {values[bad[0]]!r} at draw {int(bad[0])}"
        )
    return McEstimate.from_values(values)


# ──────────────────────────────────────────────
#  Parallel replications
# ──────────────────────────────────────────────
def resolve_threads(threads: int) -> int:
    if threads < 0:
        raise ValidationError(f"threads must be >= 0, got {threads}")
    if threads == 0:
        return os.cpu_count() or 1
    return threads


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int = config.DEFAULT_THREADS) -> list[R]:
    """
    Map `fn` over `items` on a thread pool; results come back in item order,
    so aggregation does not depend on scheduling.
    """
    workers = resolve_threads(threads)
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
