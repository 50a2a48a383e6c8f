"""Local work between operations: a spin loop calibrated against the clock.

Sub-microsecond sleeps are meaningless, so work is a counted empty loop.
:func:`calibrate` measures the cost of one iteration of exactly the loop the
workers run, and a requested duration becomes an iteration count.

The time subtracted from a trial is not count times cost: the speed of a
spin iteration drifts by up to 2x over a few hundred milliseconds on shared
hosts, so the workers time each spin with the thread CPU clock instead.
"""

from __future__ import annotations

import random
import statistics
import time
from itertools import repeat

def _spin_many(counts) -> None:
    # same loop shape as the worker's inline spin
    for n in counts:
        for _ in repeat(None, n):
            pass


def calibrate(samples: int = 5, iterations: int = 200_000) -> float:
    """Seconds per spin iteration, the median of ``samples`` timings."""
    chunks = [100] * (iterations // 100)
    empty = [0] * len(chunks)
    costs = []
    for _ in range(samples):
        t0 = time.perf_counter()
        _spin_many(chunks)
        t1 = time.perf_counter()
        _spin_many(empty)
        t2 = time.perf_counter()
        costs.append(((t1 - t0) - (t2 - t1)) / iterations)
    return max(statistics.median(costs), 1e-10)


def draw_counts(rng: random.Random, n: int, mean_us: float, per_iter_s: float) -> list[int]:
    """Iteration counts for ``n`` work periods drawn from N(mean, (mean/4)^2)."""
    if mean_us <= 0:
        return [0] * n
    mean = mean_us * 1e-6
    sd = 0.25 * mean
    gauss = rng.gauss
    return [max(0, round(gauss(mean, sd) / per_iter_s)) for _ in range(n)]
