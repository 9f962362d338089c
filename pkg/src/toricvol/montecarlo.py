"""Seeded substreams, chunked (optionally parallel) Monte Carlo, interval helpers.

Every stochastic quantity in the package draws from
``rng_for(seed, stream, chunk)``: a numpy ``SeedSequence`` whose spawn key
is ``(stream, chunk)``.  Trials are grouped into fixed-size chunks, so the
numbers produced never depend on the worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

CHUNK = 1000


def rng_for(seed: int, *key: int) -> np.random.Generator:
    if seed is None:
        raise ValueError("a seed is required")
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def chunk_sizes(total: int, chunk: int = CHUNK) -> list[int]:
    if total <= 0:
        raise ValueError("need a positive number of samples")
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    return sizes


def run_chunks(fn: Callable, total: int, seed: int, stream: int = 0, workers: int = 1,
               chunk: int = CHUNK) -> list:
    """Call ``fn(rng, size)`` once per chunk and return results in chunk order."""
    tasks = [(seed, stream, i, size) for i, size in enumerate(chunk_sizes(total, chunk))]
    if workers <= 1 or len(tasks) == 1:
        return [fn(rng_for(s, st, i), size) for s, st, i, size in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(_call, fn, *t) for t in tasks]
        return [f.result() for f in futs]


def _call(fn, seed, stream, index, size):
    return fn(rng_for(seed, stream, index), size)


def mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("no samples")
    if x.size == 1:
        return float(x[0]), math.inf
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def wilson_interval(k: int, n: int, z: float | None = None, confidence: float | None = None
                    ) -> tuple[float, float]:
    """Wilson score interval for ``k`` successes out of ``n`` trials.

    Give either ``z`` (number of sigmas) or a two-sided ``confidence`` level.
    """
    if n <= 0:
        raise ValueError("no trials")
    if z is None:
        z = 3.0 if confidence is None else float(norm.ppf(0.5 + confidence / 2.0))
    phat = k / n
    denom = 1.0 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)
