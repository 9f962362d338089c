"""Integration of the expected-root density over product regions of the log-torus.

The density depends on ``p`` only, so the ``q`` integral is the measure of the
``q`` box.  The ``p`` integral uses tensor Gauss-Legendre on panels whose
breakpoints sit at ``0, +-1/2, +-1, +-2, +-4, ...``; the order doubles until
the relative change drops below ``tol``.  Infinite intervals are cut at a
radius ``R`` that doubles until the value stops moving.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConvergenceError, DimensionLimitError
from .montecarlo import mean_stderr, run_chunks
from .toric import root_density_batch

TWO_PI = 2.0 * math.pi
_BATCH = 200_000


def _parse_bound(x) -> float:
    if isinstance(x, str):
        s = x.strip().replace("−", "-").lower()
        if s in ("inf", "+inf", "infinity"):
            return math.inf
        if s in ("-inf", "-infinity"):
            return -math.inf
        return float(s)
    return float(x)


def _dump_bound(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


@dataclass(frozen=True)
class Region:
    """Product box ``p_box x q_box``; ``q_box`` may be ``"full"``."""

    p_box: tuple
    q_box: object = "full"

    def __post_init__(self):
        p_box = tuple((_parse_bound(a), _parse_bound(b)) for a, b in self.p_box)
        if not p_box:
            raise ValueError("region needs at least one p interval")
        for a, b in p_box:
            if math.isnan(a) or math.isnan(b) or not a < b:
                raise ValueError(f"empty or unordered p interval [{a}, {b}]")
        object.__setattr__(self, "p_box", p_box)
        if self.q_box != "full":
            q_box = tuple((float(a), float(b)) for a, b in self.q_box)
            if len(q_box) != len(p_box):
                raise ValueError("q box and p box differ in dimension")
            for a, b in q_box:
                if not (0.0 <= a < b <= TWO_PI):
                    raise ValueError(f"q interval [{a}, {b}] must be ordered inside [0, 2 pi]")
            object.__setattr__(self, "q_box", q_box)

    @property
    def n(self) -> int:
        return len(self.p_box)

    @property
    def bounded(self) -> bool:
        return all(math.isfinite(a) and math.isfinite(b) for a, b in self.p_box)

    def q_measure(self) -> float:
        if self.q_box == "full":
            return TWO_PI ** self.n
        return float(np.prod([b - a for a, b in self.q_box]))

    def p_measure(self) -> float:
        return float(np.prod([b - a for a, b in self.p_box]))

    def contains(self, p, q=None) -> np.ndarray:
        """Membership of points ``p`` (and ``q``, taken mod ``2 pi``); shape ``(N,)``."""
        P = np.atleast_2d(np.asarray(p, dtype=float))
        lo = np.array([a for a, _ in self.p_box])
        hi = np.array([b for _, b in self.p_box])
        ok = np.all((P >= lo) & (P <= hi), axis=1)
        if self.q_box != "full":
            if q is None:
                raise ValueError("q needed for a region with a q box")
            Q = np.mod(np.atleast_2d(np.asarray(q, dtype=float)), TWO_PI)
            qlo = np.array([a for a, _ in self.q_box])
            qhi = np.array([b for _, b in self.q_box])
            ok &= np.all((Q >= qlo) & (Q <= qhi), axis=1)
        return ok

    @classmethod
    def full(cls, n: int) -> "Region":
        return cls(tuple((-math.inf, math.inf) for _ in range(n)))

    @classmethod
    def from_json(cls, obj) -> "Region":
        if isinstance(obj, list):
            obj = {"p": obj}
        return cls(tuple(tuple(iv) for iv in obj["p"]), obj.get("q", "full"))

    @classmethod
    def load(cls, path) -> "Region":
        return cls.from_json(json.loads(Path(path).read_text()))

    def to_json(self) -> dict:
        q = "full" if self.q_box == "full" else [list(iv) for iv in self.q_box]
        return {"p": [[_dump_bound(a), _dump_bound(b)] for a, b in self.p_box], "q": q}


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    order: int
    radius: float | None
    evaluations: int


def _breakpoints(a: float, b: float) -> np.ndarray:
    marks = [0.0]
    r = 0.5
    while r < max(abs(a), abs(b)):
        marks += [r, -r]
        r *= 2.0
    inner = [m for m in marks if a < m < b]
    return np.array(sorted([a, b] + inner))


def _panel_rule(a: float, b: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    edges = _breakpoints(a, b)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    wts = 0.5 * (hi - lo) * w[None, :]
    return nodes.ravel(), wts.ravel()


def tensor_gauss(fn: Callable[[np.ndarray], np.ndarray], box, order: int) -> tuple[float, int]:
    """Composite tensor Gauss-Legendre of a vectorized ``fn(P)`` over a finite box."""
    rules = [_panel_rule(a, b, order) for a, b in box]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrid = np.ones(grids[0].shape)
    for k, (_, w) in enumerate(rules):
        shape = [1] * len(rules)
        shape[k] = -1
        wgrid = wgrid * w.reshape(shape)
    P = np.stack([g.ravel() for g in grids], axis=1)
    W = wgrid.ravel()
    total = 0.0
    for s in range(0, P.shape[0], _BATCH):
        total += float(np.dot(fn(P[s:s + _BATCH]), W[s:s + _BATCH]))
    return total, P.shape[0]


def integrate_p(fn: Callable[[np.ndarray], np.ndarray], p_box, tol: float = 1e-6,
                min_order: int = 4, max_order: int = 128, radius: float = 4.0,
                max_radius: float = 512.0) -> QuadResult:
    """Integrate ``fn`` over ``p_box`` (infinite ends allowed) to relative ``tol``."""
    p_box = [(float(a), float(b)) for a, b in p_box]
    if len(p_box) > 3:
        raise DimensionLimitError("quadrature is limited to n <= 3")
    infinite = any(math.isinf(a) or math.isinf(b) for a, b in p_box)
    evals = 0

    def at_order(box):
        nonlocal evals
        prev = None
        order = min_order
        while order <= max_order:
            val, cnt = tensor_gauss(fn, box, order)
            evals += cnt
            if prev is not None and abs(val - prev) <= tol * max(abs(val), 1e-300):
                return val, abs(val - prev), order
            if prev is not None and val == 0.0 and prev == 0.0:
                return 0.0, 0.0, order
            prev, order = val, order * 2
        raise ConvergenceError(f"order doubling did not reach tol={tol}", estimates=(prev, val),
                               residual=abs(val - prev))

    if not infinite:
        val, err, order = at_order(p_box)
        return QuadResult(val, err, order, None, evals)

    R = radius
    last = None
    while R <= max_radius:
        box = [(max(a, -R), min(b, R)) for a, b in p_box]
        if any(lo >= hi for lo, hi in box):
            R *= 2.0
            continue
        val, err, order = at_order(box)
        if last is not None and abs(val - last) <= tol * max(abs(val), 1e-300):
            return QuadResult(val, max(err, abs(val - last)), order, R, evals)
        if last is not None and val == 0.0 and last == 0.0:
            return QuadResult(0.0, 0.0, order, R, evals)
        last, R = val, R * 2.0
    raise ConvergenceError(f"truncation radius reached {max_radius} without converging",
                           estimates=(last, val), residual=abs(val - last))


def integrate_density(system, region: Region, tol: float = 1e-6, **kw) -> QuadResult:
    """Expected number of roots of a random ``system`` in ``region``."""
    if region.n != system.n:
        raise ValueError("region and system differ in dimension")
    if system.n > 3:
        raise DimensionLimitError("quadrature is limited to n <= 3")
    res = integrate_p(lambda P: root_density_batch(system, P), region.p_box, tol=tol, **kw)
    qm = region.q_measure()
    return QuadResult(res.value * qm, res.error * qm, res.order, res.radius, res.evaluations)


@dataclass(frozen=True)
class MCResult:
    value: float
    stderr: float
    samples: int


def integrate_mc(system, region: Region, samples: int, seed: int, workers: int = 1) -> MCResult:
    """Uniform-sampling estimate of the density integral over a bounded region."""
    if samples <= 0:
        raise ValueError("zero samples")
    if not region.bounded:
        raise ValueError("Monte Carlo integration needs a bounded p box")
    lo = np.array([a for a, _ in region.p_box])
    hi = np.array([b for _, b in region.p_box])
    scale = region.p_measure() * region.q_measure()
    chunks = run_chunks(_MCChunk(system, lo, hi), samples, seed, stream=11, workers=workers)
    vals = np.concatenate(chunks) * scale
    mean, se = mean_stderr(vals)
    return MCResult(mean, se, samples)


class _MCChunk:
    def __init__(self, system, lo, hi):
        self.system, self.lo, self.hi = system, lo, hi

    def __call__(self, rng, size):
        P = self.lo + (self.hi - self.lo) * rng.random((size, self.lo.size))
        return root_density_batch(self.system, P)
