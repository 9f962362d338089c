"""Real random systems: positive real root counts and their bounds.

Roots counted here are real with every coordinate positive and ``log z``
inside a ``p`` box, i.e. roots in ``exp U``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .condition import TailEstimate, nu_tail_mc
from .errors import NumericalError, SupportError
from .montecarlo import mean_stderr, run_chunks
from .quadrature import Region, integrate_density, integrate_p
from .solver import expected_count, solve
from .systems import PolySample, SystemSpec, linear_system, sample_coeffs
from .toric import metric_det_batch

IMAG_TOL = 1e-9


def _require_real(system: SystemSpec):
    if not system.is_real:
        raise SupportError("real-root experiments need a system with field 'real'")


def _as_region(p_box) -> Region:
    return p_box if isinstance(p_box, Region) else Region(tuple(tuple(iv) for iv in p_box))


def count_positive_roots(f: PolySample, region: Region, expected: int | None = None) -> int:
    rs = solve(f, expected=expected)
    if rs.rejected:
        raise NumericalError("solver rejected the sample")
    n = 0
    for r in rs.roots:
        z = r.z
        if np.all(np.abs(z.imag) <= IMAG_TOL * np.maximum(1.0, np.abs(z))) and np.all(z.real > 0):
            n += int(region.contains(np.log(z.real))[0])
    return n


class _CountChunk:
    def __init__(self, system, region, expected):
        self.system, self.region, self.expected = system, region, expected

    def __call__(self, rng, size):
        coeffs = sample_coeffs(self.system, rng, size)
        out = np.full(size, -1, dtype=np.int64)
        for k in range(size):
            f = PolySample(tuple(c[k] for c in coeffs), self.system)
            try:
                out[k] = count_positive_roots(f, self.region, self.expected)
            except NumericalError:
                pass
        return out


@dataclass
class CountEstimate:
    mean: float
    stderr: float
    samples: int
    rejected: int

    def to_json(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "samples": self.samples,
                "rejected": self.rejected}


def expected_real_mc(system: SystemSpec, p_box, samples: int, seed: int, workers: int = 1,
                     stream: int = 41) -> CountEstimate:
    """Monte Carlo mean number of positive real roots with ``log z`` in ``p_box``."""
    _require_real(system)
    region = _as_region(p_box)
    expected = None if system.is_linear else expected_count(system)
    counts = np.concatenate(run_chunks(_CountChunk(system, region, expected), samples, seed,
                                       stream=stream, workers=workers))
    ok = counts >= 0
    rejected = int((~ok).sum())
    if rejected > 0.05 * samples:
        raise NumericalError(f"solver rejected {rejected} of {samples} samples")
    mean, se = mean_stderr(counts[ok])
    return CountEstimate(mean, se, samples, rejected)


def theorem4_bound(system: SystemSpec, p_box, tol: float = 1e-8) -> float:
    """``(4 pi^2)^{-n/2} sqrt(vol U) sqrt(n! * volume form integral over U x full q)``.

    The integral of ``n!`` times the mixed volume form equals ``pi^n`` times the
    expected number of complex roots with ``p`` in ``U``.
    """
    region = _as_region(p_box)
    if not region.bounded:
        raise ValueError("lambda(U) infinite: the p box must be bounded")
    n = region.n
    roots = integrate_density(system, Region(region.p_box, "full"), tol=tol).value
    return (2 * math.pi) ** (-n) * math.sqrt(region.p_measure()) * math.sqrt(math.pi ** n * roots)


def real_root_density_integral(system: SystemSpec, p_box, tol: float = 1e-8) -> float:
    """Kac-Rice integral ``Gamma((n+1)/2) / pi^{(n+1)/2} * int sqrt(det M)`` for unmixed systems.

    This is the expected number of positive real roots with ``log z`` in the box;
    the constant is fixed so that the dense case gives half of ``sqrt(d)`` at ``n = 1``.
    """
    if not system.is_unmixed:
        raise SupportError("the real-root density is only available for unmixed systems")
    region = _as_region(p_box)
    n = region.n
    spec = system.polys[0]
    const = math.gamma((n + 1) / 2) / math.pi ** ((n + 1) / 2)
    res = integrate_p(lambda P: np.sqrt(metric_det_batch(spec, P)),
                      region.p_box, tol=tol)
    return const * res.value


@dataclass
class RealTailCheck:
    eps: float
    lhs: TailEstimate
    e_of_u: CountEstimate
    nu_r: TailEstimate
    holds: bool

    @property
    def bound(self) -> float:
        return self.e_of_u.mean * self.nu_r.empirical

    def to_json(self) -> dict:
        return {"eps": self.eps, "empirical": self.lhs.empirical,
                "wilson_lo": self.lhs.wilson_lo, "wilson_hi": self.lhs.wilson_hi,
                "e_of_u": self.e_of_u.mean, "e_of_u_stderr": self.e_of_u.stderr,
                "nu_r": self.nu_r.empirical, "nu_r_wilson_hi": self.nu_r.wilson_hi,
                "bound": self.bound, "holds": self.holds}


@dataclass
class RealExperimentReport:
    region: Region
    mc_mean: float
    mc_stderr: float
    theorem4_bound: float
    e_of_u: float
    tails: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"region": self.region.to_json(), "mc_mean": self.mc_mean,
                "mc_stderr": self.mc_stderr, "theorem4_bound": self.theorem4_bound,
                "e_of_u": self.e_of_u, "tails": [t.to_json() for t in self.tails]}


def real_condition_tail(system: SystemSpec, p_box, eps_list, samples: int, seed: int,
                        lin_samples: int | None = None, workers: int = 1,
                        z: float = 3.0) -> list[RealTailCheck]:
    """Tail of ``mu`` over positive real roots in ``exp U`` against ``E(U) nu_R(n, eps)``.

    ``nu_R`` is the tail for a random real linear system, counting its unique
    root wherever it lies.  The inequality is accepted when the Wilson lower
    end of the left side does not exceed the product of the upper ends
    (``E(U)`` taken as mean plus ``z`` standard errors).
    """
    _require_real(system)
    if not system.is_unmixed:
        raise SupportError("the real tail bound applies to unmixed systems")
    region = _as_region(p_box)
    eps = np.asarray(list(eps_list), dtype=float)
    lhs = nu_tail_mc(system, region, eps, samples, seed, workers=workers, z=z,
                     real_roots="positive", stream=51)
    e_u = expected_real_mc(system, region, samples, seed, workers=workers, stream=52)
    lin = linear_system(system.n, "real")
    nu = nu_tail_mc(lin, Region.full(system.n), eps, lin_samples or samples, seed,
                    workers=workers, z=z, real_roots="any", stream=53)
    out = []
    for e, l, r in zip(eps, lhs.estimates, nu.estimates):
        hi = (e_u.mean + z * e_u.stderr) * r.wilson_hi
        out.append(RealTailCheck(float(e), l, e_u, r, holds=bool(l.wilson_lo <= hi)))
    return out


def real_experiment(system: SystemSpec, p_box, samples: int, seed: int, workers: int = 1,
                    eps_list=(), tol: float = 1e-8) -> RealExperimentReport:
    region = _as_region(p_box)
    est = expected_real_mc(system, region, samples, seed, workers=workers)
    bound = theorem4_bound(system, region, tol=tol) if region.bounded else math.inf
    tails = []
    if len(eps_list):
        tails = real_condition_tail(system, region, eps_list, samples, seed, workers=workers)
    return RealExperimentReport(region, est.mean, est.stderr, bound, est.mean, tails)
