"""Condition numbers at roots of sparse systems and their tail probabilities.

For a system ``f`` with ``|f^i| = 1`` vanishing at ``(p, q)``, the distance
inside the fiber to the systems singular at ``(p, q)`` is

    d_P^2 = min_{|v| = 1}  sum_i |v_i|^2 / |D^{-1} v|_{A_i}^2,

with ``D`` the condition matrix and ``|w|_{A_i}^2 = w^H M_i w``.  The
reciprocal is bracketed by

    max_v min_j |D^{-1} v|_{A_j}   <=   1/d_P   <=   max_j |M_j^{1/2} D^{-1}|_2.

The minimization over the sphere is done on a stratified angle grid followed
by compass-search polishing from the best grid points and from the directions
that realize the two bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from .errors import DimensionLimitError, NumericalError
from .montecarlo import run_chunks, wilson_interval
from .quadrature import Region, integrate_density
from .solver import expected_count, solve
from .systems import PolySample, SystemSpec, condition_matrix, linear_system, metrics_at, \
    sample_coeffs
from .toric import ToricPoint, as_point, metric_batch, veronese_batch

SINGULAR_COND = 1e14


@dataclass(frozen=True)
class MetricFamily:
    """Positive definite ``M_i = 1/2 D^2 g_{A_i}(p)``, one per polynomial."""

    mats: tuple

    def __post_init__(self):
        mats = tuple(np.asarray(m) for m in self.mats)
        for m in mats:
            if np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] <= 0:
                raise ValueError("metric matrices must be positive definite")
        object.__setattr__(self, "mats", mats)

    @property
    def n(self) -> int:
        return self.mats[0].shape[0]

    @classmethod
    def at(cls, system: SystemSpec, at) -> "MetricFamily":
        return cls(tuple(metrics_at(system, at)))

    def norms(self, U: np.ndarray) -> np.ndarray:
        """``|u|_{A_i}`` for rows of ``U``; shape ``(N, n_mats)``."""
        U = np.atleast_2d(U)
        return np.sqrt(np.maximum(np.stack(
            [np.real(np.einsum("ki,ij,kj->k", U.conj(), M, U)) for M in self.mats], axis=1), 0.0))


def intersection_norm(family: MetricFamily, u) -> float:
    """Norm whose unit ball is the intersection of the unit balls of all ``|.|_{A_i}``."""
    return float(family.norms(np.asarray(u, dtype=complex))[0].max())


# ----------------------------------------------------------- sphere sampling

def _sphere_param(n: int, real: bool):
    """Map from angle vectors to unit vectors of C^n (or R^n), plus grid box bounds."""
    if real:
        def to_v(T):
            T = np.atleast_2d(T)
            out = np.ones((T.shape[0], n))
            for k in range(n - 1):
                out[:, k] *= np.cos(T[:, k])
                out[:, k + 1:] *= np.sin(T[:, k])[:, None]
            return out.astype(complex)
        return to_v, [(0.0, math.pi)] * (n - 1)

    def to_v(T):
        T = np.atleast_2d(T)
        th, ph = T[:, :n - 1], T[:, n - 1:]
        out = np.ones((T.shape[0], n), dtype=complex)
        for k in range(n - 1):
            out[:, k] *= np.cos(th[:, k])
            out[:, k + 1:] *= np.sin(th[:, k])[:, None]
        out[:, 1:] *= np.exp(1j * ph)
        return out
    return to_v, [(0.0, math.pi / 2)] * (n - 1) + [(0.0, 2 * math.pi)] * (n - 1)


def _angle_grid(bounds, per_axis: int) -> np.ndarray:
    axes = [lo + (hi - lo) * (np.arange(per_axis) + 0.5) / per_axis for lo, hi in bounds]
    return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)


def _angles_of(v: np.ndarray, real: bool) -> np.ndarray:
    """Inverse of the sphere parametrization, up to a global phase (or sign)."""
    n = v.size
    v = v / np.linalg.norm(v)
    if real:
        v = np.real(v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))])))
        th = [math.atan2(np.linalg.norm(v[k + 1:]), v[k]) for k in range(n - 2)]
        th.append(math.atan2(v[-1], v[-2]))
        return np.array(th)
    if abs(v[0]) > 0:
        v = v * np.exp(-1j * np.angle(v[0]))
    mod = np.abs(v)
    th = [math.atan2(np.linalg.norm(mod[k + 1:]), mod[k]) for k in range(n - 1)]
    ph = [float(np.angle(v[k])) for k in range(1, n)]
    return np.array(th + ph)


# --------------------------------------------------------------- fiber distance

@dataclass(frozen=True)
class ConditionReport:
    dP: float
    lower: float
    upper: float
    v_star: np.ndarray | None
    D: np.ndarray | None = None

    @property
    def mu(self) -> float:
        return math.inf if self.dP == 0 else 1.0 / self.dP

    def to_json(self) -> dict:
        return {"dP": self.dP, "mu": self.mu, "lower": self.lower, "upper": self.upper}


def _root_residual(f: PolySample, at) -> float:
    from .systems import evaluate
    vals, _ = evaluate(f, at, scaled=True)
    return float(np.max(np.abs(vals) / np.array([np.linalg.norm(c) for c in f.coeffs])))


@dataclass
class _Objective:
    Dinv: np.ndarray
    family: MetricFamily
    to_v: object
    real: bool
    evals: int = 0

    def images(self, V):
        return V @ self.Dinv.T

    def dist2(self, V):
        """``sum_i |v_i|^2 / |D^{-1} v|_{A_i}^2`` on rows of ``V`` (assumed unit)."""
        nr = self.family.norms(self.images(V))
        self.evals += V.shape[0]
        with np.errstate(divide="ignore"):
            return np.sum(np.abs(V) ** 2 / nr ** 2, axis=1)

    def minnorm(self, V):
        """``min_j |D^{-1} v|_{A_j}``."""
        return self.family.norms(self.images(V)).min(axis=1)


def _polish(fun, starts, step: float, tol: float = 1e-9, max_iter: int = 400):
    """Vectorized compass search: evaluate a 5^d stencil, recentre, halve when centred."""
    best_x, best_f = None, math.inf
    d = len(starts[0])
    offs = np.stack([g.ravel() for g in np.meshgrid(*[np.linspace(-1, 1, 5)] * d,
                                                     indexing="ij")], axis=1)
    centre = int(np.argmin(np.abs(offs).sum(axis=1)))
    for x in starts:
        x, h = np.asarray(x, dtype=float), step
        fx = float(fun(x[None, :])[0])
        for _ in range(max_iter):
            if h < tol:
                break
            vals = fun(x[None, :] + h * offs)
            k = int(np.argmin(vals))
            if k == centre or vals[k] >= fx:
                h *= 0.5
            else:
                x, fx = x + h * offs[k], float(vals[k])
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def fiber_distance(f: PolySample, at, real: bool | None = None, grid: int | None = None,
                   polish: bool = True, check_root: float | None = 1e-6) -> ConditionReport:
    """Distance from ``f`` to the singular systems in the fiber over ``at``, with bounds."""
    at = as_point(at)
    n = f.spec.n
    if n > 3:
        raise DimensionLimitError("fiber_distance is limited to n <= 3")
    if real is None:
        real = f.spec.is_real
    f = f.normalized()
    if check_root is not None:
        res = _root_residual(f, at)
        if res > check_root:
            raise ValueError(f"point is not a root of f (scaled residual {res:.3g})")
    D = condition_matrix(f, at).D
    family = MetricFamily.at(f.spec, at)
    if not np.all(np.isfinite(D)) or np.linalg.cond(D) > SINGULAR_COND:
        return ConditionReport(0.0, math.inf, math.inf, None, D)
    Dinv = np.linalg.inv(D)

    # upper bound and the right singular vectors that realize it
    tops, upper = [], 0.0
    for M in family.mats:
        R = scipy.linalg.sqrtm(M) @ Dinv
        _, s, Vh = np.linalg.svd(R)
        tops.append(Vh[0].conj())
        upper = max(upper, float(s[0]))

    if n == 1:
        d = abs(D[0, 0])
        m = float(np.real(family.mats[0][0, 0]))
        dP = d / math.sqrt(m)
        return ConditionReport(dP, 1.0 / dP, upper, np.ones(1, dtype=complex), D)

    to_v, bounds = _sphere_param(n, real)
    obj = _Objective(Dinv, family, to_v, real)
    if grid is None:
        grid = {2: 96, 3: 14}[n] if not real else {2: 256, 3: 48}[n]
    T = _angle_grid(bounds, grid)
    step = 2.0 * math.pi / grid
    V = to_v(T)
    top_V = np.array(tops)
    if real:
        top_V = np.real(top_V * np.exp(-1j * np.angle(top_V[np.arange(n), np.argmax(np.abs(top_V), axis=1)]))[:, None]).astype(complex)
        top_V /= np.linalg.norm(top_V, axis=1, keepdims=True)

    # lower bound: maximize min_j |D^{-1} v|_{A_j}
    mn = obj.minnorm(V)
    cand_l = np.concatenate([V[np.argsort(mn)[-3:]], top_V])
    vals_l = obj.minnorm(cand_l)
    order_l = np.argsort(vals_l)[::-1][:3]
    lower_v, lower = cand_l[order_l[0]], float(vals_l[order_l[0]])
    if polish:
        x, fx = _polish(lambda t: -obj.minnorm(to_v(t)),
                        [_angles_of(cand_l[k], real) for k in order_l[:2]], step)
        if -fx > lower:
            lower, lower_v = -fx, to_v(x)[0]

    # fiber distance: minimize the weighted ratio
    dist = obj.dist2(V)
    cand = np.concatenate([V[np.argsort(dist)[:3]], top_V, lower_v[None, :]])
    vals = obj.dist2(cand)
    order = np.argsort(vals)[:4]
    best_v, best = cand[order[0]], float(vals[order[0]])
    if polish:
        x, fx = _polish(lambda t: obj.dist2(to_v(t)),
                        [_angles_of(cand[k], real) for k in order[:3]], step)
        if fx < best:
            best, best_v = fx, to_v(x)[0]
    return ConditionReport(math.sqrt(best), lower, upper, best_v, D)


def fiber_distance_bruteforce(f: PolySample, at, samples: int, seed: int,
                              real: bool | None = None) -> float:
    """Fiber distance by plain minimization over random unit vectors (no polishing)."""
    from .montecarlo import rng_for
    at = as_point(at)
    real = f.spec.is_real if real is None else real
    f = f.normalized()
    D = condition_matrix(f, at).D
    obj = _Objective(np.linalg.inv(D), MetricFamily.at(f.spec, at), None, real)
    rng = rng_for(seed, 23)
    best = math.inf
    for s in range(0, samples, 100_000):
        k = min(100_000, samples - s)
        V = rng.standard_normal((k, f.spec.n)).astype(complex)
        if not real:
            V = V + 1j * rng.standard_normal((k, f.spec.n))
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        best = min(best, float(obj.dist2(V).min()))
    return math.sqrt(best)


def cheap_bounds(f: PolySample, at) -> tuple[float, float]:
    """Fast bracket ``lo <= 1/d_P <= hi`` from singular vectors only."""
    at = as_point(at)
    f = f.normalized()
    D = condition_matrix(f, at).D
    if not np.all(np.isfinite(D)) or np.linalg.cond(D) > SINGULAR_COND:
        return math.inf, math.inf
    family = MetricFamily.at(f.spec, at)
    Dinv = np.linalg.inv(D)
    hi, tops = 0.0, []
    for M in family.mats:
        _, s, Vh = np.linalg.svd(scipy.linalg.sqrtm(M) @ Dinv)
        hi = max(hi, float(s[0]))
        tops.append(Vh[0].conj())
    if f.spec.is_real:
        T = np.array(tops)
        T = np.real(T * np.exp(-1j * np.angle(T[np.arange(len(T)), np.argmax(np.abs(T), axis=1)]))[:, None])
        tops = list(T / np.linalg.norm(T, axis=1, keepdims=True))
    lo = float(family.norms(np.array(tops) @ Dinv.T).min(axis=1).max())
    return min(lo, hi), hi


# ------------------------------------------------------------------ mu on regions

def roots_in_region(f: PolySample, region: Region, expected: int | None = None):
    rs = solve(f, expected=expected)
    if rs.rejected:
        raise NumericalError("solver rejected the sample")
    inside = [r for r in rs.roots if region.contains(r.point.p, r.point.q)[0]]
    return rs, inside


def _real_root(root, tol: float = 1e-9) -> bool:
    return bool(np.all(np.abs(np.imag(root.z)) <= tol * np.maximum(1.0, np.abs(root.z))))


def _roots_for(rs, region: Region, real_roots: str | None):
    """Toric points of the roots that count: all, real ones, or positive real ones."""
    for r in rs.roots:
        if real_roots is None:
            at = r.point
        elif not _real_root(r):
            continue
        elif real_roots == "positive":
            if np.any(np.real(r.z) <= 0):
                continue
            at = as_point(r.point.p)
        elif real_roots == "any":
            at = ToricPoint(r.point.p, np.where(np.real(r.z) < 0, math.pi, 0.0))
        else:
            raise ValueError(f"unknown real_roots mode {real_roots!r}")
        if real_roots is None:
            if region.contains(at.p, at.q)[0]:
                yield at
        elif region.contains(at.p)[0]:
            yield at


def mu_region(f: PolySample, region: Region, expected: int | None = None,
              real_roots: str | None = None, **kw) -> float:
    """Largest ``1/d_P`` over roots of ``f`` in ``region``; 0 without roots, inf if singular.

    ``real_roots`` restricts to real roots (``"any"``) or positive real roots
    (``"positive"``); then only the ``p`` part of the region is used.
    """
    rs = solve(f, expected=expected)
    if rs.info.get("singular"):
        return math.inf
    if rs.rejected:
        raise NumericalError("solver rejected the sample")
    worst = 0.0
    for at in _roots_for(rs, region, real_roots):
        rep = fiber_distance(f, at, check_root=None, **kw)
        worst = max(worst, rep.mu)
    return worst


def mu_exceeds(f: PolySample, region: Region, thresholds, expected: int | None = None,
               real_roots: str | None = None) -> np.ndarray:
    """For each threshold ``t``, whether ``mu(f; region) > t``.

    Uses the cheap bracket first and only runs the full minimization when a
    threshold falls inside it.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    rs = solve(f, expected=expected)
    if rs.info.get("singular"):
        return np.ones(thresholds.size, dtype=bool)
    if rs.rejected:
        raise NumericalError("solver rejected the sample")
    hit = np.zeros(thresholds.size, dtype=bool)
    for at in _roots_for(rs, region, real_roots):
        lo, hi = cheap_bounds(f, at)
        hit |= thresholds < lo
        open_ = ~hit & (thresholds < hi)
        if np.any(open_):
            mu = fiber_distance(f, at, check_root=None).mu
            hit |= thresholds < mu
    return hit


# --------------------------------------------------------------- mixed dilation

def _cond(M: np.ndarray) -> float:
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    return math.inf if w[0] <= 0 else float(w[-1] / w[0])


def _spd_power(M: np.ndarray, a: float) -> np.ndarray:
    w, U = np.linalg.eigh(0.5 * (M + M.T))
    return (U * w ** a) @ U.T


def _spd_log(M):
    w, U = np.linalg.eigh(0.5 * (M + M.T))
    return (U * np.log(w)) @ U.T


def _spd_exp(M):
    w, U = np.linalg.eigh(0.5 * (M + M.T))
    return (U * np.exp(w)) @ U.T


def geometric_mean(mats, tol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """Matrix geometric mean: closed form for two matrices, Karcher fixed point otherwise."""
    mats = [np.real(np.asarray(m)) for m in mats]
    if len(mats) == 1:
        return mats[0]
    if len(mats) == 2:
        A, B = mats
        Ah, Aih = _spd_power(A, 0.5), _spd_power(A, -0.5)
        return Ah @ _spd_power(Aih @ B @ Aih, 0.5) @ Ah
    X = sum(mats) / len(mats)
    for _ in range(max_iter):
        Xh, Xih = _spd_power(X, 0.5), _spd_power(X, -0.5)
        S = sum(_spd_log(Xih @ M @ Xih) for M in mats) / len(mats)
        X = Xh @ _spd_exp(S) @ Xh
        if np.linalg.norm(S) < tol:
            break
    return X


@dataclass(frozen=True)
class DilationResult:
    kappa: float
    L: np.ndarray


def _dilation_objective(mats, L):
    return max(_cond(L.T @ M @ L) for M in mats)


def mixed_dilation(family: MetricFamily, polish: bool = True) -> DilationResult:
    """Upper bound ``min_L max_i cond(L^T M_i L)`` via a geometric-mean start and local search."""
    mats = [np.real(m) for m in family.mats]
    n = mats[0].shape[0]
    if n == 1:
        return DilationResult(1.0, np.array([[1.0 / math.sqrt(mats[0][0, 0])]]))
    L = _spd_power(geometric_mean(mats), -0.5)
    best = _dilation_objective(mats, L)
    if polish and best > 1.0 + 1e-12:
        # the objective is scale invariant; fix the scale of L through its norm
        def fun(x):
            Lx = x.reshape(n, n)
            if abs(np.linalg.det(Lx)) < 1e-14:
                return 1e30
            return _dilation_objective(mats, Lx)
        r = minimize(fun, L.ravel() / np.linalg.norm(L), method="Nelder-Mead",
                     options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000, "adaptive": True})
        if r.fun < best:
            best, L = float(r.fun), r.x.reshape(n, n)
    return DilationResult(float(best), L)


def kappa_region(system: SystemSpec, region: Region, grid: int = 9) -> float:
    """Largest mixed dilation over a ``grid``-per-axis lattice of the (bounded) p box."""
    if not region.bounded:
        raise ValueError("kappa_region needs a bounded p box")
    axes = [np.linspace(a, b, grid) for a, b in region.p_box]
    P = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    mats = [metric_batch(s, P) for s in system.polys]
    worst = 1.0
    for k in range(P.shape[0]):
        worst = max(worst, mixed_dilation(MetricFamily(tuple(m[k] for m in mats))).kappa)
    return worst


# --------------------------------------------------------------- tail Monte Carlo

def nu_lin_bound(n: int) -> float:
    """Constant ``c_n`` in ``nu^Lin(n, eps) <= c_n eps^4`` (defined for ``n >= 2``)."""
    if n < 2:
        raise ValueError("the linear tail constant needs n >= 2")
    return n ** 3 * (n + 1) * math.exp(math.lgamma(n * n + n) - math.lgamma(n * n + n - 2))


@dataclass
class TailEstimate:
    eps: float
    hits: int
    trials: int
    empirical: float
    wilson_lo: float
    wilson_hi: float

    def to_json(self) -> dict:
        return {"eps": self.eps, "hits": self.hits, "trials": self.trials,
                "empirical": self.empirical, "wilson_lo": self.wilson_lo,
                "wilson_hi": self.wilson_hi}


@dataclass
class TailReport:
    estimates: list
    samples: int
    rejected: int
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"samples": self.samples, "rejected": self.rejected,
                "estimates": [e.to_json() for e in self.estimates], **self.extra}


class _LinearTailChunk:
    """Batched tail indicator for linear systems sharing one variance vector.

    All metrics coincide, so ``1/d_P`` is the top singular value of
    ``M^{1/2} D^{-1}`` and no sphere search is needed.
    """

    def __init__(self, system, region, thresholds, real_roots):
        self.system, self.region = system, region
        self.thresholds, self.real_roots = thresholds, real_roots

    def __call__(self, rng, size):
        spec = self.system.polys[0]
        n = self.system.n
        F = np.stack(sample_coeffs(self.system, rng, size), axis=1)   # (N, n, n+1)
        mono = F * np.sqrt(spec.variances)[None, None, :]
        rows = [tuple(r) for r in spec.exponents.tolist()]
        zero = rows.index(tuple([0] * n))
        cols = [rows.index(tuple(int(j == k) for j in range(n))) for k in range(n)]
        Mlin = mono[:, :, cols]
        b = mono[:, :, zero]
        singular = np.linalg.cond(Mlin) > 1e13
        Mlin[singular] = np.eye(n)
        z = np.linalg.solve(Mlin, -b[:, :, None])[:, :, 0]
        hits = np.zeros(self.thresholds.size, dtype=np.int64)
        hits += int(singular.sum())
        ok = ~singular & np.all(np.abs(z) > 1e-12, axis=1) & np.all(np.isfinite(z), axis=1)
        z, F = z[ok], F[ok]
        P, Q = np.log(np.abs(z)), np.angle(z)
        if self.real_roots is None:
            inside = self.region.contains(P, Q)
        else:
            real = np.all(np.abs(z.imag) <= 1e-9 * np.maximum(1.0, np.abs(z)), axis=1)
            inside = real & self.region.contains(P)
            if self.real_roots == "positive":
                inside &= np.all(z.real > 0, axis=1)
            Q = np.where(z.real < 0, math.pi, 0.0)
        if not np.any(inside):
            return hits, 0
        P, Q, F = P[inside], Q[inside], F[inside]
        _, dv, metric = veronese_batch(spec, P, Q)
        Fh = F / np.linalg.norm(F, axis=2, keepdims=True)
        D = np.einsum("kim,kmj->kij", Fh, dv)
        X = np.linalg.inv(D)
        G = np.einsum("kji,kjl,klm->kim", X.conj(), metric, X)
        mu = np.sqrt(np.maximum(np.linalg.eigvalsh(G)[:, -1], 0.0))
        hits += (mu[:, None] > self.thresholds[None, :]).sum(axis=0)
        return hits, 0


class _TailChunk:
    def __init__(self, system, region, thresholds, expected, real_roots):
        self.system, self.region = system, region
        self.thresholds, self.expected = thresholds, expected
        self.real_roots = real_roots

    def __call__(self, rng, size):
        coeffs = sample_coeffs(self.system, rng, size)
        hits = np.zeros(self.thresholds.size, dtype=np.int64)
        rejected = 0
        for k in range(size):
            f = PolySample(tuple(c[k] for c in coeffs), self.system)
            try:
                hits += mu_exceeds(f, self.region, self.thresholds, self.expected,
                                   self.real_roots)
            except NumericalError:
                rejected += 1
        return hits, rejected


def nu_tail_mc(system: SystemSpec, region: Region, eps_list, samples: int, seed: int,
               workers: int = 1, z: float = 3.0, real_roots: str | None = None,
               stream: int = 31, max_reject: float = 0.05, batched: bool = True) -> TailReport:
    """Empirical ``Prob[mu(f; region) > 1/eps]`` with Wilson intervals (``z`` sigmas)."""
    eps = np.asarray(list(eps_list), dtype=float)
    if np.any(eps <= 0):
        raise ValueError("eps must be positive")
    if system.is_linear and system.is_unmixed and batched:
        task = _LinearTailChunk(system, region, 1.0 / eps, real_roots)
    else:
        expected = None if system.is_linear else expected_count(system)
        task = _TailChunk(system, region, 1.0 / eps, expected, real_roots)
    chunks = run_chunks(task, samples, seed, stream=stream, workers=workers)
    hits = sum(c[0] for c in chunks)
    rejected = sum(c[1] for c in chunks)
    if rejected > max_reject * samples:
        raise NumericalError(f"solver rejected {rejected} of {samples} samples")
    trials = samples - rejected
    out = []
    for e, h in zip(eps, hits):
        lo, hi = wilson_interval(int(h), trials, z=z)
        out.append(TailEstimate(float(e), int(h), trials, float(h / trials), lo, hi))
    return TailReport(out, samples, rejected)


@dataclass
class MixedTailCheck:
    eps: float
    lhs: TailEstimate
    ratio: float
    kappa: float
    rhs: TailEstimate
    holds: bool

    def to_json(self) -> dict:
        return {"eps": self.eps, "empirical": self.lhs.empirical,
                "wilson_lo": self.lhs.wilson_lo, "wilson_hi": self.lhs.wilson_hi,
                "volume_ratio": self.ratio, "kappa_hat": self.kappa,
                "nu_lin_scaled_eps": self.rhs.eps, "nu_lin": self.rhs.empirical,
                "nu_lin_wilson_hi": self.rhs.wilson_hi,
                "theorem3_rhs": self.ratio * self.rhs.empirical,
                "theorem3_rhs_hi": self.ratio * self.rhs.wilson_hi, "holds": self.holds}


def mixed_tail_check(system: SystemSpec, region: Region, eps_list, samples: int, seed: int,
                   lin_samples: int | None = None, workers: int = 1, kappa_grid: int = 9,
                   tol: float = 1e-6, z: float = 3.0) -> list[MixedTailCheck]:
    """Compare the tail of ``mu`` on ``region`` with the scaled linear tail.

    The inequality is accepted when the Wilson lower end of the left side does
    not exceed the Wilson upper end of the right side.
    """
    eps = np.asarray(list(eps_list), dtype=float)
    lhs = nu_tail_mc(system, region, eps, samples, seed, workers=workers, z=z)
    lin = linear_system(system.n, system.field)
    ratio = (integrate_density(system, region, tol=tol).value
             / integrate_density(lin, region, tol=tol).value)
    kappa = kappa_region(system, region, grid=kappa_grid)
    scaled = eps * math.sqrt(kappa)
    rhs = nu_tail_mc(lin, Region.full(system.n), scaled, lin_samples or samples, seed,
                     workers=workers, z=z, stream=32)
    out = []
    for e, l, r in zip(eps, lhs.estimates, rhs.estimates):
        out.append(MixedTailCheck(float(e), l, ratio, kappa, r,
                                 holds=bool(l.wilson_lo <= ratio * r.wilson_hi)))
    return out
