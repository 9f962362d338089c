"""Root finding in (C*)^n for small systems.

* one variable: companion-matrix eigenvalues followed by Newton polish;
* linear supports ``{0, e_1, ..., e_n}``: a dense linear solve;
* two variables: hidden-variable Sylvester resultant, linearized into a
  generalized eigenproblem, back-substitution and 2-d Newton polish.

Roots with a coordinate of modulus below ``1e-12`` (or above ``1e12``) or with
non-finite entries are dropped, since only roots in the open torus count.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionLimitError, NumericalError, SupportError
from .montecarlo import mean_stderr, run_chunks
from .supports import bernshtein_count
from .systems import PolySample, sample_coeffs
from .toric import ToricPoint

log = logging.getLogger(__name__)

ZERO_TOL = 1e-12
INF_TOL = 1e12
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class Root:
    z: np.ndarray
    point: ToricPoint
    residual: float


@dataclass
class RootSet:
    roots: list
    method: str
    rejected: bool = False
    info: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.roots)

    def points(self) -> np.ndarray:
        if not self.roots:
            return np.zeros((0, 0))
        return np.array([r.point.p for r in self.roots])

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "rejected": self.rejected,
            "count": len(self.roots),
            "roots": [{"z": [[float(c.real), float(c.imag)] for c in r.z],
                       "p": r.point.p.tolist(), "q": r.point.q.tolist(),
                       "residual": r.residual} for r in self.roots],
            "info": self.info,
        }


# ------------------------------------------------------------ monomial helpers

def _terms(f, i: int) -> tuple[np.ndarray, np.ndarray]:
    return f.spec.polys[i].exponents.astype(int), np.asarray(f.monomial_coeffs()[i], dtype=complex)


def _eval_terms(exps: np.ndarray, coef: np.ndarray, z: np.ndarray) -> tuple[complex, float]:
    mon = np.prod(z[None, :] ** exps, axis=1)
    return complex(coef @ mon), float(np.abs(coef) @ np.abs(mon))


def relative_residual(f, z) -> float:
    """``max_i |f_i(z)| / sum |c_a z^a|``."""
    z = np.asarray(z, dtype=complex)
    worst = 0.0
    for i in range(f.spec.n):
        val, scale = _eval_terms(*_terms(f, i), z)
        worst = max(worst, abs(val) / scale if scale > 0 else math.inf)
    return worst


def _in_torus(z: np.ndarray) -> bool:
    a = np.abs(z)
    return bool(np.all(np.isfinite(z)) and np.all(a > ZERO_TOL) and np.all(a < INF_TOL))


def _make_root(f, z: np.ndarray) -> Root:
    return Root(z=z, point=ToricPoint.from_z(z), residual=relative_residual(f, z))


def _dedupe(roots: list, tol: float = 1e-7) -> list:
    out: list = []
    for r in roots:
        if not any(np.all(np.abs(r.z - o.z) <= tol * np.maximum(1.0, np.abs(o.z))) for o in out):
            out.append(r)
    return out


def newton_polish(f, z, max_iter: int = 12) -> np.ndarray:
    """Newton iterations on the monomial form; a step is kept only if it lowers the residual."""
    z = np.asarray(z, dtype=complex).copy()
    n = z.size
    terms = [_terms(f, i) for i in range(n)]
    res = relative_residual(f, z)
    for _ in range(max_iter):
        if res < 1e-15:
            break
        F = np.empty(n, dtype=complex)
        J = np.empty((n, n), dtype=complex)
        for i, (E, c) in enumerate(terms):
            mon = np.prod(z[None, :] ** E, axis=1)
            F[i] = c @ mon
            J[i] = (c * mon) @ (E / z[None, :])
        try:
            step = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            break
        cand = z - step
        if not np.all(np.isfinite(cand)):
            break
        cres = relative_residual(f, cand)
        if cres >= res:
            break
        z, res = cand, cres
    return z


# ---------------------------------------------------------------- univariate

def _univariate_roots(exps: np.ndarray, coef: np.ndarray, scale_tol: float = 1e-13
                      ) -> tuple[np.ndarray, bool]:
    """Roots in C* of ``sum c_k z^{e_k}``; also reports whether deflation happened."""
    e = exps - exps.min()
    deg = int(e.max())
    dense = np.zeros(deg + 1, dtype=complex)
    np.add.at(dense, e, coef)
    scale = np.abs(dense).max()
    if scale == 0:
        return np.zeros(0, dtype=complex), False
    deflated = False
    while dense.size > 1 and abs(dense[-1]) < scale_tol * scale:
        dense = dense[:-1]
        deflated = True
    # trailing coefficient of z^0 may also be tiny: those roots sit at 0 and are dropped
    while dense.size > 1 and abs(dense[0]) < scale_tol * scale:
        dense = dense[1:]
    if dense.size <= 1:
        return np.zeros(0, dtype=complex), deflated
    return np.roots(dense[::-1]), deflated


def solve_univariate(f) -> RootSet:
    if f.spec.n != 1:
        raise SupportError("solve_univariate needs n = 1")
    exps, coef = _terms(f, 0)
    cands, deflated = _univariate_roots(exps[:, 0], coef)
    info = {}
    if deflated:
        warnings.warn("leading coefficient below 1e-13 of scale; degree deflated", RuntimeWarning)
        info["deflated"] = True
    roots = []
    for c in cands:
        z = newton_polish(f, np.array([c]))
        if _in_torus(z):
            roots.append(_make_root(f, z))
    roots = _dedupe(roots)
    bad = [r for r in roots if r.residual > RESIDUAL_TOL]
    return RootSet([r for r in roots if r.residual <= RESIDUAL_TOL], "companion",
                   rejected=bool(bad), info=info)


# -------------------------------------------------------------------- linear

def solve_linear(f) -> RootSet:
    n = f.spec.n
    M = np.zeros((n, n), dtype=complex)
    b = np.zeros(n, dtype=complex)
    for i in range(n):
        exps, coef = _terms(f, i)
        rows = {tuple(r): c for r, c in zip(exps.tolist(), coef)}
        if set(rows) != {tuple([0] * n)} | {tuple(int(j == k) for j in range(n)) for k in range(n)}:
            raise SupportError("solve_linear needs supports {0, e_1, ..., e_n}")
        b[i] = rows[tuple([0] * n)]
        for k in range(n):
            M[i, k] = rows[tuple(int(j == k) for j in range(n))]
    if np.linalg.cond(M) > 1e13:
        return RootSet([], "linear", rejected=False, info={"singular": True})
    z = np.linalg.solve(M, -b)
    if not _in_torus(z):
        return RootSet([], "linear", info={"boundary": True})
    return RootSet([_make_root(f, z)], "linear")


# ------------------------------------------------------------------ bivariate

def _coeff_grid(exps: np.ndarray, coef: np.ndarray, swap: bool) -> np.ndarray:
    """Dense array ``G[a, b]`` = coefficient of ``x^a y^b`` after removing monomial factors."""
    keep = coef != 0
    exps, coef = exps[keep], coef[keep]
    e = exps[:, ::-1] if swap else exps
    e = e - e.min(axis=0)
    G = np.zeros(tuple(e.max(axis=0) + 1), dtype=complex)
    np.add.at(G, (e[:, 0], e[:, 1]), coef)
    return G


def _sylvester_pencil(G1: np.ndarray, G2: np.ndarray) -> np.ndarray:
    """Coefficients ``S_k`` (shape ``(K+1, m, m)``) of the Sylvester matrix in ``y`` as a polynomial in ``x``."""
    d1, d2 = G1.shape[1] - 1, G2.shape[1] - 1
    m = d1 + d2
    K = max(G1.shape[0], G2.shape[0]) - 1
    S = np.zeros((K + 1, m, m), dtype=complex)
    for r in range(d2):
        S[:G1.shape[0], r, r:r + d1 + 1] = G1
    for r in range(d1):
        S[:G2.shape[0], d2 + r, r:r + d2 + 1] = G2
    return S


def _pencil_eigs(S: np.ndarray) -> np.ndarray:
    K, m = S.shape[0] - 1, S.shape[1]
    while K > 0 and np.abs(S[K]).max() == 0:
        K -= 1
    if K == 0:
        return np.zeros(0, dtype=complex)
    N = K * m
    A = np.zeros((N, N), dtype=complex)
    B = np.eye(N, dtype=complex)
    A[:-m, m:] = np.eye(N - m)
    for k in range(K):
        A[-m:, k * m:(k + 1) * m] = -S[k]
    B[-m:, -m:] = S[K]
    alpha, beta = scipy.linalg.eig(A, B, right=False, homogeneous_eigvals=True)
    finite = np.abs(beta) > 1e-13 * np.maximum(np.abs(alpha), 1e-300)
    return alpha[finite] / beta[finite]


def _bivariate_candidates(f, swap: bool) -> list[np.ndarray]:
    (e1, c1), (e2, c2) = _terms(f, 0), _terms(f, 1)
    G1, G2 = _coeff_grid(e1, c1, swap), _coeff_grid(e2, c2, swap)
    if G1.shape[1] == 1 and G2.shape[1] == 1:
        return []
    if G1.shape[1] == 1 or G2.shape[1] == 1:
        # one equation does not involve y: solve it in x, then the other in y
        Gx, Gy = (G1, G2) if G1.shape[1] == 1 else (G2, G1)
        xs, _ = _univariate_roots(np.arange(Gx.shape[0]), Gx[:, 0])
        pairs = [(x, Gy) for x in xs]
    else:
        xs = _pencil_eigs(_sylvester_pencil(G1, G2))
        pairs = [(x, None) for x in xs]
    out = []
    for x, Gy in pairs:
        if not np.isfinite(x) or abs(x) < ZERO_TOL or abs(x) > INF_TOL:
            continue
        xpow = x ** np.arange(max(G1.shape[0], G2.shape[0]))
        polys = [xpow[:G.shape[0]] @ G for G in ((Gy,) if Gy is not None else (G1, G2))]
        best, best_res = None, math.inf
        for py in polys:
            if py.size < 2:
                continue
            ys, _ = _univariate_roots(np.arange(py.size), py)
            for y in ys:
                z = np.array([y, x] if swap else [x, y])
                res = relative_residual(f, z)
                if Gy is not None:
                    out.append(z)
                elif res < best_res:
                    best, best_res = z, res
        if best is not None:
            out.append(best)
    return out


def solve_bivariate(f, expected: int | None = None) -> RootSet:
    """Roots in (C*)^2; ``expected`` (e.g. the Bernshtein count) enables the rejection flag."""
    if f.spec.n != 2:
        raise SupportError("solve_bivariate needs n = 2")
    if max(int(s.exponents.max()) - int(s.exponents.min()) for s in f.spec.polys) > 12:
        raise DimensionLimitError("solve_bivariate is meant for small supports")
    attempts = []
    for swap in (False, True):
        roots = []
        for z in _bivariate_candidates(f, swap):
            z = newton_polish(f, z)
            if _in_torus(z):
                r = _make_root(f, z)
                if r.residual <= RESIDUAL_TOL:
                    roots.append(r)
        roots = _dedupe(roots)
        attempts.append(roots)
        if expected is None or len(roots) == expected:
            return RootSet(roots, "sylvester-y" if swap else "sylvester-x")
    best = max(attempts, key=len)
    log.debug("bivariate solve found %s roots, expected %s", [len(a) for a in attempts], expected)
    return RootSet(best, "sylvester", rejected=True,
                   info={"found": [len(a) for a in attempts], "expected": expected})


def solve(f, expected: int | None = None) -> RootSet:
    """Dispatch on the system shape."""
    if f.spec.is_linear:
        return solve_linear(f)
    if f.spec.n == 1:
        rs = solve_univariate(f)
    elif f.spec.n == 2:
        rs = solve_bivariate(f, expected=expected)
        return rs
    else:
        raise DimensionLimitError("nonlinear solving is limited to n <= 2")
    if expected is not None and len(rs) != expected:
        rs.rejected = True
    return rs


def expected_count(spec) -> int:
    return bernshtein_count(spec.polys)


class _CountAll:
    def __init__(self, spec, region, expected):
        self.spec, self.region, self.expected = spec, region, expected

    def __call__(self, rng, size):
        coeffs = sample_coeffs(self.spec, rng, size)
        out = np.full(size, -1, dtype=np.int64)
        for k in range(size):
            f = PolySample(tuple(c[k] for c in coeffs), self.spec)
            rs = solve(f, expected=self.expected)
            if rs.rejected:
                continue
            out[k] = sum(int(self.region.contains(r.point.p, r.point.q)[0]) for r in rs.roots)
        return out


def expected_roots_mc(spec, region, samples: int, seed: int,
                      workers: int = 1) -> dict:
    """Solve-and-count Monte Carlo estimate of the number of roots in ``region``."""
    expected = None if spec.is_linear else expected_count(spec)
    counts = np.concatenate(run_chunks(_CountAll(spec, region, expected), samples, seed,
                                       stream=61, workers=workers))
    ok = counts >= 0
    rejected = int((~ok).sum())
    if rejected > 0.01 * samples:
        raise NumericalError(f"solver rejected {rejected} of {samples} samples")
    mean, se = mean_stderr(counts[ok])
    return {"mean": mean, "stderr": se, "samples": samples, "rejected": rejected}
