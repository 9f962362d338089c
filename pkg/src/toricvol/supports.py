"""Supports, Newton polytopes and the exact mixed-volume oracle.

Everything in the oracle path (hulls, volumes, mixed volumes) runs in exact
rational arithmetic when the inputs are integral, so the ground truth used by
the quadrature and Monte Carlo checks carries no tolerance of its own.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from .errors import DimensionLimitError, SupportError

ORACLE_MAX_DIM = 3


@dataclass(frozen=True)
class SupportSpec:
    """Support matrix ``A`` (rows are exponent vectors) and the diagonal of ``C``."""

    exponents: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.exponents)
        if A.ndim == 1:
            A = A.reshape(-1, 1)
        if A.size == 0:
            raise SupportError("empty support")
        if not np.all(np.equal(np.mod(A, 1), 0)):
            raise SupportError("exponents must be integers")
        A = A.astype(np.int64)
        if np.any(A < 0):
            raise SupportError("exponents must be non-negative")
        if len({tuple(r) for r in A.tolist()}) != A.shape[0]:
            raise SupportError("duplicate exponent rows")
        C = np.asarray(self.variances, dtype=float).reshape(-1)
        if C.shape[0] != A.shape[0]:
            raise SupportError(
                f"variance length {C.shape[0]} does not match {A.shape[0]} support rows")
        if not np.all(np.isfinite(C)) or np.any(C <= 0):
            raise SupportError("variances must be finite and strictly positive")
        A.setflags(write=False)
        C.setflags(write=False)
        object.__setattr__(self, "exponents", A)
        object.__setattr__(self, "variances", C)

    @classmethod
    def from_rows(cls, rows, variances=None) -> "SupportSpec":
        A = np.asarray(rows)
        if A.ndim == 1:
            A = A.reshape(-1, 1)
        if variances is None:
            variances = np.ones(A.shape[0])
        return cls(A, np.asarray(variances, dtype=float))

    @classmethod
    def from_json(cls, obj: dict) -> "SupportSpec":
        if "support" not in obj:
            raise SupportError("support entry missing 'support' key")
        return cls.from_rows(obj["support"], obj.get("variance"))

    def to_json(self) -> dict:
        return {"support": self.exponents.tolist(), "variance": self.variances.tolist()}

    @property
    def n(self) -> int:
        return self.exponents.shape[1]

    @property
    def size(self) -> int:
        return self.exponents.shape[0]

    @property
    def affine_dim(self) -> int:
        return affine_rank(self.exponents.tolist())

    @property
    def is_full_dimensional(self) -> bool:
        return self.affine_dim == self.n

    def polytope(self) -> "Polytope":
        return convex_hull(self.exponents.tolist())

    def same_as(self, other: "SupportSpec") -> bool:
        return (self.exponents.shape == other.exponents.shape
                and np.array_equal(self.exponents, other.exponents)
                and np.array_equal(self.variances, other.variances))


def dense_support(n: int, d: int) -> np.ndarray:
    """All exponent vectors in ``n`` variables of total degree at most ``d``."""
    rows = [e for e in itertools.product(range(d + 1), repeat=n) if sum(e) <= d]
    rows.sort(key=lambda e: (sum(e), tuple(-x for x in e)))
    return np.array(rows, dtype=np.int64).reshape(-1, n)


def multinomial_weights(A: np.ndarray, d: int) -> np.ndarray:
    """``d! / (a_1! ... a_n! (d - |a|)!)`` for each row ``a`` of ``A``."""
    out = []
    for row in np.asarray(A).tolist():
        rest = d - sum(row)
        if rest < 0:
            raise SupportError(f"row {row} exceeds degree {d}")
        w = math.factorial(d) // math.factorial(rest)
        for a in row:
            w //= math.factorial(a)
        out.append(float(w))
    return np.array(out)


def kostlan_support(n: int, d: int, scale: float = 1.0) -> SupportSpec:
    """Dense degree-``d`` support with multinomial variances (times ``scale``)."""
    A = dense_support(n, d)
    return SupportSpec(A, scale * multinomial_weights(A, d))


def linear_support(n: int) -> SupportSpec:
    """The linear support ``{0, e_1, ..., e_n}`` with identity variance."""
    A = np.vstack([np.zeros((1, n), dtype=np.int64), np.eye(n, dtype=np.int64)])
    return SupportSpec(A, np.ones(n + 1))


# ---------------------------------------------------------------- exact kernels

def _frac_points(points) -> list[tuple[Fraction, ...]]:
    pts = []
    for p in points:
        if np.isscalar(p):
            p = (p,)
        pts.append(tuple(Fraction(x) for x in p))
    return pts


def _row_reduce(rows: list[list[Fraction]]) -> tuple[int, list[int]]:
    """Rank and pivot columns of a rational matrix (Gaussian elimination)."""
    m = [list(r) for r in rows]
    if not m:
        return 0, []
    ncols = len(m[0])
    rank, pivots = 0, []
    for c in range(ncols):
        piv = next((r for r in range(rank, len(m)) if m[r][c] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for r in range(len(m)):
            if r != rank and m[r][c] != 0:
                f = m[r][c] / m[rank][c]
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        pivots.append(c)
        rank += 1
        if rank == len(m):
            break
    return rank, pivots


def affine_rank(points) -> int:
    """Dimension of the affine hull of ``points`` (exact)."""
    pts = _frac_points(points)
    if not pts:
        raise SupportError("empty support")
    base = pts[0]
    diffs = [[a - b for a, b in zip(p, base)] for p in pts[1:]]
    return _row_reduce(diffs)[0] if diffs else 0


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _hull_2d(pts):
    """Andrew's monotone chain; returns CCW vertices with collinear points dropped."""
    pts = sorted(set(pts))
    if len(pts) <= 2:
        return pts
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


@dataclass(frozen=True)
class Polytope:
    """A convex polytope given by its exact vertex set.

    For ``n == 2`` and full dimension the vertices are in counter-clockwise
    order.  ``facets`` (3-d only) holds vertex-index triangles of a
    triangulated boundary.
    """

    vertices: tuple
    n: int
    affine_dim: int
    facets: tuple = field(default=(), compare=False)

    @property
    def is_full_dimensional(self) -> bool:
        return self.affine_dim == self.n

    def as_array(self) -> np.ndarray:
        return np.array([[float(x) for x in v] for v in self.vertices]).reshape(-1, self.n)

    def is_lattice(self) -> bool:
        return all(Fraction(x).denominator == 1 for v in self.vertices for x in v)

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """Outward facet normals ``N`` and offsets ``b`` with ``N x <= b`` inside.

        Normals are unit length so ``b - N x`` is the Euclidean facet distance.
        """
        if not self.is_full_dimensional:
            raise SupportError("halfspaces need a full-dimensional polytope")
        V = self.as_array()
        if self.n == 1:
            N = np.array([[1.0], [-1.0]])
            b = np.array([V.max(), -V.min()])
            return N, b
        if self.n == 2:
            N, b = [], []
            k = len(V)
            for i in range(k):
                a, c = V[i], V[(i + 1) % k]
                e = c - a
                nrm = np.array([e[1], -e[0]])  # outward for CCW order
                nrm /= np.linalg.norm(nrm)
                N.append(nrm)
                b.append(nrm @ a)
            return np.array(N), np.array(b)
        hull = ConvexHull(V)
        eq = hull.equations
        return eq[:, :-1], -eq[:, -1]

    def contains(self, x, margin: float = 0.0) -> np.ndarray:
        """Facet-inequality membership: every facet slack must exceed ``margin``."""
        N, b = self.halfspaces()
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.all(b[None, :] - x @ N.T > margin, axis=1)

    def min_slack(self, x) -> np.ndarray:
        N, b = self.halfspaces()
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.min(b[None, :] - x @ N.T, axis=1)


def convex_hull(points) -> Polytope:
    """Exact vertex set of the convex hull of ``points`` (``n <= 3``).

    Lower-dimensional inputs are accepted; ``affine_dim`` reports the
    dimension of the hull.
    """
    pts = _frac_points(points)
    if not pts:
        raise SupportError("empty support")
    n = len(pts[0])
    if any(len(p) != n for p in pts):
        raise SupportError("points of mixed dimension")
    if n > ORACLE_MAX_DIM:
        raise DimensionLimitError("oracle dimension limit: n <= 3")
    pts = sorted(set(pts))
    base = pts[0]
    rank, pivots = _row_reduce([[a - b for a, b in zip(p, base)] for p in pts[1:]])
    if rank == 0:
        return Polytope((pts[0],), n, 0)
    if rank < n:
        # Projection onto the pivot coordinates is injective on the affine hull.
        proj = {tuple(p[c] for c in pivots): p for p in pts}
        sub = convex_hull(list(proj))
        return Polytope(tuple(proj[v] for v in sub.vertices), n, rank)
    if n == 1:
        return Polytope((pts[0], pts[-1]), 1, 1)
    if n == 2:
        return Polytope(tuple(_hull_2d(pts)), 2, 2)
    hull = ConvexHull(np.array([[float(x) for x in p] for p in pts]))
    idx = sorted(set(int(i) for i in hull.vertices))
    verts = tuple(pts[i] for i in idx)
    remap = {old: new for new, old in enumerate(idx)}
    facets = tuple(tuple(remap[int(i)] for i in s) for s in hull.simplices)
    return Polytope(verts, 3, 3, facets)


def polytope_volume(P: Polytope) -> Fraction:
    """Euclidean n-volume; zero for lower-dimensional polytopes."""
    if P.n > ORACLE_MAX_DIM:
        raise DimensionLimitError("oracle dimension limit: n <= 3")
    if not P.is_full_dimensional:
        return Fraction(0)
    V = [tuple(Fraction(x) for x in v) for v in P.vertices]
    if P.n == 1:
        return max(v[0] for v in V) - min(v[0] for v in V)
    if P.n == 2:
        area = Fraction(0)
        for i in range(len(V)):
            x0, y0 = V[i]
            x1, y1 = V[(i + 1) % len(V)]
            area += x0 * y1 - x1 * y0
        return abs(area) / 2
    k = len(V)
    c = tuple(sum(v[j] for v in V) / k for j in range(3))
    vol = Fraction(0)
    for a, b, d in P.facets:
        u = [V[a][j] - c[j] for j in range(3)]
        v = [V[b][j] - c[j] for j in range(3)]
        w = [V[d][j] - c[j] for j in range(3)]
        det = (u[0] * (v[1] * w[2] - v[2] * w[1])
               - u[1] * (v[0] * w[2] - v[2] * w[0])
               + u[2] * (v[0] * w[1] - v[1] * w[0]))
        vol += abs(det)
    return vol / 6


def minkowski_sum(*polys: Polytope) -> Polytope:
    if not polys:
        raise SupportError("empty Minkowski sum")
    verts = [tuple(Fraction(x) for x in v) for v in polys[0].vertices]
    for Q in polys[1:]:
        verts = [tuple(a + b for a, b in zip(u, w)) for u in verts for w in Q.vertices]
    return convex_hull(verts)


def mixed_volume_oracle(*polys: Polytope) -> Fraction:
    """Mixed volume by polarization over all nonempty subsets.

    Normalized so that ``MV(P, ..., P) == Vol(P)``; the generic root count of
    a system with these Newton polytopes is ``n! * MV``.
    """
    if len(polys) == 1 and isinstance(polys[0], (list, tuple)):
        polys = tuple(polys[0])
    n = len(polys)
    if n == 0:
        raise SupportError("mixed volume of zero polytopes")
    if any(P.n != n for P in polys):
        raise SupportError("need n polytopes in R^n")
    if n > ORACLE_MAX_DIM:
        raise DimensionLimitError("oracle dimension limit: n <= 3")
    total = Fraction(0)
    for k in range(1, n + 1):
        for S in itertools.combinations(range(n), k):
            vol = polytope_volume(minkowski_sum(*(polys[i] for i in S)))
            total += (-1) ** (n - k) * vol
    return total / math.factorial(n)


def bernshtein_count(supports: Sequence[SupportSpec]) -> int:
    """``n! * MV`` of the Newton polytopes of ``supports``."""
    mv = mixed_volume_oracle(*(s.polytope() for s in supports))
    count = mv * math.factorial(len(supports))
    assert count.denominator == 1
    return int(count)


def diameter(P: Polytope) -> float:
    V = P.as_array()
    if len(V) < 2:
        return 0.0
    d = V[:, None, :] - V[None, :, :]
    return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))


def delzant_check_2d(P: Polytope) -> tuple[bool, dict]:
    """Smoothness test for a lattice polygon.

    Every vertex must meet exactly two edges whose primitive integer edge
    vectors have determinant +-1.
    """
    if P.n != 2:
        raise SupportError("delzant_check_2d needs n = 2")
    if not P.is_lattice():
        raise SupportError("non-lattice vertices")
    if not P.is_full_dimensional:
        return False, {"reason": "not full-dimensional", "vertices": []}
    V = [tuple(int(x) for x in v) for v in P.vertices]
    k = len(V)
    report = []
    ok = True
    for i, v in enumerate(V):
        prims = []
        for w in (V[(i + 1) % k], V[i - 1]):
            e = (w[0] - v[0], w[1] - v[1])
            g = math.gcd(abs(e[0]), abs(e[1]))
            prims.append((e[0] // g, e[1] // g))
        det = prims[0][0] * prims[1][1] - prims[0][1] * prims[1][0]
        smooth = abs(det) == 1
        ok &= smooth
        report.append({"vertex": v, "edges": prims, "det": det, "smooth": smooth})
    return ok, {"vertices": report}


def lp_membership_margin(point, vertices) -> float:
    """Largest ``t`` with ``point = sum l_a V_a``, ``sum l_a = 1``, ``l_a >= t``.

    Positive for relative-interior points, zero on the boundary, and the LP is
    infeasible (reported as ``-inf``) outside the hull.
    """
    V = np.asarray(vertices, dtype=float)
    x = np.asarray(point, dtype=float).reshape(-1)
    m, n = V.shape
    # variables: lambda (m), t ; maximize t
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_eq = np.zeros((n + 1, m + 1))
    A_eq[:n, :m] = V.T
    A_eq[n, :m] = 1.0
    b_eq = np.concatenate([x, [1.0]])
    A_ub = np.hstack([-np.eye(m), np.ones((m, 1))])  # t - lambda_a <= 0
    b_ub = np.zeros(m)
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=[(None, None)] * (m + 1), method="highs")
    if res.status != 0:
        return -math.inf
    return float(-res.fun)

