"""Kähler potential, momentum map and derived kernels on the log-torus.

For a support ``A`` (M x n) and variances ``C`` the potential is

    g(p) = 1/2 log sum_a C_a exp(2 A_a . p)

so every quantity below is a moment of the softmax weights
``w_a = C_a exp(2 A_a . p) / sum_b C_b exp(2 A_b . p)``.  Working with the
weights in log space keeps all kernels finite for large ``|p|``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConvergenceError, NotInteriorError, SupportError
from .supports import SupportSpec

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ToricPoint:
    """A point ``p + i q`` of the log-torus, ``q`` reduced into ``[0, 2 pi)``."""

    p: np.ndarray
    q: np.ndarray | None = None

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float)).copy()
        q = self.q
        q = np.zeros_like(p) if q is None else np.atleast_1d(np.asarray(q, dtype=float))
        if q.shape != p.shape:
            raise ValueError("p and q must have the same length")
        q = np.mod(q, TWO_PI)
        q[q >= TWO_PI] = 0.0
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def from_z(cls, z) -> "ToricPoint":
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return cls(np.log(np.abs(z)), np.angle(z))

    @property
    def n(self) -> int:
        return self.p.shape[0]

    def to_z(self) -> np.ndarray:
        return np.exp(self.p + 1j * self.q)

    def to_json(self) -> dict:
        return {"p": self.p.tolist(), "q": self.q.tolist()}


def as_point(at, n: int | None = None) -> ToricPoint:
    if isinstance(at, ToricPoint):
        return at
    return ToricPoint(np.atleast_1d(np.asarray(at, dtype=float)), None)


@dataclass(frozen=True)
class KahlerEval:
    at: ToricPoint
    vhat: np.ndarray      # C^{1/2} exp(A (p + i q)); may overflow for huge |p|
    v: np.ndarray         # vhat / |vhat|, always finite
    vnorm: float
    g: float
    grad: np.ndarray
    hess: np.ndarray
    dv: np.ndarray
    metric: np.ndarray


# ---------------------------------------------------------------- batch kernels

def _logits(spec: SupportSpec, P: np.ndarray) -> np.ndarray:
    A = spec.exponents.astype(float)
    return 2.0 * P @ A.T + np.log(spec.variances)[None, :]


def potential(spec: SupportSpec, P) -> np.ndarray:
    """``g_A`` at each row of ``P`` (shape ``(N, n)`` or ``(n,)``)."""
    P = np.asarray(P, dtype=float)
    single = P.ndim == 1
    val = 0.5 * logsumexp(_logits(spec, np.atleast_2d(P)), axis=1)
    return val[0] if single else val


def weights(spec: SupportSpec, P: np.ndarray) -> np.ndarray:
    """Squared moduli ``|v_a|^2`` of the normalized Veronese vector, shape ``(N, M)``."""
    L = _logits(spec, np.atleast_2d(np.asarray(P, dtype=float)))
    L -= L.max(axis=1, keepdims=True)
    W = np.exp(L)
    W /= W.sum(axis=1, keepdims=True)
    return W


def momentum_batch(spec: SupportSpec, P) -> np.ndarray:
    return weights(spec, P) @ spec.exponents.astype(float)


def metric_batch(spec: SupportSpec, P) -> np.ndarray:
    """``1/2 D^2 g_A`` at each row of ``P``; shape ``(N, n, n)``.

    Computed in centered form ``sum_a w_a (A_a - grad)(A_a - grad)^T`` to
    avoid cancellation far from the origin.
    """
    W = weights(spec, P)
    A = spec.exponents.astype(float)
    grad = W @ A
    Ac = A[None, :, :] - grad[:, None, :]
    return np.einsum("na,nai,naj->nij", W, Ac, Ac)


def metric_det_batch(spec: SupportSpec, P) -> np.ndarray:
    """``det(1/2 D^2 g_A)`` at each row of ``P`` as a sum of nonnegative terms.

    Uses ``det Cov = sum_S prod_{a in S} w_a det[1 A_S]^2`` over subsets of
    ``n + 1`` support points, with the weights kept in log form, so the value
    keeps full relative accuracy far out in the tails.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    L = _logits(spec, P)
    logw = L - logsumexp(L, axis=1, keepdims=True)
    A = spec.exponents.astype(float)
    n = spec.n
    total = np.zeros(P.shape[0])
    for S in itertools.combinations(range(spec.size), n + 1):
        d = np.linalg.det(np.column_stack([np.ones(n + 1), A[list(S)]]))
        if d != 0.0:
            total += np.exp(logw[:, list(S)].sum(axis=1)) * d * d
    return total


def veronese_batch(spec: SupportSpec, P, Q) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalized ``v``, ``Dv`` and the metric at rows of ``P + i Q``.

    Shapes ``(N, M)``, ``(N, M, n)`` and ``(N, n, n)``.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    A = spec.exponents.astype(float)
    W = weights(spec, P)
    v = np.sqrt(W) * np.exp(1j * (Q @ A.T))
    Ac = A[None, :, :] - (W @ A)[:, None, :]
    dv = v[:, :, None] * Ac
    metric = np.einsum("na,nai,naj->nij", W, Ac, Ac)
    return v, dv, metric


def momentum(spec: SupportSpec, at) -> np.ndarray:
    return momentum_batch(spec, as_point(at).p[None, :])[0]


def kahler_eval(spec: SupportSpec, at) -> KahlerEval:
    at = as_point(at)
    p, q = at.p, at.q
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
        raise ValueError("non-finite toric point")
    if p.shape[0] != spec.n:
        raise SupportError(f"point has {p.shape[0]} coordinates, support has n={spec.n}")
    A = spec.exponents.astype(float)
    logmod = 0.5 * np.log(spec.variances) + A @ p
    phase = np.exp(1j * (A @ q))
    shift = logmod.max()
    scaled = np.exp(logmod - shift)
    nrm_scaled = np.sqrt(np.sum(scaled ** 2))
    v = (scaled / nrm_scaled) * phase
    g = shift + math.log(nrm_scaled)
    with np.errstate(over="ignore", invalid="ignore"):
        vhat = np.exp(logmod) * phase
        vnorm = float(np.exp(g))
    w = np.abs(v) ** 2
    grad = w @ A
    Ac = A - grad[None, :]
    dv = v[:, None] * Ac
    metric = np.einsum("a,ai,aj->ij", w, Ac, Ac)
    return KahlerEval(at=at, vhat=vhat, v=v, vnorm=vnorm, g=float(g), grad=grad,
                      hess=2.0 * metric, dv=dv, metric=metric)


def momentum_invert(spec: SupportSpec, target, tol: float = 1e-10, max_iter: int = 200,
                    margin: float = 1e-12) -> np.ndarray:
    """Solve ``grad g_A(p) = target`` by damped Newton on ``g_A(p) - target . p``."""
    target = np.atleast_1d(np.asarray(target, dtype=float))
    poly = spec.polytope()
    if not poly.is_full_dimensional:
        raise SupportError("momentum_invert needs a full-dimensional support")
    if not poly.contains(target, margin=margin)[0]:
        raise NotInteriorError(f"target {target.tolist()} is not interior to Conv(A)")

    def phi(p):
        return potential(spec, p) - target @ p

    p = np.zeros(spec.n)
    res = np.inf
    for _ in range(max_iter):
        grad = momentum_batch(spec, p[None, :])[0] - target
        res = float(np.max(np.abs(grad)))
        if res < tol:
            return p
        H = 2.0 * metric_batch(spec, p[None, :])[0]
        step = -np.linalg.solve(H, grad)
        f0 = phi(p)
        slope = grad @ step
        t = 1.0
        while t > 1e-12:
            cand = p + t * step
            if phi(cand) <= f0 + 1e-4 * t * slope:
                break
            # near the solution phi differences drown in roundoff
            cres = np.max(np.abs(momentum_batch(spec, cand[None, :])[0] - target))
            if cres < res:
                break
            t *= 0.5
        p = p + t * step
    grad = momentum_batch(spec, p[None, :])[0] - target
    res = float(np.max(np.abs(grad)))
    if res < tol:
        return p
    raise ConvergenceError(f"momentum_invert did not converge (residual {res:.3e})",
                           residual=res)


def dv_geom_identity_check(spec: SupportSpec, at, u) -> float:
    """Max deviation between two expressions for ``Dv u`` at ``q = 0``.

    One side is the projected derivative ``diag(v) A u - v v^T diag(v) A u``
    built from ``vhat`` alone; the other is ``|v_a| (A_a - grad g) . u`` with
    the momentum taken from the softmax weights.
    """
    at = as_point(at)
    p = at.p
    u = np.atleast_1d(np.asarray(u, dtype=float))
    A = spec.exponents.astype(float)
    logmod = 0.5 * np.log(spec.variances) + A @ p
    v = np.exp(logmod - logmod.max())
    v /= np.linalg.norm(v)
    Au = A @ u
    lhs = v * Au - v * (v @ (v * Au))
    rhs = np.abs(v) * ((A - momentum(spec, p)[None, :]) @ u)
    return float(np.max(np.abs(lhs - rhs)))


# ------------------------------------------------------------ mixed discriminant

_PERMS: dict[int, list[tuple[int, ...]]] = {}


def mixed_discriminant(*mats) -> np.ndarray | float:
    """Symmetric multilinear extension of ``det``: ``D(M, ..., M) = det M``.

    Accepts ``n`` arrays of shape ``(..., n, n)``; batch dimensions broadcast.
    """
    if len(mats) == 1 and not isinstance(mats[0], np.ndarray):
        mats = tuple(mats[0])
    mats = [np.asarray(m) for m in mats]
    n = len(mats)
    if any(m.shape[-2:] != (n, n) for m in mats):
        raise ValueError(f"mixed_discriminant needs {n} matrices of shape ({n}, {n})")
    if n > 4:
        raise ValueError("mixed_discriminant is limited to n <= 4")
    perms = _PERMS.setdefault(n, list(itertools.permutations(range(n))))
    shape = np.broadcast_shapes(*(m.shape for m in mats))
    mats = [np.broadcast_to(m, shape) for m in mats]
    total = 0.0
    for sigma in perms:
        cols = np.stack([mats[sigma[k]][..., :, k] for k in range(n)], axis=-1)
        total = total + np.linalg.det(cols)
    out = total / math.factorial(n)
    if np.iscomplexobj(out) and np.allclose(np.imag(out), 0.0, atol=1e-14):
        out = np.real(out)
    return out if np.ndim(out) else float(out)


def _polys(system):
    return list(getattr(system, "polys", system))


def root_density_batch(system, P) -> np.ndarray:
    """Expected-root density w.r.t. ``dp dq`` at each row of ``P``."""
    polys = _polys(system)
    n = len(polys)
    P = np.atleast_2d(np.asarray(P, dtype=float))
    mats = [metric_batch(s, P) for s in polys]
    return math.factorial(n) / math.pi ** n * mixed_discriminant(*mats)


def root_density(system, at) -> float:
    """``(n!/pi^n) D(1/2 D^2 g_{A_1}, ..., 1/2 D^2 g_{A_n})``; independent of ``q``."""
    at = as_point(at)
    return float(root_density_batch(system, at.p[None, :])[0])


# ------------------------------------------------------------- Hamiltonian flow

def hamiltonian(spec: SupportSpec, at, xi) -> float:
    return float(momentum(spec, at) @ np.asarray(xi, dtype=float))


def hamiltonian_flow(spec: SupportSpec, start, xi, t: float) -> ToricPoint:
    """Flow of ``H = grad g_A(p) . xi``: ``p`` is frozen, ``q`` drifts by ``-t D^2 g_A(p) xi``."""
    start = as_point(start)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    hess = 2.0 * metric_batch(spec, start.p[None, :])[0]
    return ToricPoint(start.p.copy(), start.q - t * (hess @ xi))


def _hamiltonian_complex(spec: SupportSpec, p: np.ndarray, xi: np.ndarray):
    """``grad g_A(p) . xi`` written with plain exponentials so it accepts complex ``p``."""
    A = spec.exponents.astype(float)
    L = 2.0 * (A @ p) + np.log(spec.variances)
    L = L - np.max(L.real)
    e = np.exp(L)
    return np.sum(e * (A @ xi)) / np.sum(e)


def hamiltonian_vector_field(spec: SupportSpec, p, q, xi, h: float = 1e-30):
    """``(dH/dq, -dH/dp)`` with ``dH/dp`` by complex-step differentiation."""
    p = np.asarray(p, dtype=float)
    xi = np.asarray(xi, dtype=float)
    dHdp = np.empty_like(p)
    for j in range(p.shape[0]):
        e = np.zeros_like(p, dtype=complex)
        e[j] = 1j * h
        dHdp[j] = _hamiltonian_complex(spec, p + e, xi).imag / h
    # H does not depend on q
    return np.zeros_like(p), -dHdp


def hamiltonian_flow_rk4(spec: SupportSpec, start, xi, t: float, steps: int = 64) -> ToricPoint:
    """Classical RK4 integration of the Hamiltonian field; cross-check for the closed form."""
    start = as_point(start)
    p, q = start.p.astype(float).copy(), start.q.astype(float).copy()
    dt = t / steps
    for _ in range(steps):
        k1 = hamiltonian_vector_field(spec, p, q, xi)
        k2 = hamiltonian_vector_field(spec, p + 0.5 * dt * k1[0], q + 0.5 * dt * k1[1], xi)
        k3 = hamiltonian_vector_field(spec, p + 0.5 * dt * k2[0], q + 0.5 * dt * k2[1], xi)
        k4 = hamiltonian_vector_field(spec, p + dt * k3[0], q + dt * k3[1], xi)
        p = p + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        q = q + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return ToricPoint(p, q)


# --------------------------------------------------------- volume preservation

def momentum_preimage_volume(spec: SupportSpec, box, h: float = 0.01) -> float:
    """Symplectic volume of ``{(p, q): grad g_A(p) in box}``.

    Integrates ``det(1/2 D^2 g_A) (2 pi)^n`` against the indicator of the
    preimage on a midpoint grid of spacing ``h``; the grid covers the preimage
    of the box boundary, located with :func:`momentum_invert`.
    """
    box = np.asarray(box, dtype=float).reshape(spec.n, 2)
    n = spec.n
    edge_pts = []
    k = 41
    for corner in itertools.product(*[(lo, hi) for lo, hi in box]):
        edge_pts.append(np.array(corner))
    for j in range(n):
        for t in np.linspace(0.0, 1.0, k):
            for corner in itertools.product(*[(lo, hi) for lo, hi in box]):
                x = np.array(corner, dtype=float)
                x[j] = box[j, 0] + t * (box[j, 1] - box[j, 0])
                edge_pts.append(x)
    pre = np.array([momentum_invert(spec, x) for x in edge_pts])
    lo = pre.min(axis=0)
    hi = pre.max(axis=0)
    pad = 0.1 * (hi - lo) + 4 * h
    lo, hi = lo - pad, hi + pad
    axes = [np.arange(a + h / 2, b, h) for a, b in zip(lo, hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    total = 0.0
    for chunk in np.array_split(mesh, max(1, len(mesh) // 200_000)):
        mom = momentum_batch(spec, chunk)
        inside = np.all((mom > box[:, 0]) & (mom < box[:, 1]), axis=1)
        if not np.any(inside):
            continue
        dets = np.linalg.det(metric_batch(spec, chunk[inside]))
        total += dets.sum()
    return float(total * h ** n * TWO_PI ** n)
