import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import logsumexp

from toricvol.errors import NotInteriorError
from toricvol.supports import diameter, kostlan_support, linear_support, lp_membership_margin
from toricvol.systems import SystemSpec
from toricvol.toric import (
    ToricPoint,
    dv_geom_identity_check,
    hamiltonian,
    hamiltonian_flow,
    hamiltonian_flow_rk4,
    kahler_eval,
    metric_batch,
    metric_det_batch,
    mixed_discriminant,
    momentum,
    momentum_batch,
    momentum_invert,
    momentum_preimage_volume,
    potential,
    root_density,
    veronese_batch,
    weights,
)

from conftest import RECT_2x1, SQUARE, TRIANGLE, support

SPECS = [
    support([[0], [3]]),
    support([[0], [3], [7]]),
    kostlan_support(1, 4),
    support(SQUARE),
    support(TRIANGLE),
    support(RECT_2x1),
    kostlan_support(2, 3),
    support([[0, 0], [2, 1], [1, 3]], [1.0, 0.3, 2.5]),
]


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def random_points(rng, spec, count, scale=1.5):
    return rng.normal(scale=scale, size=(count, spec.n))


# ------------------------------------------------------------ hand values

def test_potential_two_term_at_origin():
    spec = support([[0], [3]])
    ev = kahler_eval(spec, [0.0])
    assert ev.g == pytest.approx(0.5 * math.log(2.0), abs=1e-15)
    assert ev.grad[0] == pytest.approx(1.5, abs=1e-15)
    assert ev.hess[0, 0] == pytest.approx(4.5, abs=1e-14)


def test_square_momentum_at_origin():
    assert np.allclose(momentum(support(SQUARE), [0.0, 0.0]), [0.5, 0.5], atol=1e-15)


def test_weights_sum_to_one_and_match_vhat(rng):
    spec = SPECS[-1]
    for p in random_points(rng, spec, 20):
        ev = kahler_eval(spec, p)
        w = weights(spec, p[None, :])[0]
        assert w.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.allclose(w, np.abs(ev.vhat) ** 2 / ev.vnorm ** 2, atol=1e-14)


def test_potential_far_out_is_finite():
    spec = kostlan_support(2, 3)
    ev = kahler_eval(spec, [400.0, -300.0])
    assert np.isfinite(ev.g) and np.all(np.isfinite(ev.v)) and np.all(np.isfinite(ev.metric))


def test_veronese_batch_matches_pointwise(rng):
    spec = SPECS[-1]
    P = random_points(rng, spec, 15)
    Q = rng.uniform(0, 2 * np.pi, size=P.shape)
    v, dv, M = veronese_batch(spec, P, Q)
    for k in range(15):
        ev = kahler_eval(spec, ToricPoint(P[k], Q[k]))
        assert np.allclose(v[k], ev.v, atol=1e-14)
        assert np.allclose(dv[k], ev.dv, atol=1e-13)
        assert np.allclose(M[k], ev.metric, atol=1e-13)


# ------------------------------------------------- finite-difference oracles

H = 1e-5


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"n{s.n}m{s.size}")
def test_gradient_matches_finite_differences(spec, rng):
    worst = 0.0
    for p in random_points(rng, spec, 100 // len(SPECS) + 1):
        g = np.array([(potential(spec, p + H * e) - potential(spec, p - H * e)) / (2 * H)
                      for e in np.eye(spec.n)])
        worst = max(worst, rel_err(g, momentum(spec, p)))
    assert worst < 1e-5


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"n{s.n}m{s.size}")
def test_hessian_matches_finite_differences(spec, rng):
    worst = 0.0
    for p in random_points(rng, spec, 100 // len(SPECS) + 1):
        cols = [(momentum(spec, p + H * e) - momentum(spec, p - H * e)) / (2 * H)
                for e in np.eye(spec.n)]
        worst = max(worst, rel_err(np.column_stack(cols), kahler_eval(spec, p).hess))
    assert worst < 1e-5


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"n{s.n}m{s.size}")
def test_dv_matches_finite_differences(spec, rng):
    worst = 0.0
    for p in random_points(rng, spec, 100 // len(SPECS) + 1):
        q = rng.uniform(0, 2 * np.pi, spec.n)
        ev = kahler_eval(spec, ToricPoint(p, q))
        for j, e in enumerate(np.eye(spec.n)):
            dp = (kahler_eval(spec, ToricPoint(p + H * e, q)).v
                  - kahler_eval(spec, ToricPoint(p - H * e, q)).v) / (2 * H)
            worst = max(worst, rel_err(dp, ev.dv[:, j]))
            # q direction: the horizontal part of dv/dq is i Dv
            dq = (kahler_eval(spec, ToricPoint(p, q + H * e)).v
                  - kahler_eval(spec, ToricPoint(p, q - H * e)).v) / (2 * H)
            horiz = dq - ev.v * (ev.v.conj() @ dq)
            worst = max(worst, rel_err(horiz, 1j * ev.dv[:, j]))
    assert worst < 1e-5


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"n{s.n}m{s.size}")
def test_dv_identity_between_projected_and_momentum_forms(spec, rng):
    resid = max(dv_geom_identity_check(spec, p, rng.normal(size=spec.n))
                for p in random_points(rng, spec, 30))
    assert resid < 1e-10


def test_dv_identity_against_library_dv(rng):
    spec = SPECS[-1]
    for p in random_points(rng, spec, 30):
        u = rng.normal(size=spec.n)
        ev = kahler_eval(spec, p)
        A = spec.exponents.astype(float)
        ref = np.abs(ev.vhat) / ev.vnorm * ((A - ev.grad) @ u)
        assert np.max(np.abs(ev.dv @ u - ref)) < 1e-10


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"n{s.n}m{s.size}")
def test_dv_and_metric_norms_bounded_by_diameter(spec, rng):
    diam = diameter(spec.polytope())
    P = random_points(rng, spec, 10_000, scale=3.0)
    Q = rng.uniform(0, 2 * np.pi, size=P.shape)
    _, dv, M = veronese_batch(spec, P, Q)
    assert np.all(np.linalg.norm(dv, ord=2, axis=(1, 2)) <= diam * (1 + 1e-12))
    assert np.all(np.linalg.norm(M, ord=2, axis=(1, 2)) <= diam ** 2 * (1 + 1e-12))


def test_metric_is_half_hessian_and_gram_of_dv(rng):
    spec = kostlan_support(2, 3)
    for p in random_points(rng, spec, 10):
        ev = kahler_eval(spec, ToricPoint(p, rng.uniform(0, 6, 2)))
        assert np.allclose(ev.metric, 0.5 * ev.hess, atol=1e-14)
        assert np.allclose((ev.dv.conj().T @ ev.dv).real, ev.metric, atol=1e-13)


# ------------------------------------------------------------ momentum map

@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"n{s.n}m{s.size}")
def test_momentum_image_strictly_inside(spec, rng):
    P = random_points(rng, spec, 10_000, scale=3.0)
    # finite log-weights: the image is a convex combination with every weight positive
    L = 2.0 * P @ spec.exponents.T.astype(float) + np.log(spec.variances)
    logw = L - logsumexp(L, axis=1, keepdims=True)
    assert np.all(np.isfinite(logw))
    X = momentum_batch(spec, P)
    poly = spec.polytope()
    slack = poly.min_slack(X)
    assert np.all(slack > -1e-12)
    # away from saturated weights the float image is strictly inside as well
    unsaturated = logw.min(axis=1) > math.log(1e-9)
    assert np.all(slack[unsaturated] > 0)
    verts = poly.as_array()
    for x, free in zip(X[::250], unsaturated[::250]):
        margin = lp_membership_margin(x, verts)
        assert margin > 0 if free else margin > -1e-12


def test_momentum_image_inside_with_positive_lp_margin_moderate_points(rng):
    spec = support(RECT_2x1)
    P = rng.uniform(-2, 2, size=(200, 2))
    X = momentum_batch(spec, P)
    assert np.all(spec.polytope().min_slack(X) > 1e-6)
    for x in X[:20]:
        assert lp_membership_margin(x, spec.polytope().as_array()) > 1e-6


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"n{s.n}m{s.size}")
def test_momentum_invert_round_trip(spec, rng):
    for p in random_points(rng, spec, 10, scale=1.0):
        target = momentum(spec, p)
        back = momentum_invert(spec, target)
        assert np.max(np.abs(momentum(spec, back) - target)) < 1e-8
        assert np.allclose(back, p, atol=1e-6)


def test_momentum_invert_rejects_boundary_targets():
    spec = support(SQUARE)
    with pytest.raises(NotInteriorError):
        momentum_invert(spec, [1.0, 0.5])
    with pytest.raises(NotInteriorError):
        momentum_invert(spec, [2.0, 0.5])


@pytest.mark.parametrize("spec,box", [
    (support([[0], [3]]), [[0.5, 2.5]]),
    (kostlan_support(1, 4), [[1.0, 3.5]]),
    (support(SQUARE), [[0.2, 0.7], [0.3, 0.9]]),
    (support(TRIANGLE), [[0.1, 0.4], [0.2, 0.5]]),
])
def test_preimage_volume_is_pi_n_times_box_volume(spec, box):
    vol = float(np.prod([b - a for a, b in box]))
    got = momentum_preimage_volume(spec, box, h=0.005)
    assert got == pytest.approx(math.pi ** spec.n * vol, rel=5e-3)


# ---------------------------------------------------- mixed discriminant

def random_spd(rng, n, count=1):
    X = rng.normal(size=(count, n, n))
    return X @ np.transpose(X, (0, 2, 1)) + 0.1 * np.eye(n)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_mixed_discriminant_diagonal_is_det(n, rng):
    M = random_spd(rng, n)[0]
    assert mixed_discriminant(*([M] * n)) == pytest.approx(np.linalg.det(M), rel=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_mixed_discriminant_polarization(n, rng):
    """det(sum t_i M_i) expands with n!/prod(k!) D(...) coefficients; check via t = 1."""
    mats = list(random_spd(rng, n, n))
    total = 0.0
    for combo in itertools.product(range(n), repeat=n):
        total += mixed_discriminant(*[mats[c] for c in combo])
    assert total == pytest.approx(np.linalg.det(sum(mats)), rel=1e-10)


def test_mixed_discriminant_symmetric_and_positive(rng):
    a, b, c = random_spd(rng, 3, 3)
    d1 = mixed_discriminant(a, b, c)
    assert d1 > 0
    assert d1 == pytest.approx(mixed_discriminant(c, a, b), rel=1e-12)
    assert mixed_discriminant(2 * a, b, c) == pytest.approx(2 * d1, rel=1e-12)


def test_mixed_discriminant_diagonal_matrices():
    a, b = np.diag([1.0, 2.0]), np.diag([3.0, 5.0])
    # 1/2 (a11 b22 + a22 b11)
    assert mixed_discriminant(a, b) == pytest.approx(0.5 * (5.0 + 6.0))


def test_mixed_discriminant_batched(rng):
    a, b = random_spd(rng, 2, 7), random_spd(rng, 2, 7)
    batch = mixed_discriminant(a, b)
    assert batch.shape == (7,)
    for k in range(7):
        assert batch[k] == pytest.approx(mixed_discriminant(a[k], b[k]), rel=1e-12)


@pytest.mark.parametrize("spec", SPECS[3:] + SPECS[:3], ids=lambda s: f"n{s.n}m{s.size}")
def test_metric_det_subset_sum_matches_det(spec, rng):
    P = random_points(rng, spec, 50)
    assert np.allclose(metric_det_batch(spec, P), np.linalg.det(metric_batch(spec, P)),
                       rtol=1e-9, atol=1e-15)


def test_metric_det_subset_sum_keeps_relative_accuracy_in_tails():
    spec = support([[0], [1], [2]])
    p = np.array([[-30.0]])
    # weights ~ (1, e^{2p}, e^{4p}); variance ~ e^{2p}
    assert metric_det_batch(spec, p)[0] == pytest.approx(math.exp(-60.0), rel=1e-6)


def test_root_density_unmixed_is_scaled_det(rng):
    spec = support(TRIANGLE)
    sysm = SystemSpec((spec, spec))
    for p in random_points(rng, spec, 5):
        dens = root_density(sysm, p)
        assert dens == pytest.approx(2 / math.pi ** 2 * np.linalg.det(kahler_eval(spec, p).metric),
                                     rel=1e-12)


# ------------------------------------------------------------ hamiltonian flow

@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-2, 2), st.floats(-2, 2), st.floats(-4, 4))
def test_flow_freezes_p_bitwise_and_conserves_energy(p0, p1, x0, x1, t):
    spec = support(RECT_2x1)
    start = ToricPoint(np.array([p0, p1]), np.array([0.3, -1.0]))
    end = hamiltonian_flow(spec, start, [x0, x1], t)
    assert np.array_equal(end.p, start.p)
    assert hamiltonian(spec, end, [x0, x1]) == hamiltonian(spec, start, [x0, x1])


@pytest.mark.parametrize("spec", [SPECS[1], SPECS[5], SPECS[6]], ids=["n1", "rect", "kostlan"])
def test_flow_matches_rk4(spec, rng):
    for _ in range(3):
        start = ToricPoint(rng.normal(size=spec.n), rng.uniform(0, 6, spec.n))
        xi = rng.normal(size=spec.n)
        exact = hamiltonian_flow(spec, start, xi, 1.7)
        num = hamiltonian_flow_rk4(spec, start, xi, 1.7)
        assert np.max(np.abs(exact.q - num.q)) < 1e-9
        assert np.max(np.abs(exact.p - num.p)) < 1e-9


def test_linear_momentum_is_softmax():
    spec = linear_support(2)
    p = np.array([0.4, -0.2])
    e = np.exp(2 * np.array([0.0, *p]))
    assert np.allclose(momentum(spec, p), e[1:] / e.sum(), atol=1e-15)
