import math

import numpy as np
import pytest

from toricvol.errors import SupportError
from toricvol.montecarlo import rng_for
from toricvol.quadrature import Region
from toricvol.real_roots import (
    count_positive_roots,
    expected_real_mc,
    real_condition_tail,
    real_experiment,
    real_root_density_integral,
    theorem4_bound,
)
from toricvol.systems import PolySample, SystemSpec, kostlan_system, linear_system, sample_coeffs

from conftest import support


def real_one_var(rows, variances=None):
    return SystemSpec((support(rows, variances),), field="real")


FULL = [(-math.inf, math.inf)]


# ------------------------------------------------------------ counting

def test_counts_only_positive_real_roots():
    spec = real_one_var([[0], [2], [4]])
    # (z^2 - 1)(z^2 + 4) = z^4 + 3 z^2 - 4: real roots +-1, one positive
    f = PolySample.from_monomial(spec, [[-4, 3, 1]])
    assert count_positive_roots(f, Region(((-1, 1),))) == 1
    assert count_positive_roots(f, Region(((0.5, 1),))) == 0


def test_linear_one_variable_half():
    est = expected_real_mc(linear_system(1, "real"), FULL, 20_000, seed=1)
    assert abs(est.mean - 0.5) < 3 * est.stderr


def test_kostlan_degree_four_mean_one():
    est = expected_real_mc(kostlan_system(1, [4], "real"), FULL, 6000, seed=2)
    assert abs(est.mean - 1.0) < 3 * est.stderr


def test_requires_real_field(trinomial_037):
    with pytest.raises(SupportError):
        expected_real_mc(trinomial_037, FULL, 10, seed=1)


def test_negation_keeps_counts():
    spec = real_one_var([[0], [1], [3], [4]])
    coeffs = sample_coeffs(spec, rng_for(5, 0), 200)[0]
    region = Region(((-2, 2),))
    for c in coeffs:
        f = PolySample((c,), spec)
        assert count_positive_roots(f, region) == count_positive_roots(f.negated(), region)


def test_counts_are_additive_over_split_boxes():
    spec = real_one_var([[0], [3], [7]])
    whole = expected_real_mc(spec, [(-1, 1)], 3000, seed=8)
    left = expected_real_mc(spec, [(-1, 0.25)], 3000, seed=8)
    right = expected_real_mc(spec, [(0.25, 1)], 3000, seed=8)
    # same seed: the same samples, so the split is exact
    assert left.mean + right.mean == pytest.approx(whole.mean, abs=1e-12)
    other = expected_real_mc(spec, [(-1, 0.25)], 3000, seed=9)
    assert abs(other.mean + right.mean - whole.mean) < 3 * math.hypot(other.stderr, right.stderr,
                                                                       whole.stderr)


# ------------------------------------------------------------ bound

def test_segment_bound_closed_form():
    # complex roots with p in [-1, 1] number tanh 1 on average
    want = (2 * math.pi) ** -1 * math.sqrt(2.0) * math.sqrt(math.pi * math.tanh(1.0))
    got = theorem4_bound(real_one_var([[0], [1]]), [(-1, 1)], tol=1e-10)
    assert got == pytest.approx(want, rel=1e-8)


def test_bound_needs_bounded_box():
    with pytest.raises(ValueError, match="infinite"):
        theorem4_bound(real_one_var([[0], [1]]), FULL)


def test_bound_shrinks_with_box():
    spec = real_one_var([[0], [2], [5]])
    vals = [theorem4_bound(spec, [(-h, h)]) for h in (1.0, 0.1, 0.01, 0.001)]
    assert vals == sorted(vals, reverse=True)
    # sqrt(lambda) times the square root of a root count that is itself ~ lambda
    assert vals[2] / vals[3] == pytest.approx(10.0, rel=1e-3)


@pytest.mark.parametrize("rows,box", [
    ([[0], [1]], (-1, 1)),
    ([[0], [3], [7]], (-0.5, 0.5)),
    ([[0], [3], [7]], (-2, 2)),
    ([[0], [1], [2], [3], [4]], (-1, 1)),
])
def test_bound_exceeds_mc_mean(rows, box):
    spec = real_one_var(rows)
    est = expected_real_mc(spec, [box], 3000, seed=4)
    assert theorem4_bound(spec, [box]) >= est.mean + 3 * est.stderr


# ------------------------------------------------------------ density cross-check

@pytest.mark.parametrize("d", [1, 2, 4, 9])
def test_density_integral_kostlan_is_half_sqrt_degree(d):
    val = real_root_density_integral(kostlan_system(1, [d], "real"), FULL)
    assert val == pytest.approx(math.sqrt(d) / 2, rel=1e-7)


@pytest.mark.parametrize("n", [1, 2])
def test_density_integral_linear_is_one_orthant(n):
    val = real_root_density_integral(linear_system(n, "real"), [(-math.inf, math.inf)] * n, tol=1e-6)
    assert val == pytest.approx(2.0 ** -n, rel=1e-5)


def test_density_integral_agrees_with_mc_on_box():
    spec = real_one_var([[0], [3], [7]], [1.0, 0.5, 2.0])
    box = [(-0.7, 0.9)]
    est = expected_real_mc(spec, box, 8000, seed=6)
    assert abs(real_root_density_integral(spec, box) - est.mean) < 3 * est.stderr


def test_density_integral_needs_unmixed():
    spec = SystemSpec((support([[0, 0], [1, 0], [0, 1]]), support([[0, 0], [2, 0], [0, 1]])),
                      field="real")
    with pytest.raises(SupportError):
        real_root_density_integral(spec, [(-1, 1), (-1, 1)])


# ------------------------------------------------------------ tail bound

def test_real_tail_large_eps_holds():
    spec = real_one_var([[0], [1], [3]])
    checks = real_condition_tail(spec, [(-1, 1)], [50.0], 400, seed=3)
    assert checks[0].holds
    assert checks[0].lhs.empirical <= checks[0].e_of_u.mean + 1e-12


def test_real_tail_report_fields():
    spec = real_one_var([[0], [1], [3]])
    rep = real_experiment(spec, [(-1, 1)], 300, seed=2, eps_list=[2.0])
    obj = rep.to_json()
    assert set(obj) == {"region", "mc_mean", "mc_stderr", "theorem4_bound", "e_of_u", "tails"}
    assert obj["mc_mean"] <= obj["theorem4_bound"]
    assert set(obj["tails"][0]) >= {"eps", "empirical", "wilson_lo", "e_of_u", "nu_r", "bound",
                                    "holds"}


def test_real_tail_needs_unmixed():
    spec = SystemSpec((support([[0, 0], [1, 0], [0, 1]]), support([[0, 0], [2, 0], [0, 1]])),
                      field="real")
    with pytest.raises(SupportError):
        real_condition_tail(spec, [(-1, 1), (-1, 1)], [0.5], 10, seed=1)
