import mpmath
import numpy as np
import pytest

from conftest import off_axis_points, polys, proportional
from greenrec.errors import DegenerateRecurrenceError, ParseError
from greenrec.evaluator import derive
from greenrec.kernels import builtin_pde, get_kernel, oracle_derivatives
from greenrec.pde2ode import ode_from_strings, pde_to_ode
from greenrec.recurrence import (
    Recurrence,
    dump_ode,
    dump_recurrence,
    load_ode,
    load_recurrence,
    ode_to_large_recurrence,
    recurrence_order,
    recurrence_residual,
    specialize_small_recurrence,
)
from greenrec.symcore import Poly, parse_poly, standard_vars

ALL_IDS = ["laplace2d", "laplace3d", "helmholtz2d", "helmholtz3d",
           "yukawa2d", "yukawa3d", "biharmonic2d", "biharmonic3d"]
KS = {"helmholtz2d": 1.5, "helmholtz3d": 2.0, "yukawa2d": 0.7, "yukawa3d": 1.1}


def kernel_of(kid):
    return get_kernel(kid, KS.get(kid))


def as_list(rec, shifts):
    zero = Poly.zero(rec.variables)
    return [rec.coefficients.get(s, zero) for s in shifts]


@pytest.fixture(scope="module")
def laplace():
    return derive(builtin_pde("laplace2d"))


def test_laplace2d_large_recurrence(laplace):
    expected = polys(2, ["x1^3 + x1*x2^2", "(3*n + 1)*x1^2 + (n - 1)*x2^2", "(3*n^2 - n)*x1", "n*(n - 1)^2"])
    assert (laplace.large.max_shift, laplace.large.min_shift) == (2, -1)
    assert proportional(as_list(laplace.large, [2, 1, 0, -1]), expected)


@pytest.mark.parametrize("n,expected", [
    (1, ["x1^3 + x1*x2^2", "4*x1^2", "2*x1", "0"]),
    (2, ["x1^3 + x1*x2^2", "7*x1^2 + x2^2", "10*x1", "2"]),
])
def test_laplace2d_recurrence_at_fixed_order(laplace, n, expected):
    got = [c.subs("n", n) for c in as_list(laplace.large, [2, 1, 0, -1])]
    assert proportional(got, polys(2, expected))


def test_laplace2d_order_and_bound(laplace):
    assert recurrence_order(laplace.large) == 3
    assert laplace.ode.order == 2 and laplace.large.highest_x1_power == 3


def test_laplace2d_small_recurrence_form(laplace):
    # D[n] = -(n-2)(n-1) D[n-2] / x2^2; the overall factor (n-2) is not stripped
    small = laplace.small
    assert small.kind == "small"
    expected = polys(2, ["x2^2", "0", "(n - 2)*(n - 1)"])
    assert proportional(as_list(small, [0, -1, -2]), expected)
    assert "x1" not in {v for c in small.coefficients.values() for v in c.used_vars()}


def test_small_recurrence_sign_agrees_with_oracle():
    kernel = get_kernel("laplace2d")
    vals = oracle_derivatives(kernel, (0.0, 1.3), 6).values
    with mpmath.workdps(50):
        check_axis_values(vals, mpmath.mpf(1.3))


def check_axis_values(vals, x2):
    assert mpmath.almosteq(vals[2], -1 / (2 * mpmath.pi * x2 ** 2), 1e-40)
    for n in (4, 6):
        assert mpmath.almosteq(vals[n], -(n - 2) * (n - 1) * vals[n - 2] / x2 ** 2, 1e-40)
        # the form without the minus sign contradicts the oracle
        assert not mpmath.almosteq(vals[n], (n - 2) * (n - 1) * vals[n - 2] / x2 ** 2, 1e-3)
    assert mpmath.almosteq(vals[4], 3 / (mpmath.pi * x2 ** 4), 1e-40)


def test_small_recurrence_couples_equal_parity(laplace):
    assert all(s % 2 == 0 for s in laplace.small.coefficients)


@pytest.mark.parametrize("kid", ALL_IDS)
def test_order_bound_for_builtin_kernels(kid):
    d = derive(builtin_pde(kid))
    assert recurrence_order(d.large) <= d.ode.order + d.large.highest_x1_power
    assert recurrence_order(d.small) <= recurrence_order(d.large)


def test_constant_coefficient_ode_keeps_order():
    ode = ode_from_strings(2, ["x2^2", "3", "x2 + 1"])
    rec = ode_to_large_recurrence(ode)
    assert rec.highest_x1_power == 0
    assert recurrence_order(rec) == ode.order


@pytest.mark.parametrize("kid", ALL_IDS)
def test_large_residual_on_oracle(kid, rng):
    kernel = kernel_of(kid)
    rec = derive(kernel.pde).large
    for pt in off_axis_points(rng, 3, kernel.dimension, lo=0.3, min_ratio=1.0):
        assert recurrence_residual(rec, kernel, pt, 12, n_min=3) <= 1e-8


@pytest.mark.parametrize("kid", ALL_IDS)
def test_small_residual_on_oracle(kid, rng):
    kernel = kernel_of(kid)
    small = derive(kernel.pde).small
    for pt in off_axis_points(rng, 2, kernel.dimension, lo=0.3):
        # even entries up to 14; odd entries are zero on the hyperplane
        assert recurrence_residual(small, kernel, pt, 14 - small.max_shift, n_min=small.meta.get("reindex", 0)) <= 1e-8


def test_helmholtz_residual_at_order_five(rng):
    kernel = get_kernel("helmholtz2d", 1.0)
    rec = derive(kernel.pde).large
    for pt in off_axis_points(rng, 10, lo=0.3, min_ratio=1.0):
        assert recurrence_residual(rec, kernel, pt, 5, n_min=5) <= 1e-8


def test_tampered_recurrence_has_large_residual(laplace, rng):
    coeffs = dict(laplace.large.coefficients)
    coeffs[0] = coeffs[0] + Poly.var("x1", laplace.large.variables)
    bad = Recurrence(2, coeffs, 2, 3)
    pt = off_axis_points(rng, 1, min_ratio=1.0)[0]
    assert recurrence_residual(bad, get_kernel("laplace2d"), pt, 8, n_min=3) > 1e-3


@pytest.mark.parametrize("kid", ["laplace2d", "biharmonic3d", "helmholtz2d"])
def test_artifact_round_trip(kid):
    d = derive(builtin_pde(kid))
    for rec in (d.large, d.small):
        text = dump_recurrence(rec)
        back = load_recurrence(text)
        assert back == rec and back.meta == rec.meta
        assert dump_recurrence(back) == text
    text = dump_ode(d.ode)
    assert dump_ode(load_ode(text)) == text


def test_load_rejects_foreign_document():
    with pytest.raises(ParseError):
        load_recurrence('{"format": "other"}')


def test_degenerate_small_recurrence():
    v = standard_vars(2, extra=("n", "k"))
    rec = Recurrence(2, {1: parse_poly("x1*x2", v), 0: parse_poly("x1^2*n", v)}, 2, 2)
    with pytest.raises(DegenerateRecurrenceError):
        specialize_small_recurrence(rec)


def test_large_residual_matches_for_negative_x1(laplace, rng):
    kernel = get_kernel("laplace2d")
    for a, b in off_axis_points(rng, 3, min_ratio=1.0):
        assert recurrence_residual(laplace.large, kernel, (-abs(a), b), 10) <= 1e-8
