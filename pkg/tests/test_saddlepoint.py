import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbfbl.errors import DomainError
from orbfbl.saddlepoint import (
    D_MIN,
    cgf,
    cgf_d1,
    cgf_d2,
    finite_n_cgf,
    prefactor,
    rate_derivatives,
    rate_function,
    solve_saddlepoint,
    trapezoid_correction,
)


def _trapezoid_cgf(theta, panels=1_000_000):
    x = np.linspace(0.0, 1.0, panels + 1)
    f = np.logaddexp(0.0, theta * x) - math.log(2.0)
    return float(np.trapezoid(f, x))


def test_cgf_at_origin():
    assert cgf(0.0) == 0.0
    assert abs(cgf_d1(0.0) - 0.25) <= 1e-12
    assert abs(cgf_d2(0.0) - 1.0 / 12.0) <= 1e-12


@pytest.mark.parametrize("theta", [-10.0, -3.0, 2.5])
def test_cgf_matches_fine_trapezoid(theta):
    # trapezoid error ~ theta^2/(12 N^2) * max|f''| is far below 1e-10 here
    assert abs(cgf(theta) - _trapezoid_cgf(theta)) <= 1e-10


@pytest.mark.parametrize("theta", [-40.0, -5.0, -0.3, 0.7, 12.0])
def test_cgf_derivatives_by_finite_difference(theta):
    h = 1e-4
    d1 = (cgf(theta + h) - cgf(theta - h)) / (2 * h)
    d2 = (cgf_d1(theta + h) - cgf_d1(theta - h)) / (2 * h)
    assert d1 == pytest.approx(cgf_d1(theta), rel=1e-7, abs=1e-12)
    assert d2 == pytest.approx(cgf_d2(theta), rel=1e-6, abs=1e-12)


@pytest.mark.parametrize("sign", [-1.0, 1.0])
def test_cgf_continuous_across_asymptotic_switch(sign):
    # the asymptotic branch must join the quadrature branch smoothly
    a, b = sign * 699.999, sign * 700.001
    step = cgf(b) - cgf(a)
    assert abs(step - cgf_d1(sign * 700.0) * (b - a)) < 1e-9
    assert cgf_d1(b) == pytest.approx(cgf_d1(a), abs=1e-9)


def test_cgf_convex_on_grid():
    grid = np.linspace(-50.0, 5.0, 100)
    assert all(cgf_d2(t) > 0 for t in grid)


def test_finite_n_cgf_basics():
    assert finite_n_cgf(0.0, 17) == 0.0
    for theta in (-3.0, 0.4):
        assert finite_n_cgf(theta, 1) == pytest.approx(math.log((1 + math.exp(theta)) / 2), rel=1e-14)


@pytest.mark.parametrize("theta", [-8.0, -4.0, -1.0])
@pytest.mark.parametrize("n", [50, 200, 1000])
def test_trapezoid_identity(theta, n):
    lhs = abs(finite_n_cgf(theta, n) - cgf(theta) - trapezoid_correction(theta) / n)
    assert lhs <= theta**2 / (48 * n**2)


def test_saddlepoint_near_quarter():
    sol = solve_saddlepoint(0.25 - 1e-12)
    assert -1e-8 < sol.theta_d < 0.0


def test_saddlepoint_grid_scan_oracle():
    # K' is increasing: locate the sign change on a 1e-6 grid around the root
    grid = np.arange(-6.0, -1.0, 1e-6)
    lo = np.searchsorted([cgf_d1(t) for t in grid[::1000]], 0.1)
    window = grid[(lo - 1) * 1000 : (lo + 1) * 1000]
    vals = np.array([cgf_d1(t) for t in window])
    oracle = window[np.argmin(np.abs(vals - 0.1))]
    assert abs(solve_saddlepoint(0.1).theta_d - oracle) <= 1e-5


@pytest.mark.parametrize("d", [0.05, 0.1, 0.2])
def test_rate_equals_grid_supremum(d):
    theta_star = solve_saddlepoint(d).theta_d
    grid = theta_star + np.linspace(-0.05, 0.05, 2001)
    sup = max(t * d - cgf(t) for t in grid)
    assert abs(rate_function(d) - sup) <= 1e-8


def test_rate_derivatives_finite_difference():
    sol = solve_saddlepoint(0.1)
    iprime, ipp = rate_derivatives(sol)
    h = 1e-5
    fd1 = (rate_function(0.1 + h) - rate_function(0.1 - h)) / (2 * h)
    fd2 = (rate_function(0.1 + h) - 2 * rate_function(0.1) + rate_function(0.1 - h)) / h**2
    assert abs(fd1 - iprime) <= 1e-6
    assert abs(fd2 - ipp) <= 1e-4


def test_iprime_vanishes_at_quarter():
    iprime, _ = rate_derivatives(solve_saddlepoint(0.25 - 1e-10))
    assert abs(iprime) < 1e-6


def test_solution_bundle_invariants():
    sol = solve_saddlepoint(0.13)
    assert abs(cgf_d1(sol.theta_d) - 0.13) <= 1e-12
    assert sol.kpp == pytest.approx(cgf_d2(sol.theta_d))
    expected = math.sqrt((1 + math.exp(sol.theta_d)) / (4 * math.pi * sol.kpp * sol.theta_d**2))
    assert sol.prefactor == pytest.approx(expected, rel=1e-14)
    assert sol.rate == pytest.approx(sol.theta_d * 0.13 - sol.k, rel=1e-14)


def test_rate_convex_nonnegative():
    d = np.linspace(0.002, 0.2499, 200)
    rates = np.array([rate_function(x) for x in d])
    assert (rates >= 0).all()
    assert (np.diff(rates, 2) >= -1e-9).all()
    assert rate_function(0.25 - 1e-12) <= 1e-8


def test_theta_increasing_in_d():
    thetas = [solve_saddlepoint(x).theta_d for x in np.linspace(0.001, 0.249, 60)]
    assert np.all(np.diff(thetas) > 0)


def test_prefactor_diverges_near_quarter():
    assert solve_saddlepoint(0.2499).prefactor > 100 * solve_saddlepoint(0.2).prefactor
    assert prefactor(0.0, 1 / 12) == math.inf


@pytest.mark.parametrize("d", [0.0, -0.1, D_MIN / 2, 0.25, 0.3])
def test_domain_guard(d):
    with pytest.raises(DomainError):
        solve_saddlepoint(d)


def test_small_d_below_guard_allowed_when_requested():
    sol = solve_saddlepoint(1e-6, d_min=0.0)
    assert abs(cgf_d1(sol.theta_d) - 1e-6) <= 1e-12
    assert sol.rate == pytest.approx(sol.theta_d * 1e-6 - sol.k)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=1e-3, max_value=0.2499))
def test_saddlepoint_root_property(d):
    sol = solve_saddlepoint(d)
    assert sol.theta_d < 0
    assert abs(cgf_d1(sol.theta_d) - d) <= 1e-12
    assert sol.rate >= 0 and sol.prefactor > 0


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=-60.0, max_value=60.0), st.floats(min_value=-60.0, max_value=60.0),
       st.floats(min_value=0.0, max_value=1.0))
def test_cgf_convexity_property(a, b, w):
    mid = w * a + (1 - w) * b
    assert cgf(mid) <= w * cgf(a) + (1 - w) * cgf(b) + 1e-12
