import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from circwell import quad, wells
from circwell.quad import TailPolicy, entropy_integrand, integrate_finite, integrate_semi_infinite
from circwell.specfun import DomainError, bessel_j, bessel_zero, carrier_averages


def test_linear_polynomial():
    res = integrate_finite(lambda r: 2 * r, 0.0, 1.0, tol=1e-12)
    assert res.converged
    assert abs(res.value - 1.0) <= 1e-12


def test_log_endpoint():
    res = integrate_finite(lambda r: r * np.log(r), 0.0, 1.0, tol=1e-12)
    assert res.converged
    assert res.value == pytest.approx(-0.25, abs=1e-12)


def test_dirichlet_ground_state_normalisation_in_position():
    s = wells.D(0, 1)
    res = integrate_finite(lambda r: 2 * math.pi * r * wells.rho(s, r), 0.0, 1.0, tol=1e-13)
    assert abs(res.value - 1.0) < 1e-12


def test_exponential_tail():
    policy = TailPolicy(breakpoint_source="uniform", max_cutoff=60.0, tail_mode="truncate-with-bound",
                        spacing=1.0)
    res = integrate_semi_infinite(lambda k: np.exp(-k), 0.0, policy, tol=1e-10)
    assert abs(res.value - 1.0) <= 1e-10


def test_dirichlet_ground_state_normalisation_in_momentum():
    s = wells.D(0, 1)

    def f(k):
        return 2 * math.pi * k * wells.gamma(s, k)

    def avg(k):
        mean_sq, _ = wells.momentum_tail_moments(s, k)
        return 2 * math.pi * k * mean_sq

    res = integrate_semi_infinite(f, 0.0, wells.momentum_policy(s, avg), tol=1e-10)
    assert abs(res.value - 1.0) <= 1e-8
    assert res.converged


def test_off_diagonal_momentum_orthogonality_integral():
    j1, j2 = bessel_zero(0, 1), bessel_zero(0, 2)

    def f(k):
        return k * bessel_j(0, k) ** 2 / ((j1**2 - k**2) * (j2**2 - k**2))

    def avg(k):
        b2, _, _ = carrier_averages(0, k, False)
        return k * b2 / ((j1**2 - k**2) * (j2**2 - k**2))

    policy = TailPolicy(max_cutoff=400.0, order=0, singular_points=(j1, j2), averaged=avg)
    res = integrate_semi_infinite(f, 0.0, policy, tol=1e-11)
    assert abs(res.value) <= 1e-8


def test_entropy_integrand_examples():
    assert entropy_integrand(0.0) == 0.0
    assert entropy_integrand(1.0) == 0.0
    assert entropy_integrand(math.exp(-1)) == pytest.approx(math.exp(-1), rel=1e-15)
    out = entropy_integrand(np.array([0.0, 0.5, 2.0]))
    np.testing.assert_allclose(out, [0.0, 0.5 * math.log(2), -2 * math.log(2)])
    with pytest.raises(DomainError):
        entropy_integrand(-1e-3)


def test_finite_rejects_empty_interval():
    with pytest.raises(DomainError):
        integrate_finite(lambda x: x, 1.0, 1.0)


def test_breakpoints_are_respected():
    # kink at 0.3 and a log singularity at 0.7, both given as points
    f = lambda x: np.abs(x - 0.3) + np.log(np.abs(x - 0.7))
    res = integrate_finite(f, 0.0, 1.0, tol=1e-12, points=[0.3, 0.7])
    exact = (0.3**2 + 0.7**2) / 2 + (0.7 * math.log(0.7) - 0.7) + (0.3 * math.log(0.3) - 0.3)
    assert res.value == pytest.approx(exact, abs=1e-11)


def test_non_finite_integrand_raises():
    # the centre node of the single panel lands exactly on the pole
    with np.errstate(divide="ignore"), pytest.raises(FloatingPointError):
        integrate_finite(lambda x: 1.0 / (x - 0.5), 0.0, 1.0, points=[])


# -- error-estimate honesty ---------------------------------------------------

_CALIBRATION = [
    (lambda x: x**5 - 3 * x**2 + 1, 0.0, 2.0, 64 / 6 - 8 + 2),
    (lambda x: np.exp(3 * x), 0.0, 1.0, (math.e**3 - 1) / 3),
    (lambda x: x * np.log(x), 0.0, 1.0, -0.25),
    (lambda x: np.sqrt(x), 0.0, 1.0, 2 / 3),
    (lambda x: np.log(x), 0.0, 1.0, -1.0),
    (lambda x: 1 / np.sqrt(x), 0.0, 1.0, 2.0),
    (lambda x: np.cos(40 * x), 0.0, 1.0, math.sin(40) / 40),
    (lambda x: 1 / (1 + 25 * x * x), -1.0, 1.0, 2 * math.atan(5) / 5),
    (lambda x: np.exp(-x * x), -5.0, 5.0, math.sqrt(math.pi) * math.erf(5)),
    (lambda x: x**0.3 * np.log(x) ** 2, 0.0, 1.0, 2 / 1.3**3),
]


def test_error_estimates_are_honest():
    cases = ok = 0
    for f, a, b, exact in _CALIBRATION:
        for tol in (1e-3, 1e-5, 1e-7, 1e-9, 1e-11):
            res = integrate_finite(f, a, b, tol=tol)
            cases += 1
            err = abs(res.value - exact)
            if err <= 3 * res.abs_error_estimate or err < 1e-14 * max(1, abs(exact)):
                ok += 1
            assert not res.converged or res.abs_error_estimate <= tol
    assert ok / cases >= 0.99


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=12), st.floats(-3, 0), st.floats(0.1, 3))
def test_polynomials_exact(coeffs, a, width):
    b = a + width
    poly = np.polynomial.Polynomial(coeffs)
    exact = poly.integ()(b) - poly.integ()(a)
    res = integrate_finite(poly, a, b, tol=1e-12)
    assert abs(res.value - exact) <= 1e-11 * max(1.0, sum(abs(c) for c in coeffs) * 3**len(coeffs))


def test_repeatable():
    f = lambda x: np.sin(x) ** 2 * np.exp(-x)
    r1 = integrate_finite(f, 0, 10, tol=1e-12)
    r2 = integrate_finite(f, 0, 10, tol=1e-12)
    assert r1 == r2


# -- oscillatory tails ------------------------------------------------------


def _j0_lorentz(k):
    return k * bessel_j(0, k) ** 2 / (1 + k * k)


def test_accelerated_tail_against_brute_force():
    # partial sums per period fall like 1/k^2
    policy = TailPolicy(max_cutoff=400.0, tail_mode="accelerated-partial-sums", order=0)
    acc = integrate_semi_infinite(_j0_lorentz, 0.0, policy, tol=1e-10)
    edges = np.arange(0.0, 1e6 + 1, 4.0)
    brute, _ = quad.integrate_panels(_j0_lorentz, edges, tol=1e-11)
    assert acc.value == pytest.approx(brute.value, rel=1e-6)
    # analytic value I_0(1) K_0(1)
    assert acc.value == pytest.approx(special.i0(1) * special.k0(1), rel=1e-6)


def test_asymptotic_average_tail_against_closed_form():
    def avg(k):
        b2, _, _ = carrier_averages(0, k, False)
        return k * b2 / (1 + k * k)

    policy = TailPolicy(max_cutoff=400.0, order=0, averaged=avg)
    res = integrate_semi_infinite(_j0_lorentz, 0.0, policy, tol=1e-10)
    assert res.value == pytest.approx(special.i0(1) * special.k0(1), abs=1e-10)
    assert abs(res.value - special.i0(1) * special.k0(1)) <= 3 * res.abs_error_estimate + 1e-15


def test_divergent_tail_is_flagged():
    policy = TailPolicy(max_cutoff=300.0, tail_mode="truncate-with-bound", order=1)
    res = integrate_semi_infinite(lambda k: k * bessel_j(1, k) ** 2, 0.0, policy)
    assert res.divergent and not res.converged


def test_tail_policy_validation():
    with pytest.raises(DomainError):
        TailPolicy(tail_mode="nope", averaged=lambda k: k)
    with pytest.raises(DomainError):
        TailPolicy(max_cutoff=5.0, singular_points=(6.0,), averaged=lambda k: k)
    with pytest.raises(DomainError):
        TailPolicy(tail_mode="asymptotic-average", averaged=None)
    with pytest.raises(DomainError):
        TailPolicy(breakpoint_source="chebyshev", averaged=lambda k: k)
