import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from circwell import measures as M
from circwell import wells
from circwell.measures import BBM_BOUND, DivergenceError, InvariantError, MeasureRecord
from circwell.specfun import DomainError
from circwell.wells import D, N, StateSpec, UnitSystem

LN_PI = math.log(math.pi)


# -- Shannon ------------------------------------------------------------------


def test_shannon_position_examples():
    assert M.shannon_position(N(0, 1)) == pytest.approx(LN_PI, abs=1e-12)
    assert M.shannon_position(D(0, 1)) == pytest.approx(0.5942, abs=1.5e-3)
    assert M.shannon_position(N(20, 1)) == pytest.approx(-0.0203, abs=1.5e-3)


def test_shannon_momentum_examples():
    assert M.shannon_momentum(D(0, 1)) == pytest.approx(3.8232, abs=1.5e-3)
    assert M.shannon_momentum(N(0, 1)) == pytest.approx(4.2880, abs=1.5e-3)
    assert M.shannon_momentum(D(30, 1)) == pytest.approx(7.7131, abs=3e-3)


def test_shannon_position_against_scipy():
    s = D(3, 2)
    nodes = wells.position_nodes(s)

    def f(r):
        p = wells.rho(s, r)
        return -2 * math.pi * r * p * math.log(p) if p > 0 else 0.0

    ref, _ = integrate.quad(f, 0, 1, points=nodes, epsabs=1e-13, limit=400)
    assert M.shannon_position(s) == pytest.approx(ref, abs=1e-9)


def test_shannon_momentum_is_stable_under_cutoff():
    s = N(4, 2)
    base = M.shannon_momentum(s)
    for kmax in (800.0, 2500.0):
        assert M.shannon_momentum(s, kmax=kmax) == pytest.approx(base, abs=1e-7)


# -- Fisher -------------------------------------------------------------------


def test_fisher_position_examples():
    assert M.fisher_position(N(0, 1)) == 0.0
    j = special.jn_zeros(0, 1)[0]
    assert M.fisher_position(D(0, 1)) == pytest.approx(4 * j * j, rel=1e-14)
    assert M.fisher_position(D(0, 1)) == pytest.approx(23.13, rel=5e-3)
    assert M.fisher_position(D(1, 1)) == pytest.approx(38.07, rel=5e-3)


def test_fisher_closed_form_matches_quadrature():
    for m in range(0, 11):
        for n in range(1, 5):
            s = D(m, n)
            exact = M.fisher_position(s)
            num = M.fisher_position_numeric(s)
            assert abs(exact - num) <= 1e-8 * exact


def test_fisher_position_density_form():
    # (rho')^2/rho evaluated directly away from nodes agrees with 4 psi'^2
    s = N(2, 3)
    r = np.array([0.11, 0.42, 0.77])
    rho = wells.rho(s, r)
    drho = 2 * wells.psi_radial(s, r) * wells.psi_radial_prime(s, r)
    np.testing.assert_allclose(drho**2 / rho, 4 * wells.psi_radial_prime(s, r) ** 2, rtol=1e-12)


def test_fisher_momentum_examples():
    assert M.fisher_momentum(N(0, 1)) == pytest.approx(2.0, abs=1e-6)
    assert M.fisher_momentum(N(0, 2)) == pytest.approx(4 / 3, abs=1e-6)
    assert M.fisher_momentum(D(0, 1)) == pytest.approx(0.8722, rel=5e-3)


# -- Onicescu and complexity -------------------------------------------------


def test_onicescu_examples():
    assert M.onicescu_position(N(0, 1)) == pytest.approx(1 / math.pi, abs=1e-12)
    assert M.onicescu_position(D(0, 1)) == pytest.approx(0.6679, abs=1e-3)
    assert M.onicescu_momentum(D(0, 1)) == pytest.approx(0.02909, abs=1e-4)


def test_onicescu_momentum_against_brute_force():
    s = D(1, 2)
    f = lambda k: 2 * math.pi * k * wells.gamma(s, k) ** 2
    edges = np.arange(0, 301, 1.0)
    # tail beyond 300 is below 1e-12 for gamma^2 ~ k^-6
    ref = math.fsum(integrate.quad(f, a, b, epsabs=1e-16)[0] for a, b in zip(edges[:-1], edges[1:]))
    assert M.onicescu_momentum(s) == pytest.approx(ref, abs=1e-11)


def test_cgl_examples():
    assert M.cgl_complexity(LN_PI, 1 / math.pi) == pytest.approx(1.0, rel=1e-15)
    assert M.cgl_complexity(0.0, 1.0) == 1.0
    cgl = M.cgl_complexity(M.shannon_position(D(0, 1)), M.onicescu_position(D(0, 1)))
    assert cgl == pytest.approx(math.exp(0.5942) * 0.6679, rel=2e-3)
    assert cgl > 1
    with pytest.raises(DomainError):
        M.cgl_complexity(1.0, 0.0)


# -- records ------------------------------------------------------------------


def test_record_for_dirichlet_ground_state():
    rec = M.measure_record(D(0, 1))
    assert rec.S_rho == pytest.approx(0.5942, abs=1.5e-3)
    assert rec.S_gamma == pytest.approx(3.8232, abs=1.5e-3)
    assert rec.S_t == pytest.approx(4.4174, abs=1.5e-3)
    assert rec.I_rho == pytest.approx(23.13, rel=5e-3)
    assert rec.I_gamma == pytest.approx(0.8722, rel=5e-3)
    assert rec.O_rho == pytest.approx(0.6679, rel=5e-3)
    assert rec.O_gamma == pytest.approx(0.02909, rel=5e-3)
    assert rec.E == pytest.approx(wells.energy(D(0, 1)))
    assert rec.bbm_margin == pytest.approx(4.4174 - 4.28946, abs=1e-3)


def test_record_for_neumann_ground_state():
    rec = M.measure_record(N(0, 1))
    assert rec.S_rho == pytest.approx(LN_PI, abs=1e-8)
    assert rec.I_rho == 0.0
    assert rec.O_rho == pytest.approx(1 / math.pi, abs=1e-8)
    assert rec.I_gamma == pytest.approx(2.0, abs=1e-6)
    assert rec.CGL_rho == pytest.approx(1.0, abs=1e-8)
    assert rec.E == 0.0


def test_record_total_entropy_high_state():
    assert M.measure_record(D(0, 4)).S_t == pytest.approx(6.6429, abs=3e-3)


def test_record_invariant_enforced():
    rec = M.measure_record(D(0, 1))
    from dataclasses import replace
    with pytest.raises(InvariantError):
        replace(rec, S_gamma=1.0, S_t=rec.S_rho + 1.0).check()
    with pytest.raises(InvariantError):
        replace(rec, S_t=rec.S_t + 0.1).check()
    with pytest.raises(InvariantError):
        replace(rec, CGL_rho=0.5).check()


def test_bbm_bound_value():
    assert BBM_BOUND == pytest.approx(4.28946, abs=1e-5)


def test_to_dimensional():
    rec = M.measure_record(D(1, 1))
    d = 2.5
    dim = M.to_dimensional(rec, UnitSystem(d))
    assert dim.S_rho == pytest.approx(rec.S_rho + 2 * math.log(d))
    assert dim.S_gamma == pytest.approx(rec.S_gamma - 2 * math.log(d))
    assert dim.S_t == pytest.approx(rec.S_t)
    assert dim.I_rho == pytest.approx(rec.I_rho / d**2)
    assert dim.I_gamma == pytest.approx(rec.I_gamma * d**2)
    assert dim.O_rho * dim.O_gamma == pytest.approx(rec.O_rho * rec.O_gamma)
    assert M.to_dimensional(rec, 1.0) == rec
    with pytest.raises(DomainError):
        M.to_dimensional(rec, -1.0)


def test_grid_keeps_order_and_matches_serial():
    states = [D(2, 1), N(0, 1), D(0, 3), N(5, 2)]
    par = M.measure_grid(states, threads=4)
    ser = M.measure_grid(states, threads=1)
    assert [r.state for r in par] == states
    assert par == ser


def test_grid_thread_count_from_environment(monkeypatch):
    monkeypatch.setenv("CIRCWELL_THREADS", "3")
    assert M._thread_count() == 3
    monkeypatch.setenv("CIRCWELL_THREADS", "bogus")
    assert M._thread_count() >= 1


@settings(max_examples=12, deadline=None)
@given(st.sampled_from(["dirichlet", "neumann"]), st.integers(0, 12), st.integers(1, 4))
def test_record_invariants_property(bc, m, n):
    rec = M.measure_record(StateSpec(bc, m, n))
    assert rec.S_t > BBM_BOUND
    assert rec.CGL_rho >= 1 - 1e-9 and rec.CGL_gamma >= 1 - 1e-9
    assert rec.I_gamma > 0 and rec.O_rho > 0 and rec.O_gamma > 0


# -- moments and uncertainty -------------------------------------------------


def test_position_moments_of_constant_state():
    s = N(0, 1)
    assert M.position_moments(s, 1) == pytest.approx(2 / 3, abs=1e-13)
    assert M.position_moments(s, 2) == pytest.approx(1 / 2, abs=1e-13)
    diag = M.uncertainty_diagnostics(s, cutoffs=(100.0, 1000.0))
    assert diag.delta_r == pytest.approx(math.sqrt(1 / 18), abs=1e-12)
    assert diag.delta_r == pytest.approx(0.23570, abs=1e-5)
    with pytest.raises(DomainError):
        M.position_moments(s, 0)


def _gradient_oracle(state):
    """<k^2> = int |grad psi|^2 by scipy quadrature in position space."""
    m = state.m

    def f(r):
        p = wells.psi_radial(state, r)
        dp = wells.psi_radial_prime(state, r)
        return 2 * math.pi * r * (dp * dp + (m * p / r) ** 2 if r > 0 else dp * dp)

    val, _ = integrate.quad(f, 0, 1, epsabs=1e-13, epsrel=1e-13, limit=400)
    return val


def test_dirichlet_k2_equals_j_squared():
    for m in range(0, 6):
        for n in range(1, 4):
            s = D(m, n)
            j2 = wells.characteristic_zero(s) ** 2
            info = M.momentum_second_moment(s, (50.0, 200.0))
            assert info["k2_converged"] == pytest.approx(j2, rel=1e-5)
            assert not info["k2_divergent"]
            if m <= 1 and n <= 2:
                assert _gradient_oracle(s) == pytest.approx(j2, rel=1e-9)


def test_dirichlet_k2_partials_nondecreasing():
    info = M.momentum_second_moment(D(0, 1), (5.0, 10.0, 50.0, 200.0, 1000.0))
    vals = [v for _, v in info["k2_truncated"]]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < wells.characteristic_zero(D(0, 1)) ** 2


def test_neumann_ground_k2_grows_linearly():
    info = M.momentum_second_moment(N(0, 1), (1e3, 1e4))
    assert info["k2_divergent"] and info["k2_converged"] is None
    lam, part = info["k2_truncated"][-1]
    # exact partial: 2 int_0^L k J_1^2 dk = L^2 (J_1^2 - J_0 J_2)
    exact = lam**2 * (special.j1(lam) ** 2 - special.j0(lam) * special.jv(2, lam))
    assert part == pytest.approx(exact, rel=1e-9)
    assert part / lam == pytest.approx(2 / math.pi, rel=0.05)
    assert info["k2_growth_rate"] == pytest.approx(2 / math.pi, rel=0.01)


def test_momentum_second_moment_rejects_bad_cutoffs():
    with pytest.raises(DomainError):
        M.momentum_second_moment(D(0, 1), (10.0, 5.0))


def test_radial_momentum_neumann_ground():
    kr = M.radial_momentum_matrix_element(N(0, 1), 1)
    assert abs(kr - (-1j)) < 1e-10
    eps = (1e-3, 1e-5, 1e-7)
    vals = [M.radial_momentum_matrix_element(N(0, 1), 2, e).real for e in eps]
    for e, v in zip(eps, vals):
        assert v == pytest.approx(0.5 * math.log(1 / e), rel=1e-9)
    slope = np.polyfit(np.log(1 / np.array(eps)), vals, 1)[0]
    assert slope == pytest.approx(0.5, abs=1e-3)
    with pytest.raises(DivergenceError):
        M.radial_momentum_matrix_element(N(0, 1), 2, 0.0)


def test_radial_momentum_dirichlet_is_imaginary():
    s = D(0, 1)
    kr = M.radial_momentum_matrix_element(s, 1)
    assert abs(kr.real) < 1e-10
    f = lambda r: 2 * math.pi * (r * wells.psi_radial(s, r) * wells.psi_radial_prime(s, r)
                                 + 0.5 * wells.psi_radial(s, r) ** 2)
    ref, _ = integrate.quad(f, 0, 1, epsabs=1e-12)
    assert kr.imag == pytest.approx(-ref, abs=1e-12)
    assert abs(kr.imag) < 1e-10


def test_radial_momentum_square_finite_for_nonzero_m():
    s = D(2, 1)
    val = M.radial_momentum_matrix_element(s, 2, 0.0)
    j2 = wells.characteristic_zero(s) ** 2
    # <k_r^2> = <k^2> - <(m^2 - 1/4)/r^2>
    corr, _ = integrate.quad(lambda r: 2 * math.pi * r * wells.rho(s, r) * (4 - 0.25) / r**2, 0, 1,
                             epsabs=1e-13)
    assert val.real == pytest.approx(j2 - corr, rel=1e-9)
    with pytest.raises(DomainError):
        M.radial_momentum_matrix_element(s, 3)


def test_uncertainty_diagnostics_dirichlet():
    diag = M.uncertainty_diagnostics(D(1, 2), cutoffs=(50.0, 500.0))
    assert diag.delta_r ** 2 == pytest.approx(diag.r2 - diag.mean_r**2)
    assert diag.k2_converged == pytest.approx(wells.characteristic_zero(D(1, 2)) ** 2, rel=1e-5)
    assert diag.kr2_log_slope is None
    assert abs(diag.kr_expectation.real) < 1e-12
