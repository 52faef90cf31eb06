"""Information measures and uncertainty diagnostics of circular-well states.

Everything is dimensionless (lengths in units of the well radius).  Position
integrals run over ``[0, 1]`` with breakpoints at the radial nodes; momentum
integrals are split at the zeros of the state's Bessel carrier and closed with
the phase-averaged tail from :func:`circwell.wells.momentum_tail_moments`.

Fisher informations use ``(rho')^2 / rho = 4 (psi')^2``, which holds for any
real profile and is finite at the nodes, so no node-limit special case is
needed.
"""
from __future__ import annotations

import contextvars
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import quad, wells
from .specfun import DomainError, bessel_j, positive_zeros_below
from .wells import BoundaryCondition, StateSpec, UnitSystem

__all__ = [
    "BBM_BOUND",
    "ConvergenceError",
    "DivergenceError",
    "InvariantError",
    "MeasureRecord",
    "UncertaintyDiagnostics",
    "cgl_complexity",
    "fisher_momentum",
    "fisher_position",
    "fisher_position_numeric",
    "measure_grid",
    "measure_record",
    "momentum_second_moment",
    "onicescu_momentum",
    "onicescu_position",
    "position_moments",
    "radial_momentum_matrix_element",
    "shannon_momentum",
    "shannon_position",
    "to_dimensional",
    "uncertainty_diagnostics",
]

BBM_BOUND = 2.0 * (1.0 + math.log(math.pi))

POSITION_TOL = 1e-11
MOMENTUM_TOL = 1e-8
_LN2 = math.log(2.0)
_TWO_PI = 2.0 * math.pi
# cutoff multipliers tried in turn when a momentum integral misses its tolerance
_ESCALATION = (1.0, 2.0, 4.0)


class ConvergenceError(ArithmeticError):
    """A quadrature missed its tolerance; ``result`` holds the best estimate."""

    def __init__(self, what: str, result: quad.QuadratureResult):
        super().__init__(f"{what}: not converged (value {result.value!r}, "
                         f"error estimate {result.abs_error_estimate:.3g})")
        self.result = result


class DivergenceError(ArithmeticError):
    """The requested expectation value is infinite."""


class InvariantError(ValueError):
    pass


# --------------------------------------------------------------------------
# integration helpers
# --------------------------------------------------------------------------


def _accepted(res: quad.QuadratureResult, tol: float) -> bool:
    # tolerances are relative for values above one
    return res.converged or (
        not res.divergent and res.abs_error_estimate <= tol * max(1.0, abs(res.value)))


def _position_integral(state: StateSpec, f, what: str, tol: float | None = None) -> float:
    tol = tol or POSITION_TOL
    nodes = wells.position_nodes(state)
    rough = quad.integrate_finite(f, 0.0, 1.0, tol=1e-4, points=nodes).value
    scaled = tol * max(1.0, abs(rough))
    res = quad.integrate_finite(f, 0.0, 1.0, tol=scaled, points=nodes)
    if not _accepted(res, tol):
        raise ConvergenceError(f"{what} {state.label}", res)
    return float(res.value)


def _momentum_result(state: StateSpec, f, averaged, tol: float | None = None,
                     kmax: float | None = None) -> quad.QuadratureResult:
    tol = tol or MOMENTUM_TOL
    base = kmax if kmax is not None else wells.default_cutoff(state)
    res = None
    for mult in _ESCALATION:
        policy = wells.momentum_policy(state, averaged, max_cutoff=base * mult)
        try:
            with np.errstate(invalid="ignore", divide="ignore"):
                res = quad.integrate_semi_infinite(f, 0.0, policy, tol=tol)
        except FloatingPointError:
            # the averaged tail model breaks down this close to the pole
            res = quad.QuadratureResult(math.nan, math.inf, 0, False)
        if _accepted(res, tol) or res.divergent or kmax is not None:
            break
    return res


def _momentum_integral(state: StateSpec, f, averaged, what: str, tol=None, kmax=None) -> float:
    res = _momentum_result(state, f, averaged, tol, kmax)
    if not _accepted(res, tol or MOMENTUM_TOL):
        raise ConvergenceError(f"{what} {state.label}", res)
    return float(res.value)


def _envelope(state: StateSpec, k):
    """Envelope ``A`` of the momentum density, ``gamma ~ A cos^2``."""
    mean_sq, _ = wells.momentum_tail_moments(state, k)
    return 2.0 * mean_sq


# --------------------------------------------------------------------------
# Shannon
# --------------------------------------------------------------------------


def shannon_position(state: StateSpec, tol=None) -> float:
    """``S_rho = -2 pi int_0^1 r rho ln rho dr``."""
    if state.is_neumann_ground:
        return math.log(math.pi)

    def f(r):
        return _TWO_PI * r * quad.entropy_integrand(wells.rho(state, r))

    return _position_integral(state, f, "S_rho", tol)


def shannon_momentum(state: StateSpec, tol=None, kmax=None) -> float:
    """``S_gamma = -2 pi int_0^inf k gamma ln gamma dk``."""

    def f(k):
        return _TWO_PI * k * quad.entropy_integrand(wells.gamma(state, k))

    def averaged(k):
        # <cos^2 ln cos^2> = 1/2 - ln 2
        a = _envelope(state, k)
        return _TWO_PI * k * (-0.5 * a * np.log(a) - (0.5 - _LN2) * a)

    return _momentum_integral(state, f, averaged, "S_gamma", tol, kmax)


# --------------------------------------------------------------------------
# Fisher
# --------------------------------------------------------------------------


def fisher_position_numeric(state: StateSpec, tol=None) -> float:
    """``I_rho = 2 pi int_0^1 r (rho')^2 / rho dr = 8 pi int_0^1 r (psi')^2 dr``."""
    if state.is_neumann_ground:
        return 0.0

    def f(r):
        return 4.0 * _TWO_PI * r * np.square(wells.psi_radial_prime(state, r))

    return _position_integral(state, f, "I_rho", tol)


def fisher_position(state: StateSpec, tol=None) -> float:
    """Position Fisher information; closed form for Dirichlet states."""
    if state.bc is not BoundaryCondition.DIRICHLET:
        return fisher_position_numeric(state, tol)
    m = state.m
    j = wells.characteristic_zero(state)
    if m == 0:
        return 4.0 * j * j
    tail = math.fsum(bessel_j(k, j) ** 2 for k in range(1, m))
    bracket = 1.0 - bessel_j(0, j) ** 2 - 2.0 * tail
    return 4.0 * j * j - 4.0 * m / bessel_j(m + 1, j) ** 2 * bracket


def fisher_momentum(state: StateSpec, tol=None, kmax=None) -> float:
    """``I_gamma = 2 pi int_0^inf k (gamma')^2 / gamma dk``."""

    def f(k):
        return 4.0 * _TWO_PI * k * np.square(wells.phi_radial_prime(state, k))

    def averaged(k):
        _, mean_dsq = wells.momentum_tail_moments(state, k)
        return 4.0 * _TWO_PI * k * mean_dsq

    return _momentum_integral(state, f, averaged, "I_gamma", tol, kmax)


# --------------------------------------------------------------------------
# Onicescu and complexity
# --------------------------------------------------------------------------


def onicescu_position(state: StateSpec, tol=None) -> float:
    """``O_rho = 2 pi int_0^1 r rho^2 dr``."""
    if state.is_neumann_ground:
        return 1.0 / math.pi

    def f(r):
        return _TWO_PI * r * np.square(wells.rho(state, r))

    return _position_integral(state, f, "O_rho", tol)


def onicescu_momentum(state: StateSpec, tol=None, kmax=None) -> float:
    """``O_gamma = 2 pi int_0^inf k gamma^2 dk``."""

    def f(k):
        return _TWO_PI * k * np.square(wells.gamma(state, k))

    def averaged(k):
        # <cos^4> = 3/8
        return _TWO_PI * k * 0.375 * np.square(_envelope(state, k))

    return _momentum_integral(state, f, averaged, "O_gamma", tol, kmax)


def cgl_complexity(S: float, O: float) -> float:
    """``CGL = e^S O``."""
    if not O > 0:
        raise DomainError("Onicescu energy must be positive")
    return math.exp(S) * O


# --------------------------------------------------------------------------
# records
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MeasureRecord:
    state: StateSpec
    S_rho: float
    S_gamma: float
    S_t: float
    I_rho: float
    I_gamma: float
    O_rho: float
    O_gamma: float
    CGL_rho: float
    CGL_gamma: float
    E: float

    @property
    def I_product(self) -> float:
        return self.I_rho * self.I_gamma

    @property
    def O_product(self) -> float:
        return self.O_rho * self.O_gamma

    @property
    def bbm_margin(self) -> float:
        return self.S_t - BBM_BOUND

    def check(self, eps: float = 1e-6) -> None:
        problems = []
        if abs(self.S_t - (self.S_rho + self.S_gamma)) > 1e-12 * max(1.0, abs(self.S_t)):
            problems.append("S_t != S_rho + S_gamma")
        if self.S_t < BBM_BOUND - eps:
            problems.append(f"BBM violated: S_t = {self.S_t:.8f}")
        if self.CGL_rho < 1 - eps or self.CGL_gamma < 1 - eps:
            problems.append("CGL below 1")
        if self.I_rho < -eps or self.O_rho <= 0 or self.O_gamma <= 0:
            problems.append("negative Fisher or non-positive Onicescu value")
        if problems:
            raise InvariantError(f"{self.state.label}: " + "; ".join(problems))


def measure_record(state: StateSpec, tol=None, kmax=None) -> MeasureRecord:
    """All measures of one state, with the record invariants enforced."""
    try:
        s_r = shannon_position(state)
        s_g = shannon_momentum(state, tol, kmax)
        o_r = onicescu_position(state)
        o_g = onicescu_momentum(state, tol, kmax)
        rec = MeasureRecord(
            state=state,
            S_rho=s_r,
            S_gamma=s_g,
            S_t=s_r + s_g,
            I_rho=fisher_position(state),
            I_gamma=fisher_momentum(state, tol, kmax),
            O_rho=o_r,
            O_gamma=o_g,
            CGL_rho=cgl_complexity(s_r, o_r),
            CGL_gamma=cgl_complexity(s_g, o_g),
            E=wells.energy(state),
        )
    except ConvergenceError as exc:
        raise ConvergenceError(f"{state.label}: {exc}", exc.result) from exc
    rec.check()
    return rec


def _thread_count() -> int:
    raw = os.environ.get("CIRCWELL_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def measure_grid(states: Iterable[StateSpec], threads: int | None = None, **kw) -> list:
    """``measure_record`` over many states, in input order.

    Each item is a MeasureRecord or, for a state whose quadrature failed, the
    ConvergenceError raised for it.  The worker count comes from ``threads``,
    else ``CIRCWELL_THREADS``, else the CPU count.
    """
    states = list(states)

    def one(s):
        try:
            return measure_record(s, **kw)
        except ConvergenceError as exc:
            return exc

    n = threads or _thread_count()
    if n == 1 or len(states) < 2:
        return [one(s) for s in states]
    # workers run in a copy of the caller's context so test hooks carry over
    ctx = contextvars.copy_context()
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda s: ctx.copy().run(one, s), states))


def to_dimensional(record: MeasureRecord, units: UnitSystem | float) -> MeasureRecord:
    """Measures for a well of radius ``d`` (energy stays in its own unit)."""
    d = units.d if isinstance(units, UnitSystem) else float(units)
    if not d > 0:
        raise DomainError("radius must be positive")
    ln = 2.0 * math.log(d)
    return replace(
        record,
        S_rho=record.S_rho + ln,
        S_gamma=record.S_gamma - ln,
        I_rho=record.I_rho / d**2,
        I_gamma=record.I_gamma * d**2,
        O_rho=record.O_rho / d**2,
        O_gamma=record.O_gamma * d**2,
    )


# --------------------------------------------------------------------------
# moments and the radial momentum operator
# --------------------------------------------------------------------------


def position_moments(state: StateSpec, order: int) -> float:
    """``<r^order> = 2 pi int_0^1 r^(order+1) rho dr``."""
    if order < 1:
        raise DomainError("order must be >= 1")

    def f(r):
        return _TWO_PI * r ** (order + 1) * wells.rho(state, r)

    return _position_integral(state, f, f"<r^{order}>")


@dataclass
class UncertaintyDiagnostics:
    mean_r: float
    r2: float
    delta_r: float
    k2_truncated: list = field(default_factory=list)
    k2_converged: float | None = None
    kr_expectation: complex = 0j
    kr2_log_slope: float | None = None
    k2_divergent: bool = False
    k2_growth_rate: float | None = None


def momentum_second_moment(state: StateSpec, cutoffs: Sequence[float] = (1e2, 1e3, 1e4)) -> dict:
    """Partial ``<k^2>`` integrals up to each cutoff, plus the limit if it exists.

    Returns a dict with ``k2_truncated`` (list of ``(cutoff, value)``),
    ``k2_converged`` (``None`` when divergent), ``k2_divergent`` and
    ``k2_growth_rate`` (slope between the last two cutoffs).
    """
    cutoffs = [float(c) for c in cutoffs]
    if not cutoffs or any(b <= a for a, b in zip(cutoffs, cutoffs[1:])) or cutoffs[0] <= 0:
        raise DomainError("cutoffs must be positive and increasing")
    nu, deriv = wells.momentum_carrier(state)
    z = wells.characteristic_zero(state)

    def f(k):
        return _TWO_PI * k**3 * wells.gamma(state, k)

    def averaged(k):
        mean_sq, _ = wells.momentum_tail_moments(state, k)
        return _TWO_PI * k**3 * mean_sq

    zeros = positive_zeros_below(nu, cutoffs[-1], deriv)
    partial, total, lo = [], 0.0, 0.0
    for c in cutoffs:
        inner = [x for x in zeros if lo < x < c]
        if lo < z < c:
            inner.append(z)
        res = quad.integrate_finite(f, lo, c, tol=1e-10 * max(1.0, c), points=inner)
        total += res.value
        partial.append((c, total))
        lo = c

    res = _momentum_result(state, f, averaged, tol=1e-8)
    converged = float(res.value) if _accepted(res, 1e-8) else None
    if len(partial) >= 2:
        (c0, v0), (c1, v1) = partial[-2], partial[-1]
        rate = (v1 - v0) / (c1 - c0)
    else:
        rate = partial[-1][1] / partial[-1][0]
    return {
        "k2_truncated": partial,
        "k2_converged": converged,
        "k2_divergent": bool(res.divergent),
        "k2_growth_rate": rate if res.divergent else None,
    }


def radial_momentum_matrix_element(state: StateSpec, power: int, eps: float = 0.0) -> complex:
    """``2 pi int_eps^1 r psi (k_r^power psi) dr`` with ``k_r = -i (d/dr + 1/(2r))``.

    For ``power == 2`` the integrand carries ``psi^2 / (4 r)``, so the integral
    diverges logarithmically at ``eps = 0`` whenever ``psi(0) != 0``; that case
    raises DivergenceError.
    """
    if power not in (1, 2):
        raise DomainError("power must be 1 or 2")
    if not 0.0 <= eps < 1.0:
        raise DomainError("inner cutoff must lie in [0, 1)")
    points = wells.position_nodes(state)
    if eps > 0:
        # log-spaced breakpoints keep the 1/r region well resolved
        points = points + [float(x) for x in np.geomspace(eps, 1.0, 12)[1:-1]]

    if power == 1:
        def f(r):
            p = wells.psi_radial(state, r)
            return _TWO_PI * (r * p * wells.psi_radial_prime(state, r) + 0.5 * p * p)

        res = quad.integrate_finite(f, eps, 1.0, tol=1e-13, points=points)
        if not res.converged:
            raise ConvergenceError(f"<k_r> {state.label}", res)
        return complex(0.0, -res.value)

    if eps == 0.0 and wells.psi_radial(state, 0.0) != 0.0:
        raise DivergenceError(f"<k_r^2> diverges for {state.label} without an inner cutoff")

    def g(r):
        p = wells.psi_radial(state, r)
        d1 = wells.psi_radial_prime(state, r)
        d2 = wells.psi_radial_second(state, r)
        return _TWO_PI * (-r * p * (d2 + d1 / r) + p * p / (4.0 * r))

    res = quad.integrate_finite(g, eps, 1.0, tol=1e-11, points=points)
    if not res.converged:
        raise ConvergenceError(f"<k_r^2> {state.label}", res)
    return complex(res.value, 0.0)


def uncertainty_diagnostics(state: StateSpec, cutoffs: Sequence[float] = (1e2, 1e3, 1e4),
                            eps_grid: Sequence[float] = (1e-3, 1e-5, 1e-7)) -> UncertaintyDiagnostics:
    """Position spread, ``<k^2>`` behaviour and radial-momentum matrix elements."""
    mean_r = position_moments(state, 1)
    r2 = position_moments(state, 2)
    var = r2 - mean_r * mean_r
    if var < -1e-12:
        raise InvariantError(f"negative position variance for {state.label}")
    k2 = momentum_second_moment(state, cutoffs)
    slope = None
    if wells.psi_radial(state, 0.0) != 0.0:
        x = np.log(1.0 / np.asarray(eps_grid, dtype=float))
        y = [radial_momentum_matrix_element(state, 2, e).real for e in eps_grid]
        slope = float(np.polyfit(x, y, 1)[0])
    return UncertaintyDiagnostics(
        mean_r=mean_r,
        r2=r2,
        delta_r=math.sqrt(max(var, 0.0)),
        kr_expectation=radial_momentum_matrix_element(state, 1),
        kr2_log_slope=slope,
        **k2,
    )
