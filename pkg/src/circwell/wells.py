"""Eigenstates of the hard-wall circular well in dimensionless units.

Radii are measured in units of the well radius ``d`` (``r = R/d``) and wave
vectors in ``1/d`` (``k = K d``).  Every profile here is the *real* radial
function: the azimuthal factor ``e^{i m phi}`` (and ``(-i)^m`` in momentum
space) is stripped, and the ``1/sqrt(pi)`` normalisation is kept, so the 2D
densities are simply ``psi(r)**2`` and ``phi(k)**2``.

Each momentum profile is stored as ``phi(k) = g(k) B(k)`` with a rational
prefactor ``g`` and an oscillating carrier ``B``:

========================  ==========================  ============
state                     g(k)                        B
========================  ==========================  ============
Dirichlet (m, n)          z / (z^2 - k^2)             J_|m|
Neumann (0, 1)            -1 / k                      J'_0
Neumann, other            c k / (z^2 - k^2)           J'_|m|
========================  ==========================  ============

(times ``1/sqrt(pi)``), where ``z`` is the state's Bessel zero and
``c = z / sqrt(z^2 - m^2)``.  ``k = z`` is a removable singularity, since
``B(z) = 0``; near it the profile is evaluated from a Taylor expansion of
``B(k) / (k - z)``.
"""
from __future__ import annotations

import contextlib
import contextvars
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import quad
from .specfun import (
    DomainError,
    bessel_j_deriv,
    bessel_order,
    bessel_prime_zero,
    bessel_zero,
    carrier_averages,
    positive_zeros_below,
)

__all__ = [
    "BoundaryCondition",
    "StateSpec",
    "UnitSystem",
    "characteristic_zero",
    "default_cutoff",
    "energy",
    "gamma",
    "momentum_carrier",
    "momentum_tail_moments",
    "overlap_momentum",
    "overlap_momentum_exact",
    "overlap_position",
    "perturbed_zeros",
    "phi_radial",
    "phi_radial_prime",
    "position_nodes",
    "psi_radial",
    "psi_radial_prime",
    "psi_radial_second",
    "rho",
]

_SQRT_PI = math.sqrt(math.pi)
_S = 1.0 / _SQRT_PI
# half-width of the Taylor window around k = z, and its number of terms
_POLE_WINDOW = 0.05
_POLE_TERMS = 7


class BoundaryCondition(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"

    @classmethod
    def parse(cls, value) -> "BoundaryCondition":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"d": cls.DIRICHLET, "n": cls.NEUMANN}
        if key in aliases:
            return aliases[key]
        return cls(key)

    @property
    def short(self) -> str:
        return "D" if self is BoundaryCondition.DIRICHLET else "N"


@dataclass(frozen=True)
class StateSpec:
    """One orbital ``(bc, m, n)``; ``m`` is stored as ``|m|``."""

    bc: BoundaryCondition
    m: int
    n: int

    def __post_init__(self):
        object.__setattr__(self, "bc", BoundaryCondition.parse(self.bc))
        object.__setattr__(self, "m", bessel_order(self.m))
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"principal number n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def is_neumann_ground(self) -> bool:
        return self.bc is BoundaryCondition.NEUMANN and self.m == 0 and self.n == 1

    @property
    def label(self) -> str:
        return f"{self.bc.short}({self.m},{self.n})"


@dataclass(frozen=True)
class UnitSystem:
    """Well radius ``d``; the default ``d = 1`` is the dimensionless convention."""

    d: float = 1.0

    def __post_init__(self):
        if not (self.d > 0 and math.isfinite(self.d)):
            raise DomainError("well radius must be positive and finite")


def D(m: int, n: int) -> StateSpec:
    return StateSpec(BoundaryCondition.DIRICHLET, m, n)


def N(m: int, n: int) -> StateSpec:
    return StateSpec(BoundaryCondition.NEUMANN, m, n)


# fault injection for the verification suite: scales every characteristic zero
_ZERO_SCALE = contextvars.ContextVar("circwell_zero_scale", default=1.0)


@contextlib.contextmanager
def perturbed_zeros(rel: float):
    """Scale all characteristic zeros by ``1 + rel`` inside the block (test hook)."""
    token = _ZERO_SCALE.set(1.0 + rel)
    try:
        yield
    finally:
        _ZERO_SCALE.reset(token)


def characteristic_zero(state: StateSpec) -> float:
    """``j_{|m|n}`` (Dirichlet) or ``j'_{|m|n}`` (Neumann, with ``j'_{01} = 0``)."""
    if state.bc is BoundaryCondition.DIRICHLET:
        z = bessel_zero(state.m, state.n)
    else:
        z = bessel_prime_zero(state.m, state.n)
    return z * _ZERO_SCALE.get()


def energy(state: StateSpec) -> float:
    """Energy in units of ``pi^2 hbar^2 / (2 M d^2)``."""
    return (characteristic_zero(state) / math.pi) ** 2


def _position_norm(state: StateSpec, z: float) -> float:
    """Prefactor multiplying ``J_|m|(z r)`` in psi (including 1/sqrt(pi))."""
    nu = state.m
    if state.bc is BoundaryCondition.DIRICHLET:
        return _S / float(bessel_j_deriv(nu + 1, z, 0))
    c = z / math.sqrt(z * z - nu * nu)
    return _S * c / float(bessel_j_deriv(nu, z, 0))


def _check_r(r) -> np.ndarray:
    arr = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise DomainError("r must lie in [0, 1]")
    return arr


def _out(x_in, arr):
    return float(arr) if np.ndim(x_in) == 0 else arr


def _psi_deriv(state: StateSpec, r, p: int):
    arr = _check_r(r)
    if state.is_neumann_ground:
        val = _S if p == 0 else 0.0
        return _out(r, np.full_like(arr, val))
    z = characteristic_zero(state)
    a = _position_norm(state, z)
    return _out(r, a * z**p * bessel_j_deriv(state.m, z * arr, p))


def psi_radial(state: StateSpec, r):
    """Real position profile ``psi_{mn}(r)`` on ``0 <= r <= 1``."""
    return _psi_deriv(state, r, 0)


def psi_radial_prime(state: StateSpec, r):
    return _psi_deriv(state, r, 1)


def psi_radial_second(state: StateSpec, r):
    return _psi_deriv(state, r, 2)


def rho(state: StateSpec, r):
    """Position density (full 2D density at radius ``r``)."""
    return np.square(psi_radial(state, r)) if np.ndim(r) else psi_radial(state, r) ** 2


def position_nodes(state: StateSpec) -> list[float]:
    """Interior radial nodes of ``psi`` in ``(0, 1)``."""
    if state.is_neumann_ground:
        return []
    z = characteristic_zero(state)
    zs = positive_zeros_below(state.m, z)
    return [float(x / z) for x in zs if 0 < x / z < 1 - 1e-14]


# --------------------------------------------------------------------------
# momentum space
# --------------------------------------------------------------------------


def momentum_carrier(state: StateSpec) -> tuple[int, bool]:
    """``(nu, derivative)`` such that ``B = J_nu`` or ``J'_nu``."""
    if state.bc is BoundaryCondition.DIRICHLET:
        return state.m, False
    return state.m, True


def _raw_scale(state: StateSpec, z: float) -> float:
    """Factor relating normalised profiles to the bare orthogonality integrands."""
    if state.bc is BoundaryCondition.DIRICHLET:
        return z
    if state.is_neumann_ground:
        return 1.0
    return z / math.sqrt(z * z - state.m**2)


def _amplitude(state: StateSpec, z: float, k: np.ndarray):
    """``g(k)`` and ``g'(k)`` (see module docstring), away from any pole."""
    with np.errstate(divide="ignore", invalid="ignore"):
        if state.bc is BoundaryCondition.DIRICHLET:
            den = z * z - k * k
            return _S * z / den, 2 * _S * z * k / den**2
        if state.is_neumann_ground:
            return -_S / k, _S / (k * k)
        c = _raw_scale(state, z)
        den = z * z - k * k
        return _S * c * k / den, _S * c * (z * z + k * k) / den**2


def _pole_weight(state: StateSpec, z: float, k: np.ndarray):
    """``W`` and ``W'`` in ``phi = W(k) * B(k) / (k - z)``."""
    if state.bc is BoundaryCondition.DIRICHLET:
        return -_S * z / (z + k), _S * z / (z + k) ** 2
    c = _raw_scale(state, z)
    return -_S * c * k / (z + k), -_S * c * z / (z + k) ** 2


def _taylor_quotient(state: StateSpec, z: float, h: np.ndarray):
    """``Q(h) = B(z + h) / h`` and ``Q'(h)`` from the Taylor series of ``B`` at ``z``."""
    nu, deriv = momentum_carrier(state)
    shift = 1 if deriv else 0
    b = [float(bessel_j_deriv(nu, z, i + shift)) / math.factorial(i)
         for i in range(1, _POLE_TERMS + 2)]
    q = np.zeros_like(h)
    dq = np.zeros_like(h)
    for i in range(_POLE_TERMS, 0, -1):  # Horner
        q = q * h + b[i - 1]
    for i in range(_POLE_TERMS, 1, -1):
        dq = dq * h + (i - 1) * b[i - 1]
    return q, dq


def _phi_parts(state: StateSpec, k, want_derivative: bool):
    arr = np.asarray(k, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError("k must be finite and non-negative")
    z = characteristic_zero(state)
    nu, deriv = momentum_carrier(state)
    shift = 1 if deriv else 0
    bk = bessel_j_deriv(nu, arr, shift)
    g, dg = _amplitude(state, z, arr)
    dphi = None
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = g * bk
        if want_derivative:
            dphi = dg * bk + g * bessel_j_deriv(nu, arr, shift + 1)

    if state.is_neumann_ground:
        # J_1(k)/k and its derivative -J_2(k)/k near the origin
        small = arr < 1e-3
        if np.any(small):
            x2 = arr[small] ** 2
            phi = np.where(small, 0, phi)
            phi[small] = _S * (0.5 - x2 / 16 + x2 * x2 / 384 - x2**3 / 18432)
            if want_derivative:
                x = arr[small]
                dphi = np.where(small, 0, dphi)
                dphi[small] = _S * (-x / 8 + x**3 / 96 - x**5 / 3072)
        return phi, dphi

    near = np.abs(arr - z) < _POLE_WINDOW
    if np.any(near):
        kn = arr[near]
        q, dq = _taylor_quotient(state, z, kn - z)
        w, dw = _pole_weight(state, z, kn)
        phi = np.array(phi, dtype=float, copy=True)
        phi[near] = w * q
        if want_derivative:
            dphi = np.array(dphi, dtype=float, copy=True)
            dphi[near] = dw * q + w * dq
    return phi, dphi


def phi_radial(state: StateSpec, k):
    """Real momentum profile ``phi_{mn}(k)`` for ``k >= 0``."""
    phi, _ = _phi_parts(state, k, False)
    return _out(k, phi)


def phi_radial_prime(state: StateSpec, k):
    """``d phi / dk``, finite through the removable singularity."""
    _, dphi = _phi_parts(state, k, True)
    return _out(k, dphi)


def gamma(state: StateSpec, k):
    """Momentum density (full 2D density at wave number ``k``)."""
    p = phi_radial(state, k)
    return p * p


def momentum_tail_moments(state: StateSpec, k):
    """Phase averages ``<phi^2>`` and ``<phi'^2>`` for ``k`` well past the last pole.

    ``2 <phi^2>`` is the envelope of the momentum density: for large ``k``,
    ``gamma ~ 2 <phi^2> cos^2(theta(k))``.
    """
    k = np.asarray(k, dtype=float)
    z = characteristic_zero(state)
    nu, deriv = momentum_carrier(state)
    g, dg = _amplitude(state, z, k)
    b2, bb, bpbp = carrier_averages(nu, k, deriv)
    return g * g * b2, dg * dg * b2 + 2 * g * dg * bb + g * g * bpbp


def default_cutoff(state: StateSpec) -> float:
    """Where panel quadrature stops and the asymptotic tail takes over."""
    return 400.0 + 4.0 * characteristic_zero(state)


def momentum_policy(state: StateSpec, averaged, tail_mode="asymptotic-average",
                    max_cutoff: float | None = None, others=()) -> quad.TailPolicy:
    """Tail policy whose panels end at the zeros of the state's carrier."""
    nu, deriv = momentum_carrier(state)
    poles = tuple(characteristic_zero(s) for s in (state, *others) if not s.is_neumann_ground)
    poles = tuple(p for p in poles if p > 0)
    return quad.TailPolicy(
        breakpoint_source="bessel-zeros",
        max_cutoff=max_cutoff if max_cutoff is not None else default_cutoff(state),
        tail_mode=tail_mode,
        order=nu,
        derivative=deriv,
        singular_points=poles,
        averaged=averaged,
    )


# --------------------------------------------------------------------------
# overlaps
# --------------------------------------------------------------------------


def _same_family(a: StateSpec, b: StateSpec) -> None:
    if a.bc is not b.bc:
        raise DomainError("overlaps are defined between states of the same boundary condition")


def overlap_position(a: StateSpec, b: StateSpec, tol: float = 1e-13) -> float:
    """``2 pi int_0^1 r psi_a psi_b dr``; zero by symmetry when ``|m|`` differs."""
    _same_family(a, b)
    if a.m != b.m:
        return 0.0
    pts = sorted(set(position_nodes(a)) | set(position_nodes(b)))
    res = quad.integrate_finite(
        lambda r: 2 * math.pi * r * psi_radial(a, r) * psi_radial(b, r), 0.0, 1.0,
        tol=tol, points=pts)
    return res.value


def overlap_momentum(a: StateSpec, b: StateSpec, tol: float = 1e-11) -> quad.QuadratureResult:
    """Bare momentum orthogonality integral for two states with equal ``|m|``.

    Dirichlet: ``int_0^inf k J^2(k) / ((z_a^2 - k^2)(z_b^2 - k^2)) dk``.
    Neumann: ``int_0^inf k^3 J'^2(k) / ((z_a^2 - k^2)(z_b^2 - k^2)) dk``.
    Compare with :func:`overlap_momentum_exact`.
    """
    _same_family(a, b)
    if a.m != b.m:
        raise DomainError("momentum overlap integral needs equal |m|")
    za, zb = characteristic_zero(a), characteristic_zero(b)
    scale = math.pi / (_raw_scale(a, za) * _raw_scale(b, zb))

    def f(k):
        return scale * k * phi_radial(a, k) * phi_radial(b, k)

    def averaged(k):
        ga, _ = _amplitude(a, za, k)
        gb, _ = _amplitude(b, zb, k)
        nu, deriv = momentum_carrier(a)
        b2, _, _ = carrier_averages(nu, k, deriv)
        return scale * k * ga * gb * b2

    cutoff = 400.0 + 4.0 * max(za, zb)
    policy = momentum_policy(a, averaged, max_cutoff=cutoff, others=(b,))
    return quad.integrate_semi_infinite(f, 0.0, policy, tol)


def overlap_momentum_exact(a: StateSpec, b: StateSpec) -> float:
    """Closed-form value of the integral in :func:`overlap_momentum`."""
    _same_family(a, b)
    if a.n != b.n or a.m != b.m:
        return 0.0
    z = characteristic_zero(a)
    if a.bc is BoundaryCondition.DIRICHLET:
        return 1.0 / (2.0 * z * z)
    if a.is_neumann_ground:
        return 0.5
    return 0.5 * (1.0 - (a.m / z) ** 2)
