"""Integer-order Bessel functions of the first kind and their zeros.

Values of ``J_nu`` come from :func:`scipy.special.jv` behind a thin guard
layer (domain checks, an underflow clamp for ``x << nu``).  Zeros of ``J_nu``
and ``J'_nu`` are located here: an asymptotic first guess is polished by a
Newton iteration that never leaves a sign-change bracket.

Derivative zeros follow the convention ``j'_{0,1} = 0``: the constant
(zero-energy) Neumann orbital is then labelled ``(m, n) = (0, 1)``.  Most
published tables start ``J'_0`` at its first *positive* zero instead, so
``bessel_prime_zero(0, n)`` equals ``scipy.special.jnp_zeros(0, n - 1)[-1]``.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import special

__all__ = [
    "BesselZeroTable",
    "DomainError",
    "bessel_j",
    "bessel_j_deriv",
    "bessel_j_prime",
    "bessel_order",
    "bessel_prime_zero",
    "bessel_zero",
    "carrier_averages",
    "modulus_squared",
    "positive_zeros_below",
    "prime_modulus_squared",
    "zero_table",
]

ZeroKind = Literal["function-zero", "derivative-zero"]

# ln(1e-300): below this J_nu is flushed to zero
_LOG_TINY = math.log(1e-300)


class DomainError(ValueError):
    """Argument outside the domain of a special function or profile."""


def bessel_order(m: int) -> int:
    """Map a magnetic quantum number to the Bessel order ``|m|``."""
    if int(m) != m:
        raise DomainError(f"order must be an integer, got {m!r}")
    return abs(int(m))


def _check_args(nu: int, x) -> np.ndarray:
    if nu < 0 or int(nu) != nu:
        raise DomainError(f"order must be a non-negative integer, got {nu!r}")
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("Bessel argument must be finite")
    return arr


def _jn(n: int, x: np.ndarray) -> np.ndarray:
    """``J_n`` for any integer ``n`` (``J_{-n} = (-1)^n J_n``)."""
    if n < 0:
        return (-1) ** n * _jn(-n, x)
    out = special.jv(n, x)
    if n > 0:
        # J_n(x) <= (x/2)^n / n! <= (e x / 2n)^n / sqrt(2 pi n)
        with np.errstate(divide="ignore"):
            logbound = n * np.log(np.e * np.abs(x) / (2 * n)) - 0.5 * math.log(2 * math.pi * n)
        out = np.where(logbound < _LOG_TINY, 0.0, out)
    return out


def _as_output(x_in, out: np.ndarray):
    return float(out) if np.ndim(x_in) == 0 else out


def bessel_j(nu: int, x):
    """Bessel function of the first kind ``J_nu(x)`` for integer ``nu >= 0``.

    Accepts a scalar or an array; returns the same shape.
    """
    arr = _check_args(nu, x)
    return _as_output(x, _jn(int(nu), arr))


def bessel_j_deriv(nu: int, x, p: int):
    """``p``-th derivative of ``J_nu`` at ``x``.

    Uses ``J^{(p)}_nu = 2^{-p} sum_i (-1)^i C(p, i) J_{nu - p + 2i}``, which is
    free of ``1/x`` factors and therefore exact at ``x = 0``.
    """
    if p < 0:
        raise DomainError("derivative order must be >= 0")
    arr = _check_args(nu, x)
    nu = int(nu)
    if p == 0:
        return _as_output(x, _jn(nu, arr))
    acc = np.zeros_like(arr)
    for i in range(p + 1):
        acc = acc + (-1) ** i * math.comb(p, i) * _jn(nu - p + 2 * i, arr)
    return _as_output(x, acc / 2.0**p)


def bessel_j_prime(nu: int, x):
    """``J'_nu(x)``; ``J'_0 = -J_1`` and ``J'_nu = (J_{nu-1} - J_{nu+1}) / 2``."""
    return bessel_j_deriv(nu, x, 1)


# --------------------------------------------------------------------------
# zeros
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BesselZeroTable:
    """Leading zeros of ``J_nu`` (``function-zero``) or ``J'_nu`` (``derivative-zero``).

    For ``derivative-zero`` at ``nu = 0`` the first entry is the conventional
    ``0`` and ``leading_zero_convention`` is set.
    """

    kind: ZeroKind
    nu: int
    zeros: tuple[float, ...]
    leading_zero_convention: bool = False

    def __len__(self) -> int:
        return len(self.zeros)

    def __getitem__(self, n: int) -> float:
        """1-based access: ``table[1]`` is the first zero."""
        if n < 1:
            raise IndexError("zeros are numbered from 1")
        return self.zeros[n - 1]


def _mcmahon(nu: int, n: int, derivative: bool) -> float:
    """McMahon expansion for the n-th positive zero (good for n >> nu)."""
    mu = 4.0 * nu * nu
    if derivative:
        b = (n + nu / 2 - 0.75) * math.pi
        return b - (mu + 3) / (8 * b) - 4 * (7 * mu * mu + 82 * mu - 9) / (3 * (8 * b) ** 3)
    b = (n + nu / 2 - 0.25) * math.pi
    return b - (mu - 1) / (8 * b) - 4 * (mu - 1) * (7 * mu - 31) / (3 * (8 * b) ** 3)


def _first_zero_guess(nu: int, derivative: bool) -> float:
    if nu == 0:
        return _mcmahon(1, 1, False) if derivative else _mcmahon(0, 1, False)
    c = nu ** (1.0 / 3.0)
    if derivative:
        return nu + 0.8086165 * c + 0.072490 / c - 0.05097 / nu + 0.0094 / c**5
    return nu + 1.8557571 * c + 1.033150 / c - 0.00397 / nu - 0.0908 / c**5 + 0.043 / c**7


def _polish(f, df, a: float, b: float, guess: float) -> float:
    """Safeguarded Newton on a sign-change bracket ``[a, b]``."""
    fa = f(a)
    x = guess if a < guess < b else 0.5 * (a + b)
    for _ in range(200):
        fx = f(x)
        if fx == 0.0:
            return x
        if (fx > 0) == (fa > 0):
            a, fa = x, fx
        else:
            b = x
        d = df(x)
        step = fx / d if d != 0.0 else math.inf
        xn = x - step
        if not (a < xn < b) or abs(step) > 0.5 * (b - a):
            xn = 0.5 * (a + b)
        if abs(xn - x) <= 4e-16 * abs(xn) or b - a <= 4e-16 * abs(b):
            return xn
        x = xn
    return x


class _ZeroCache:
    """Write-once-per-entry zero lists, safe for concurrent readers."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._data: dict[tuple[int, bool], tuple[float, ...]] = {}

    def positive(self, nu: int, count: int, derivative: bool) -> tuple[float, ...]:
        key = (nu, derivative)
        have = self._data.get(key, ())
        if len(have) >= count:
            return have[:count]
        with self._lock:
            have = self._data.get(key, ())
            if len(have) < count:
                have = self._extend(nu, derivative, have, count)
                self._data[key] = have
        return have[:count]

    @staticmethod
    def _extend(nu, derivative, have, count):
        p = 1 if derivative else 0
        coeffs = [(-1) ** i * math.comb(p, i) / 2.0**p for i in range(p + 1)]
        coeffs1 = [(-1) ** i * math.comb(p + 1, i) / 2.0 ** (p + 1) for i in range(p + 2)]
        jv = special.jv

        def f(t):
            return sum(c * jv(nu - p + 2 * i, t) for i, c in enumerate(coeffs))

        def df(t):
            return sum(c * jv(nu - p - 1 + 2 * i, t) for i, c in enumerate(coeffs1))

        zeros = list(have)
        # J_nu and J'_nu keep one sign on (0, first positive zero); every
        # later zero sits more than 2 units past its predecessor
        x = zeros[-1] + 1e-3 if zeros else max(float(nu), 0.5)
        step = 0.5
        while len(zeros) < count:
            n = len(zeros) + 1
            if n == 1:
                guess = _first_zero_guess(nu, derivative)
            else:
                guess = _mcmahon(nu, n + (1 if derivative and nu == 0 else 0), derivative)
            fx = f(x)
            a, b = guess - 0.25, guess + 0.25
            if n > 2 * nu + 4 and a > x and (f(a) > 0) != (f(b) > 0):
                # asymptotic regime: the guess is good to far better than 0.25
                z = _polish(f, df, a, b, guess)
            else:
                while True:
                    xr = x + step
                    fr = f(xr)
                    if fx == 0.0 or (fr > 0) != (fx > 0):
                        break
                    x, fx = xr, fr
                z = x if fx == 0.0 else _polish(f, df, x, xr, guess)
            zeros.append(z)
            x = z + 1e-3
        return tuple(zeros)


_CACHE = _ZeroCache()


def zero_table(nu: int, count: int, kind: ZeroKind = "function-zero") -> BesselZeroTable:
    """First ``count`` zeros of ``J_nu`` or ``J'_nu`` (paper indexing for ``J'_0``)."""
    nu = bessel_order(nu)
    if count < 1:
        raise DomainError("count must be >= 1")
    if kind == "function-zero":
        return BesselZeroTable(kind, nu, _CACHE.positive(nu, count, False))
    if kind != "derivative-zero":
        raise DomainError(f"unknown zero kind {kind!r}")
    if nu == 0:
        zs = (0.0,) + _CACHE.positive(0, count - 1, True) if count > 1 else (0.0,)
        return BesselZeroTable(kind, 0, zs, leading_zero_convention=True)
    return BesselZeroTable(kind, nu, _CACHE.positive(nu, count, True))


def bessel_zero(nu: int, n: int) -> float:
    """n-th positive zero ``j_{nu,n}`` of ``J_nu``."""
    if n < 1:
        raise DomainError("zero index n must be >= 1")
    return zero_table(nu, n)[n]


def bessel_prime_zero(nu: int, n: int) -> float:
    """n-th zero ``j'_{nu,n}`` of ``J'_nu``, with ``j'_{0,1} = 0``."""
    if n < 1:
        raise DomainError("zero index n must be >= 1")
    return zero_table(nu, n, "derivative-zero")[n]


def positive_zeros_below(nu: int, xmax: float, derivative: bool = False) -> np.ndarray:
    """All positive zeros of ``J_nu`` (or ``J'_nu``) strictly below ``xmax``."""
    nu = bessel_order(nu)
    count = 8
    while True:
        zs = _CACHE.positive(nu, count, derivative)
        if zs[-1] >= xmax:
            arr = np.asarray(zs)
            return arr[arr < xmax]
        # roughly pi between consecutive zeros
        count = max(2 * count, int((xmax - zs[-1]) / 3.0) + count + 4)


# --------------------------------------------------------------------------
# large-argument envelopes
# --------------------------------------------------------------------------


def modulus_squared(nu: int, x):
    """``M^2 = J_nu^2 + Y_nu^2`` and its x-derivative for ``x >> nu``.

    Asymptotic series truncated at its smallest term; relative accuracy is
    better than 1e-12 once ``x`` exceeds about ``2 nu + 40``.
    """
    x = np.asarray(x, dtype=float)
    mu = 4.0 * nu * nu
    inv = 1.0 / (2.0 * x) ** 2
    total = np.ones_like(x)
    dtotal = np.ones_like(x)  # sum of (2k + 1) * t_k
    term = np.ones_like(x)
    prev = np.full_like(x, np.inf)
    live = np.ones(x.shape, dtype=bool)
    for k in range(1, 30):
        term = term * (2 * k - 1) / (2 * k) * (mu - (2 * k - 1) ** 2) * inv
        live &= np.abs(term) < prev
        if not live.any():
            break
        total = total + np.where(live, term, 0.0)
        dtotal = dtotal + np.where(live, (2 * k + 1) * term, 0.0)
        prev = np.abs(term)
        if np.all(np.abs(term) < 1e-17):
            break
    m2 = 2.0 / (math.pi * x) * total
    dm2 = -2.0 / (math.pi * x * x) * dtotal
    return m2, dm2


def prime_modulus_squared(nu: int, x):
    """``N^2 = J'_nu^2 + Y'_nu^2`` for ``x >> nu``.

    From ``N^2 = M'^2 + M^2 theta'^2`` with the Wronskian phase derivative
    ``theta' = 2 / (pi x M^2)``.
    """
    m2, dm2 = modulus_squared(nu, x)
    return dm2 * dm2 / (4.0 * m2) + 4.0 / (math.pi**2 * np.asarray(x) ** 2 * m2)


def carrier_averages(nu: int, x, derivative: bool):
    """Phase averages of ``B^2``, ``B B'`` and ``B'^2`` for ``B = J_nu`` or ``J'_nu``.

    Each oscillating Bessel product splits into a smooth part plus a part
    with zero phase mean; the smooth parts are returned.
    """
    x = np.asarray(x, dtype=float)
    m2, dm2 = modulus_squared(nu, x)
    n2 = prime_modulus_squared(nu, x)
    jj, jjp, jpjp = m2 / 2.0, dm2 / 4.0, n2 / 2.0
    if not derivative:
        return jj, jjp, jpjp
    # J'' = alpha J' + beta J
    alpha = -1.0 / x
    beta = -(1.0 - nu * nu / (x * x))
    b2 = jpjp
    bb = alpha * jpjp + beta * jjp
    bpbp = alpha * alpha * jpjp + 2 * alpha * beta * jjp + beta * beta * jj
    return b2, bb, bpbp
