"""Gaussian tails, truncated absolute moments and the centering constant.

The truncated moment E[|xi|^gamma 1{|xi| > x}] has two independent evaluation
paths: a closed form through the upper incomplete gamma function (series or
Lentz continued fraction, written here) and adaptive quadrature of the
integrand. ``truncated_abs_moment(..., check=True)`` compares them.
"""

from __future__ import annotations

import functools
import math

from scipy import integrate, special as sps

from .core import InvalidParameterError

__all__ = [
    "gaussian_two_sided_tail",
    "truncated_abs_moment",
    "truncated_abs_moment_quad",
    "upper_incomplete_gamma",
    "alpha_gamma",
    "sparse_threshold",
    "CrossCheckError",
]

_SQRT2 = math.sqrt(2.0)


class CrossCheckError(ArithmeticError):
    """The two evaluation paths of a truncated moment disagree."""


def gaussian_two_sided_tail(x: float) -> float:
    """P(|xi| > x) for standard normal xi, via the scaled erfc."""
    if x < 0:
        raise InvalidParameterError(f"x must be nonnegative, got {x}")
    return float(sps.erfcx(x / _SQRT2) * math.exp(-0.5 * x * x))


def _lower_series(a: float, z: float) -> float:
    # sum_n z^n / (a (a+1) ... (a+n)); converges for all z, used for z < a + 1
    term = 1.0 / a
    total = term
    n = 0
    while abs(term) > 1e-17 * abs(total):
        n += 1
        term *= z / (a + n)
        total += term
        if n > 10000:
            break
    return total


def _upper_cf(a: float, z: float) -> float:
    # modified Lentz evaluation of the continued fraction for Gamma(a, z) e^z z^-a
    tiny = 1e-300
    b = z + 1.0 - a
    c = 1.0 / tiny
    dd = 1.0 / b
    h = dd
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2.0
        dd = an * dd + b
        if abs(dd) < tiny:
            dd = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        dd = 1.0 / dd
        delta = dd * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h


def upper_incomplete_gamma(a: float, z: float) -> float:
    """Non-regularised Gamma(a, z) = int_z^inf t^(a-1) e^(-t) dt."""
    if a <= 0:
        raise InvalidParameterError(f"a must be positive, got {a}")
    if z < 0:
        raise InvalidParameterError(f"z must be nonnegative, got {z}")
    if z == 0:
        return math.gamma(a)
    log_pref = a * math.log(z) - z
    if z < a + 1.0:
        lower = math.exp(log_pref) * _lower_series(a, z)
        return math.gamma(a) - lower
    return math.exp(log_pref) * _upper_cf(a, z)


def truncated_abs_moment_quad(gamma: float, x: float) -> float:
    """Adaptive quadrature of 2 int_x^inf t^gamma phi(t) dt."""
    phi = lambda t: t ** gamma * math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)
    # split at a few scales so the quadrature sees the bulk of the mass
    peak = max(x, math.sqrt(gamma))
    pieces = [x, peak + 1.0, peak + 8.0]
    total = 0.0
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        if hi > lo:
            total += integrate.quad(phi, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    total += integrate.quad(phi, max(x, pieces[-1]), math.inf, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    return 2.0 * total


def truncated_abs_moment(gamma: float, x: float, check: bool = False) -> float:
    """E[|xi|^gamma 1{|xi| > x}] = 2^(gamma/2) / sqrt(pi) * Gamma((gamma+1)/2, x^2/2)."""
    if not gamma > 0:
        raise InvalidParameterError(f"gamma must be positive, got {gamma}")
    if x < 0:
        raise InvalidParameterError(f"x must be nonnegative, got {x}")
    value = 2.0 ** (gamma / 2.0) / math.sqrt(math.pi) * upper_incomplete_gamma((gamma + 1.0) / 2.0, 0.5 * x * x)
    if check:
        other = truncated_abs_moment_quad(gamma, x)
        if abs(value - other) > 1e-8 * max(abs(value), 1e-300):
            raise CrossCheckError(
                f"truncated moment paths disagree at gamma={gamma}, x={x}: {value!r} vs {other!r}")
    return value


def sparse_threshold(d: int, s: int) -> float:
    """Standardised threshold sqrt(2 ln(1 + d/s^2))."""
    return math.sqrt(2.0 * math.log1p(d / (s * s)))


@functools.lru_cache(maxsize=1024)
def alpha_gamma(gamma: float, d: int, s: int) -> float:
    """Mean of |xi|^gamma given |xi| above the sparse-zone threshold."""
    if not gamma > 0:
        raise InvalidParameterError(f"gamma must be positive, got {gamma}")
    if not 1 <= s <= d:
        raise InvalidParameterError(f"need 1 <= s <= d, got s={s}, d={d}")
    x = sparse_threshold(d, s)
    return truncated_abs_moment(gamma, x, check=True) / gaussian_two_sided_tail(x)
