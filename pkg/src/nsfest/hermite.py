"""Probabilists' Hermite polynomials and Gaussian moment identities."""

from __future__ import annotations

import functools
import math

import mpmath as mp
import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .core import InvalidParameterError

__all__ = [
    "MAX_DEGREE",
    "hermite_eval",
    "hermite_array",
    "hermite_shifted_mean",
    "gauss_expectation",
    "hermite_monomial_coeffs",
]

MAX_DEGREE = 512
QUAD_NODES = 200


def hermite_eval(k: int, x: float) -> float:
    """H_k(x) through the recurrence H_{k+1} = x H_k - k H_{k-1}.

    Switches to extended precision for k > 40 and |x| > 5; values beyond the
    double range come back as +-inf.
    """
    if int(k) != k or k < 0:
        raise InvalidParameterError(f"degree must be a nonnegative integer, got {k}")
    if k > MAX_DEGREE:
        raise InvalidParameterError(f"degree {k} above supported cap {MAX_DEGREE}")
    k = int(k)
    if k > 40 and abs(x) > 5:
        with mp.workdps(40):
            xx = mp.mpf(x)
            h0, h1 = mp.mpf(1), xx
            for j in range(1, k):
                h0, h1 = h1, xx * h1 - j * h0
            val = h1 if k else h0
            try:
                return float(val)
            except OverflowError:
                return math.copysign(math.inf, val)
    if k == 0:
        return 1.0
    h0, h1 = 1.0, float(x)
    for j in range(1, k):
        h0, h1 = h1, x * h1 - j * h0
    return h1


def hermite_array(kmax: int, x) -> np.ndarray:
    """All of H_0..H_kmax at the points x; shape (kmax + 1,) + x.shape."""
    x = np.asarray(x, dtype=float)
    out = np.empty((kmax + 1,) + x.shape)
    out[0] = 1.0
    if kmax >= 1:
        out[1] = x
    for j in range(1, kmax):
        out[j + 1] = x * out[j] - j * out[j - 1]
    return out


def hermite_monomial_coeffs(k: int):
    """Exact integer coefficients of H_k in the monomial basis (lowest first)."""
    # H_k(x) = k! sum_m (-1)^m x^(k-2m) / (m! (k-2m)! 2^m)
    coeffs = [0] * (k + 1)
    for m in range(k // 2 + 1):
        coeffs[k - 2 * m] = (-1) ** m * math.factorial(k) // (
            math.factorial(m) * math.factorial(k - 2 * m) * 2 ** m)
    return coeffs


@functools.lru_cache(maxsize=None)
def _nodes(n: int):
    x, w = hermegauss(n)
    return x, w / math.sqrt(2 * math.pi)


def gauss_expectation(f, mean: float = 0.0, sd: float = 1.0, nodes: int = QUAD_NODES) -> float:
    """E f(X), X ~ N(mean, sd**2), by Gauss-Hermite quadrature.

    Oracle infrastructure: exact for polynomials of degree < 2 * nodes.
    """
    x, w = _nodes(nodes)
    return float(np.dot(w, f(mean + sd * x)))


def hermite_shifted_mean(k: int, theta: float) -> float:
    """E H_k(X) for X ~ N(theta, 1), by quadrature; equals theta**k."""
    if k > 64:
        raise InvalidParameterError(f"degree {k} above the quadrature oracle cap 64")
    return gauss_expectation(lambda t: hermite_array(k, t)[k], mean=theta)
