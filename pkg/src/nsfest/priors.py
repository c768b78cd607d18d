"""Moment-matching measure pairs and the chi-square certificates built on them.

The extremal pair for |t|**gamma is read off the equioscillation set of the
best even approximation: the signed measure supported there that kills all
moments up to order K is unique up to scale (its weights are the
divided-difference weights of the alternation abscissae in u = t**2), and its
positive and negative parts are the two priors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import mpmath as mp
import numpy as np

from .approx import WORK_DPS, alternation_set, best_poly_approx
from .core import (
    InvalidParameterError,
    ThetaVector,
    WrongRegimeError,
    is_even_integer,
    make_rng,
)

__all__ = [
    "MomentPrior",
    "PriorConfig",
    "ChiSquareBound",
    "PriorConstructionError",
    "PriorCertificationError",
    "matching_measures",
    "certify",
    "prior_config",
    "chi_square_bound",
    "chi_square_exact_small",
    "sample_prior",
    "out_of_class_mass",
    "moment",
]

MOMENT_TOL = 1e-8
GAP_TOL = 1e-6


class PriorConstructionError(ArithmeticError):
    """The alternation set does not determine a signed measure; try another K."""


class PriorCertificationError(ArithmeticError):
    """A constructed pair fails symmetry, moment matching or the gap identity."""


@dataclass(frozen=True)
class MomentPrior:
    gamma: float
    K: int
    M: float
    support0: Tuple[float, ...]
    weights0: Tuple[float, ...]
    support1: Tuple[float, ...]
    weights1: Tuple[float, ...]
    gap: float
    delta: float

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma, "K": self.K, "M": self.M,
            "support0": list(self.support0), "weights0": list(self.weights0),
            "support1": list(self.support1), "weights1": list(self.weights1),
            "gap": self.gap,
        }


@dataclass(frozen=True)
class PriorConfig:
    Lambda: float
    M: float
    K: int


@dataclass(frozen=True)
class ChiSquareBound:
    bound: float
    per_coordinate: float


def moment(support, weights, power: float, absolute: bool = False):
    """Weighted power sum in extended precision."""
    with mp.workdps(WORK_DPS):
        total = mp.mpf(0)
        for t, w in zip(support, weights):
            t = mp.mpf(t)
            if absolute:
                term = mp.mpf(0) if t == 0 else abs(t) ** mp.mpf(power)
            else:
                term = t ** int(power)
            total += mp.mpf(w) * term
        return total


def _signed_weights(u):
    # null vector of the Vandermonde rows u_j^m, m = 0..n-2: divided-difference weights
    with mp.workdps(WORK_DPS):
        uu = [mp.mpf(v) for v in u]
        w = []
        for j, uj in enumerate(uu):
            prod = mp.mpf(1)
            for i, ui in enumerate(uu):
                if i != j:
                    prod *= uj - ui
            if prod == 0:
                raise PriorConstructionError(
                    "alternation set has repeated abscissae; the moment system is singular, change K")
            w.append(1 / prod)
        scale = 2 / mp.fsum(abs(x) for x in w)
        return [x * scale for x in w]


def certify(prior: MomentPrior) -> None:
    """Check symmetry, moment matching up to order K and the gap identity."""
    for supp, wts in ((prior.support0, prior.weights0), (prior.support1, prior.weights1)):
        table = dict(zip(supp, wts))
        for t, w in table.items():
            if table.get(-t) != w:
                raise PriorCertificationError(f"measure not symmetric at t={t}")
        if any(w < 0 for w in wts):
            raise PriorCertificationError("negative weight")
    for l in range(prior.K + 1):
        m0 = moment(prior.support0, prior.weights0, l)
        m1 = moment(prior.support1, prior.weights1, l)
        if abs(m1 - m0) > MOMENT_TOL * prior.M ** l:
            raise PriorCertificationError(f"moment {l} mismatch: {float(m1 - m0):.3e}")
    for supp, wts in ((prior.support0, prior.weights0), (prior.support1, prior.weights1)):
        if abs(moment(supp, wts, 0) - 1) > 1e-10:
            raise PriorCertificationError("measure does not have unit mass")
    want = 2 * prior.M ** prior.gamma * prior.delta
    if abs(prior.gap - want) > GAP_TOL * abs(want):
        raise PriorCertificationError(f"gap {prior.gap!r} differs from 2 M^gamma delta = {want!r}")


def matching_measures(gamma: float, K: int, M: float) -> MomentPrior:
    """Symmetric probability measures on [-M, M] with equal moments up to order K.

    The |t|**gamma means differ by 2 M**gamma delta, where delta is the error of
    the best even polynomial approximation of degree K on [-1, 1].
    """
    if int(K) != K or K < 2 or K % 2:
        raise InvalidParameterError(f"K must be an even integer >= 2, got {K}")
    if not M > 0:
        raise InvalidParameterError(f"M must be positive, got {M}")
    if is_even_integer(gamma) and gamma <= K:
        raise InvalidParameterError(f"|t|^{gamma} is a polynomial of degree <= {K}; no separating pair")
    K = int(K)
    p = best_poly_approx(gamma, K // 2)
    u = alternation_set(p)
    w = _signed_weights(u)
    with mp.workdps(WORK_DPS):
        resid = [mp.mpf(0) if x == 0 else mp.mpf(x) ** (mp.mpf(gamma) / 2) for x in u]
        resid = [r - mp.polyval(list(reversed(p.coeffs)), mp.mpf(x)) for r, x in zip(resid, u)]
        # orient so the positive part sits where |t|^gamma exceeds the polynomial
        if w[0] * resid[0] < 0:
            w = [-x for x in w]
        if any(wj * rj <= 0 for wj, rj in zip(w, resid)):
            raise PriorConstructionError("weights do not follow the residual sign pattern")
        parts = {0: ([], []), 1: ([], [])}
        for uj, wj in zip(u, w):
            side = 1 if wj > 0 else 0
            mass = abs(wj)
            supp, wts = parts[side]
            if uj == 0:
                supp.append(0.0)
                wts.append(float(mass))
            else:
                x = float(M * mp.sqrt(mp.mpf(uj)))
                supp.extend([-x, x])
                wts.extend([float(mass / 2)] * 2)
        m = mp.mpf(M)
        g1 = moment(parts[1][0], parts[1][1], gamma, absolute=True)
        g0 = moment(parts[0][0], parts[0][1], gamma, absolute=True)
        gap = float(g1 - g0)
    order = lambda supp, wts: tuple(zip(*sorted(zip(supp, wts)))) or ((), ())
    s0, w0 = order(*parts[0])
    s1, w1 = order(*parts[1])
    prior = MomentPrior(gamma=float(gamma), K=K, M=float(m), support0=s0, weights0=w0,
                        support1=s1, weights1=w1, gap=gap, delta=p.delta)
    certify(prior)
    return prior


def prior_config(d: int, s: int, eps: float) -> PriorConfig:
    if s * s < 4 * d:
        raise WrongRegimeError(f"prior construction needs s^2 >= 4d (d={d}, s={s})")
    if not eps > 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    lr = math.log(s * s / d)
    lam = math.sqrt(lr)
    K = math.ceil(1.5 * math.e * lr)
    K += K % 2
    return PriorConfig(Lambda=lam, M=eps * lam, K=K)


def _tail_series(lam2: float, K: int) -> float:
    """sum_{k > K} lam2^k / k! summed to relative 1e-15."""
    with mp.workdps(40):
        x = mp.mpf(lam2)
        term = x ** (K + 1) / mp.factorial(K + 1)
        total = mp.mpf(0)
        k = K + 1
        while True:
            total += term
            k += 1
            term *= x / k
            # once x/k < 1/2 the remainder is below twice the next term
            if x / k < 0.5 and 2 * term <= mp.mpf("1e-15") * total:
                break
        return float(total)


def chi_square_bound(d: int, s: int, cfg: PriorConfig) -> ChiSquareBound:
    """exp((s^2 / 2d) sum_{k > K} Lambda^(2k) / k!) - 1 and its series ingredient."""
    if s * s < 4 * d:
        raise WrongRegimeError(f"chi-square bound needs s^2 >= 4d (d={d}, s={s})")
    tail = _tail_series(cfg.Lambda ** 2, cfg.K)
    return ChiSquareBound(bound=math.expm1(s * s / (2.0 * d) * tail), per_coordinate=tail)


def chi_square_exact_small(d: int, s: int, prior: MomentPrior, cfg: PriorConfig) -> float:
    """sum_k (E_1(k) - E_0(k))^2 / k! for the priors rescaled to unit noise.

    This is the per-coordinate divergence between the two Gaussian mixtures;
    ``d`` and ``s`` only enter the product bound and are kept for symmetry.
    """
    eps = cfg.M / cfg.Lambda
    with mp.workdps(WORK_DPS):
        s0 = [mp.mpf(t) / mp.mpf(eps) for t in prior.support0]
        s1 = [mp.mpf(t) / mp.mpf(eps) for t in prior.support1]
        lam = max([abs(t) for t in s0 + s1] + [mp.mpf(0)])
        total = mp.mpf(0)
        k = 0
        fact = mp.mpf(1)
        while True:
            e1 = mp.fsum(w * t ** k for t, w in zip(s1, prior.weights1))
            e0 = mp.fsum(w * t ** k for t, w in zip(s0, prior.weights0))
            total += (e1 - e0) ** 2 / fact
            k += 1
            fact *= k
            # remaining terms are bounded by lam^(2j)/j!, summable once lam^2/k < 1/2
            if lam ** 2 / k < 0.5 and 2 * lam ** (2 * k) / fact <= mp.mpf("1e-15") * max(total, mp.mpf("1e-300")):
                break
            if k > 2000:
                break
        return float(total)


def sample_prior(prior: MomentPrior, d: int, s: int, which: int, seed: int) -> ThetaVector:
    """Coordinates i.i.d.: Bernoulli(s / 2d) gate times a draw from measure ``which``."""
    if which not in (0, 1):
        raise InvalidParameterError(f"which must be 0 or 1, got {which}")
    supp = np.asarray(prior.support1 if which else prior.support0)
    wts = np.asarray(prior.weights1 if which else prior.weights0)
    rng = make_rng(seed, "prior", which)
    gate = rng.random(d) < s / (2.0 * d)
    draw = supp[rng.choice(len(supp), size=d, p=wts / wts.sum())]
    return ThetaVector(np.where(gate, draw, 0.0))


def out_of_class_mass(d: int, s: int) -> Tuple[float, float]:
    """(P(Binomial(d, s/2d) > s), exp(-s/16)); the tail is summed in log space."""
    if not 1 <= s <= d:
        raise InvalidParameterError(f"need 1 <= s <= d, got s={s}, d={d}")
    p = s / (2.0 * d)
    ks = np.arange(s + 1, d + 1)
    if ks.size == 0:
        return 0.0, math.exp(-s / 16.0)
    logc = np.array([math.lgamma(d + 1) - math.lgamma(k + 1) - math.lgamma(d - k + 1) for k in ks])
    logp = logc + ks * math.log(p) + (d - ks) * math.log1p(-p)
    top = logp.max()
    exact = float(math.exp(top) * np.sum(np.exp(logp - top)))
    return exact, math.exp(-s / 16.0)
