"""Estimators of N_gamma(theta) and of the l_gamma norm.

* ``DenseBlock``: polynomial-approximation estimator with exponentially
  growing blocks, for s**2 >= 4d.
* ``EvenClone``: product of gamma cloned samples, unbiased for sum theta_i**gamma
  when gamma is a positive integer.
* ``SparseThreshold``: centred thresholding of |y_i|**gamma, for s**2 < 4d.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import mpmath as mp
import numpy as np

from . import kernels
from .approx import best_poly_approx
from .core import (
    InvalidParameterError,
    ProblemConfig,
    Regime,
    WrongRegimeError,
    is_even_integer,
    make_rng,
    regime,
)
from .special import alpha_gamma, sparse_threshold

__all__ = [
    "EstimatorId",
    "EstimateResult",
    "BlockSchedule",
    "block_schedule",
    "duplicate_sample",
    "clone_sample",
    "dense_coefficients",
    "p_hat",
    "xi_gamma",
    "estimate_dense",
    "estimate_even",
    "estimate_sparse",
    "estimate_norm",
    "estimate_auto",
    "estimate",
]


class EstimatorId(str, enum.Enum):
    DENSE_BLOCK = "DenseBlock"
    EVEN_CLONE = "EvenClone"
    SPARSE_THRESHOLD = "SparseThreshold"


@dataclass(frozen=True)
class EstimateResult:
    estimator_id: EstimatorId
    value: float
    norm_value: Optional[float] = None
    seed: Optional[int] = None
    aux: dict = field(default_factory=dict, compare=False)

    @property
    def n_gamma_estimate(self) -> float:
        """Estimate of n_gamma: the norm value when present, else the functional."""
        return self.value if self.norm_value is None else self.norm_value

    def to_dict(self) -> dict:
        return {
            "estimator_id": self.estimator_id.value,
            "value": self.value,
            "norm_value": self.norm_value,
            "seed": self.seed,
        }


def _with_norm(res: EstimateResult, gamma: float) -> EstimateResult:
    # for gamma < 1 the target n_gamma is the functional itself: no root taken
    norm = abs(res.value) ** (1.0 / gamma) if gamma >= 1 else None
    return EstimateResult(res.estimator_id, res.value, norm, res.seed, res.aux)


# --- randomisation ----------------------------------------------------------

def duplicate_sample(y, eps: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Split y into (y + z, y - z), z ~ N(0, eps^2), two independent samples."""
    if not eps > 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    y = np.asarray(y, dtype=float)
    z = eps * make_rng(seed, "duplicate").standard_normal(y.shape[0])
    return y + z, y - z


def clone_sample(y, eps: float, gamma: int, seed: int) -> np.ndarray:
    """gamma independent copies of y with noise variance gamma * eps^2.

    Column m is y + sqrt(gamma) * (g_m - mean_m g_m) with g i.i.d. N(0, eps^2).
    """
    if not eps > 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    if int(gamma) != gamma or gamma < 1:
        raise InvalidParameterError(f"gamma must be a positive integer, got {gamma}")
    gamma = int(gamma)
    y = np.asarray(y, dtype=float)
    g = eps * make_rng(seed, "clone").standard_normal((y.shape[0], gamma))
    centred = g - g.mean(axis=1, keepdims=True)
    if gamma == 1:
        centred[:] = 0.0
    return y[:, None] + math.sqrt(gamma) * centred


# --- dense zone -------------------------------------------------------------

@dataclass(frozen=True)
class BlockSchedule:
    sigma: float
    c: float
    L: int
    K: Tuple[int, ...]
    M: Tuple[float, ...]
    t: Tuple[float, ...]

    @property
    def cuts(self) -> np.ndarray:
        """Upper block edges sigma * t_l, l = 0..L."""
        return self.sigma * np.asarray(self.t)


def block_schedule(cfg: ProblemConfig) -> BlockSchedule:
    if regime(cfg) is not Regime.DENSE:
        raise WrongRegimeError(f"dense-zone schedule needs s^2 >= 4d (d={cfg.d}, s={cfg.s})")
    lr = math.log(cfg.s ** 2 / cfg.d)
    sigma = math.sqrt(2.0) * cfg.eps
    need = 3.0 * math.sqrt(math.log(cfg.d) / lr)
    L = 0
    while 2 ** L < need:
        L += 1
    root = math.sqrt(2.0 * lr)
    K = tuple(max(1, math.ceil(4 ** l * cfg.c * lr)) for l in range(L + 1))
    M = tuple(2 ** (l + 1) * sigma * root for l in range(L + 1))
    t = tuple(2 ** l * root for l in range(L + 1))
    return BlockSchedule(sigma=sigma, c=cfg.c, L=L, K=K, M=M, t=t)


def _block_coefficients(gamma: float, K: int, M: float, sigma: float):
    """sigma^(2k) a_{gamma,2k} M^(gamma-2k), k = 1..K, rounded once to double."""
    p = best_poly_approx(gamma, K)
    with mp.workdps(50):
        s2, m, g = mp.mpf(sigma) ** 2, mp.mpf(M), mp.mpf(gamma)
        return [float(s2 ** k * p.coeffs[k] * m ** (g - 2 * k)) for k in range(1, K + 1)]


@functools.lru_cache(maxsize=256)
def _coef_matrix(gamma: float, sched: BlockSchedule) -> np.ndarray:
    kmax = max(sched.K)
    out = np.zeros((sched.L + 1, kmax))
    for l, (K, M) in enumerate(zip(sched.K, sched.M)):
        out[l, :K] = _block_coefficients(gamma, K, M, sched.sigma)
    out.setflags(write=False)
    return out


def dense_coefficients(cfg: ProblemConfig) -> np.ndarray:
    """Coefficient matrix B[l, k-1] of H_{2k}(u / sigma) in block l."""
    return _coef_matrix(cfg.gamma, block_schedule(cfg))


def p_hat(u, gamma: float, K: int, M: float, sigma: float) -> np.ndarray:
    """Unbiased estimator of sum_{k>=1} a_{gamma,2k} M^(gamma-2k) theta^(2k) from u ~ N(theta, sigma^2)."""
    coef = np.array([_block_coefficients(gamma, K, M, sigma)])
    u = np.atleast_1d(np.asarray(u, dtype=float))
    # a single block whose edge is infinite, so every coordinate lands in it
    return kernels.dense_terms(u, np.zeros_like(u), sigma, np.array([np.inf]), coef, gamma)


def xi_gamma(u, v, cfg: ProblemConfig) -> np.ndarray:
    """Per-coordinate terms xi_gamma(u_i, v_i) of the dense-zone estimator."""
    sched = block_schedule(cfg)
    return kernels.dense_terms(u, v, sched.sigma, sched.cuts, _coef_matrix(cfg.gamma, sched), cfg.gamma)


def estimate_dense(y, cfg: ProblemConfig, seed: int) -> EstimateResult:
    sched = block_schedule(cfg)
    y = np.asarray(y, dtype=float)
    y1, y2 = duplicate_sample(y, cfg.eps, seed)
    terms = kernels.dense_terms(y1, y2, sched.sigma, sched.cuts,
                                _coef_matrix(cfg.gamma, sched), cfg.gamma)
    counts = np.bincount(np.searchsorted(sched.cuts, np.abs(y2), side="left"),
                         minlength=sched.L + 2)
    aux = {"block_counts": counts[: sched.L + 1].tolist(), "plugin_count": int(counts[sched.L + 1]),
           "K": list(sched.K), "L": sched.L}
    return EstimateResult(EstimatorId.DENSE_BLOCK, float(np.sum(terms)), None, seed, aux)


# --- integer gamma ----------------------------------------------------------

def estimate_even(y, cfg: ProblemConfig, seed: int) -> EstimateResult:
    if not float(cfg.gamma).is_integer():
        raise InvalidParameterError(f"cloning estimator needs an integer gamma, got {cfg.gamma}")
    cols = clone_sample(y, cfg.eps, int(cfg.gamma), seed)
    terms = np.prod(cols, axis=1)
    return EstimateResult(EstimatorId.EVEN_CLONE, float(np.sum(terms)), None, seed,
                          {"clones": int(cfg.gamma)})


# --- sparse zone ------------------------------------------------------------

def estimate_sparse(y, cfg: ProblemConfig, seed: Optional[int] = None) -> EstimateResult:
    """Deterministic thresholding estimator; ``seed`` is only recorded."""
    if regime(cfg) is not Regime.SPARSE:
        raise WrongRegimeError(f"sparse estimator needs s^2 < 4d (d={cfg.d}, s={cfg.s})")
    y = np.asarray(y, dtype=float)
    alpha = alpha_gamma(cfg.gamma, cfg.d, cfg.s)
    x = sparse_threshold(cfg.d, cfg.s)
    tau2 = (cfg.eps * x) ** 2
    terms = kernels.sparse_terms(y, cfg.eps, cfg.gamma, alpha, tau2)
    aux = {"alpha": alpha, "threshold": cfg.eps * x, "crossings": int(np.count_nonzero(y * y > tau2))}
    return EstimateResult(EstimatorId.SPARSE_THRESHOLD, float(np.sum(terms)), None, seed, aux)


# --- selection ----------------------------------------------------------------

def estimate_auto(y, cfg: ProblemConfig, seed: int) -> EstimateResult:
    if regime(cfg) is Regime.SPARSE:
        return estimate_sparse(y, cfg, seed)
    if is_even_integer(cfg.gamma):
        return estimate_even(y, cfg, seed)
    return estimate_dense(y, cfg, seed)


_DISPATCH = {
    "auto": estimate_auto,
    "dense": estimate_dense,
    "even": estimate_even,
    "sparse": estimate_sparse,
}


def estimate(y, cfg: ProblemConfig, seed: int, estimator: str = "auto", norm: bool = False) -> EstimateResult:
    try:
        fn = _DISPATCH[estimator]
    except KeyError:
        raise InvalidParameterError(f"unknown estimator {estimator!r}") from None
    res = fn(y, cfg, seed)
    return _with_norm(res, cfg.gamma) if norm else res


def estimate_norm(y, cfg: ProblemConfig, seed: int, estimator: str = "auto") -> EstimateResult:
    """Estimate of n_gamma: |N_hat|^(1/gamma) for gamma >= 1.

    For gamma < 1 the target is the functional itself, so ``norm_value`` is
    left empty and ``n_gamma_estimate`` returns ``value``.
    """
    return estimate(y, cfg, seed, estimator=estimator, norm=True)
