"""Best uniform approximation of |x|**gamma on [-1, 1] by even polynomials.

The problem is solved in the variable u = x**2, where it becomes the ordinary
(non-even) minimax problem for g(u) = u**(gamma/2) on [0, 1] by polynomials of
degree K. The levelled linear systems are solved in a shifted Chebyshev basis
T_j(2u - 1) in extended precision; extremum search runs on a double-precision
grid followed by golden-section refinement and an extended-precision Newton
polish. Canonical coefficients are produced last, in extended precision.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import mpmath as mp
import numpy as np
import scipy.linalg
from numpy.polynomial import chebyshev as cheb

from .core import InvalidParameterError, is_even_integer

__all__ = [
    "PolyApprox",
    "ConvergenceError",
    "DegenerateApproximationError",
    "best_poly_approx",
    "eval_poly",
    "eval_poly_array",
    "residual_array",
    "alternation_set",
    "WORK_DPS",
]

WORK_DPS = 60
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class ConvergenceError(RuntimeError):
    """Remez iteration hit its cap; carries the last residual profile."""

    def __init__(self, message, residual_profile):
        super().__init__(message)
        self.residual_profile = residual_profile


class DegenerateApproximationError(ValueError):
    """The approximation is exact, so no alternation set exists."""


@dataclass(frozen=True)
class PolyApprox:
    """Best approximation P(x) = sum_k coeffs[k] * x**(2k) of |x|**gamma.

    ``coeffs`` hold mpmath numbers (60 significant digits of working
    precision); ``alternation`` holds the equioscillation abscissae in the
    u = x**2 variable; ``delta`` is the certified sup-norm error.
    """

    gamma: float
    K: int
    coeffs: Tuple[mp.mpf, ...]
    delta: float
    alternation: Tuple[float, ...]
    levelled: float = 0.0
    iterations: int = 0
    _cheb: Tuple[float, ...] = field(default=(), repr=False, compare=False)

    @property
    def exact(self) -> bool:
        return self.delta == 0.0

    def float_coeffs(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs])

    def to_json(self) -> str:
        # 70 significant digits is more than enough to round-trip WORK_DPS numbers
        with mp.workdps(WORK_DPS):
            coeffs = [mp.nstr(mp.mpf(c), 70, strip_zeros=False) if c else "0" for c in self.coeffs]
        return json.dumps({
            "gamma": self.gamma,
            "K": self.K,
            "delta": self.delta,
            "coeffs": coeffs,
            "alternation": list(self.alternation),
        })

    @classmethod
    def from_json(cls, text: str) -> "PolyApprox":
        obj = json.loads(text)
        with mp.workdps(WORK_DPS):
            coeffs = tuple(mp.mpf(c) for c in obj["coeffs"])
        return cls(gamma=float(obj["gamma"]), K=int(obj["K"]), coeffs=coeffs,
                   delta=float(obj["delta"]), alternation=tuple(obj["alternation"]),
                   _cheb=tuple(_monomial_to_cheb(coeffs)))


# --- basis conversions ------------------------------------------------------

def _shifted_cheb_monomials(n: int) -> List[List[mp.mpf]]:
    """Monomial coefficients (in u) of T_j(2u - 1), j = 0..n."""
    rows = [[mp.mpf(1)]]
    if n >= 1:
        rows.append([mp.mpf(-1), mp.mpf(2)])
    for j in range(2, n + 1):
        prev, prev2 = rows[j - 1], rows[j - 2]
        nxt = [mp.mpf(0)] * (j + 1)
        for k, a in enumerate(prev):
            # (4u - 2) * T_{j-1}
            nxt[k + 1] += 4 * a
            nxt[k] -= 2 * a
        for k, a in enumerate(prev2):
            nxt[k] -= a
        rows.append(nxt)
    return rows


def _cheb_to_monomial(c: Sequence[mp.mpf]) -> List[mp.mpf]:
    rows = _shifted_cheb_monomials(len(c) - 1)
    out = [mp.mpf(0)] * len(c)
    for cj, row in zip(c, rows):
        for k, a in enumerate(row):
            out[k] += cj * a
    return out


def _monomial_to_cheb(a: Sequence[mp.mpf]) -> List[float]:
    # triangular solve against the shifted Chebyshev monomial table
    n = len(a) - 1
    rows = _shifted_cheb_monomials(n)
    rem = list(a)
    c = [mp.mpf(0)] * (n + 1)
    for j in range(n, -1, -1):
        c[j] = rem[j] / rows[j][j]
        for k, r in enumerate(rows[j]):
            rem[k] -= c[j] * r
    return [float(v) for v in c]


def _horner(a: Sequence[mp.mpf], u):
    acc = mp.mpf(0)
    for coef in reversed(a):
        acc = acc * u + coef
    return acc


def _horner_derivs(a: Sequence[mp.mpf], u):
    """Value, first and second derivative of a polynomial in u."""
    p = dp = ddp = mp.mpf(0)
    for coef in reversed(a):
        ddp = ddp * u + 2 * dp
        dp = dp * u + p
        p = p * u + coef
    return p, dp, ddp


# --- Remez ------------------------------------------------------------------

def _search_grid() -> Tuple[np.ndarray, np.ndarray]:
    x = np.concatenate([np.linspace(0.0, 1.0, 4097), np.logspace(-12, -2, 300)])
    x = np.unique(x)
    return x, x * x


_GRID_X, _GRID_U = _search_grid()


def _golden_refine(fneg, a: np.ndarray, b: np.ndarray, iters: int = 70) -> np.ndarray:
    """Vectorised golden-section minimisation of fneg on the brackets [a, b]."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fneg(c), fneg(d)
    for _ in range(iters):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - _GOLDEN * (b - a)
        new_d = a + _GOLDEN * (b - a)
        c, d = np.where(left, new_c, d), np.where(left, c, new_d)
        fc, fd = fneg(c), fneg(d)
    return 0.5 * (a + b)


class _Remez:
    def __init__(self, gamma: float, K: int):
        self.gamma = gamma
        self.K = K
        self.h = gamma / 2.0
        self.mh = mp.mpf(gamma) / 2

    def target(self, u):
        return mp.mpf(0) if u == 0 else mp.power(u, self.mh)

    def solve(self, ref: Sequence[float]):
        """Levelled system in the shifted Chebyshev basis.

        Solved in double precision, then refined with residuals computed in
        extended precision (the basis keeps the system well conditioned).
        """
        m = self.K
        n = m + 2
        rows, rhs = [], []
        for i, u in enumerate(ref):
            uu = mp.mpf(u)
            t = 2 * uu - 1
            row = [mp.mpf(1)]
            if m >= 1:
                row.append(t)
            for _ in range(2, m + 1):
                row.append(2 * t * row[-1] - row[-2])
            row.append(mp.mpf(1 if i % 2 == 0 else -1))
            rows.append(row)
            rhs.append(self.target(uu))
        A = np.array([[float(v) for v in row] for row in rows])
        lu = scipy.linalg.lu_factor(A)
        x = [mp.mpf(v) for v in scipy.linalg.lu_solve(lu, np.array([float(v) for v in rhs]))]
        for _ in range(6):
            res = [rhs[i] - mp.fsum(a * b for a, b in zip(rows[i], x)) for i in range(n)]
            corr = scipy.linalg.lu_solve(lu, np.array([float(v) for v in res]))
            x = [a + mp.mpf(c) for a, c in zip(x, corr)]
            if np.max(np.abs(corr)) <= 1e-45 * max(1.0, float(max(abs(v) for v in x))):
                break
        return x[: m + 1], x[m + 1]

    def residual_mp(self, mono, u):
        uu = mp.mpf(u)
        return self.target(uu) - _horner(mono, uu)

    def polish(self, mono, u: float, lo: float, hi: float) -> float:
        """Newton on r'(u) = 0 in extended precision, kept inside [lo, hi]."""
        if u <= 0.0 or u >= 1.0:
            return u
        uu = mp.mpf(u)
        mh = self.mh
        for _ in range(6):
            _, dp, ddp = _horner_derivs(mono, uu)
            r1 = mh * mp.power(uu, mh - 1) - dp
            r2 = mh * (mh - 1) * mp.power(uu, mh - 2) - ddp
            if r2 == 0:
                break
            step = r1 / r2
            nxt = uu - step
            if not lo < nxt < hi:
                break
            uu = nxt
            if abs(step) <= mp.mpf(10) ** (-40) * max(mp.mpf(1e-30), abs(uu)):
                break
        return float(uu)

    def candidates(self, cf: np.ndarray, mono, polish: bool = True):
        """Local extrema of the residual: endpoints plus refined interior points."""
        h = self.h

        def r(u):
            return u ** h - cheb.chebval(2.0 * u - 1.0, cf)

        R = r(_GRID_U)
        dR = np.diff(R)
        turn = np.nonzero(dR[:-1] * dR[1:] < 0)[0] + 1
        interior = np.empty(0)
        if turn.size:
            sgn = np.sign(R[turn])
            lo_x, hi_x = _GRID_X[turn - 1], _GRID_X[turn + 1]
            xr = _golden_refine(lambda x: -sgn * r(x * x), lo_x, hi_x)
            interior = xr * xr
            if polish:
                interior = np.array([
                    self.polish(mono, float(u), float(lo * lo), float(hi * hi))
                    for u, lo, hi in zip(interior, lo_x, hi_x)
                ])
        pts = np.concatenate([[0.0], interior, [1.0]])
        pts = np.unique(pts)
        vals = [self.residual_mp(mono, u) for u in pts]
        grid_max = float(np.max(np.abs(R)))
        return pts, vals, grid_max

    @staticmethod
    def alternate(pts, vals, need: int):
        seq_u, seq_v = [], []
        for u, v in zip(pts, vals):
            if v == 0:
                continue
            if seq_v and (v > 0) == (seq_v[-1] > 0):
                if abs(v) > abs(seq_v[-1]):
                    seq_u[-1], seq_v[-1] = u, v
            else:
                seq_u.append(u)
                seq_v.append(v)
        while len(seq_u) > need:
            if abs(seq_v[0]) < abs(seq_v[-1]):
                seq_u.pop(0)
                seq_v.pop(0)
            else:
                seq_u.pop()
                seq_v.pop()
        return seq_u, seq_v

    def single_exchange(self, ref, mono, pts, vals):
        """Classical one-point exchange of the global extremum into ``ref``."""
        k = max(range(len(pts)), key=lambda i: abs(vals[i]))
        u_star, v_star = float(pts[k]), vals[k]
        ref = list(ref)
        ref_vals = [self.residual_mp(mono, u) for u in ref]
        same = lambda a, b: (a > 0) == (b > 0)
        pos = int(np.searchsorted(ref, u_star))
        if pos < len(ref) and ref[pos] == u_star:
            return ref
        if pos == 0:
            if same(ref_vals[0], v_star):
                ref[0] = u_star
            else:
                ref = [u_star] + ref[:-1]
        elif pos == len(ref):
            if same(ref_vals[-1], v_star):
                ref[-1] = u_star
            else:
                ref = ref[1:] + [u_star]
        else:
            if same(ref_vals[pos - 1], v_star):
                ref[pos - 1] = u_star
            else:
                ref[pos] = u_star
        return ref


def _measure(vals, grid_max: float, level: float):
    cand_max = float(max(abs(v) for v in vals))
    # the double-precision grid only guards against a missed extremum
    delta = cand_max if grid_max <= cand_max + 1e-14 else grid_max
    return delta, (delta - level) / level


def _exact_even(gamma: float, K: int) -> "PolyApprox":
    power = int(round(gamma)) // 2
    coeffs = tuple(mp.mpf(1) if k == power else mp.mpf(0) for k in range(K + 1))
    ch = _monomial_to_cheb(coeffs)
    return PolyApprox(gamma=float(gamma), K=K, coeffs=coeffs, delta=0.0,
                      alternation=(), levelled=0.0, iterations=0, _cheb=tuple(ch))


@functools.lru_cache(maxsize=512)
def best_poly_approx(gamma: float, K: int, tol: float = 1e-12, max_iter: int = 100) -> PolyApprox:
    """Minimax even polynomial of degree 2K for |x|**gamma on [-1, 1].

    Iterates the multi-point Remez exchange until
    (max |residual| - |levelled error|) / |levelled error| < tol.
    For even integer gamma <= 2K the exact representation is returned with
    delta = 0.

    Raises
    ------
    InvalidParameterError
        gamma <= 0, K < 1 or tol outside (0, 1e-6].
    ConvergenceError
        The exchange did not converge within ``max_iter`` iterations.
    """
    if not gamma > 0:
        raise InvalidParameterError(f"gamma must be positive, got {gamma}")
    if int(K) != K or K < 1:
        raise InvalidParameterError(f"K must be a positive integer, got {K}")
    if not 0 < tol <= 1e-6:
        raise InvalidParameterError(f"tol must lie in (0, 1e-6], got {tol}")
    gamma, K = float(gamma), int(K)
    if is_even_integer(gamma) and gamma <= 2 * K:
        with mp.workdps(WORK_DPS):
            return _exact_even(gamma, K)

    with mp.workdps(WORK_DPS):
        rz = _Remez(gamma, K)
        need = K + 2
        ref = [float((1 - np.cos(np.pi * i / (K + 1))) / 2) for i in range(need)]
        ref[0], ref[-1] = 0.0, 1.0
        ratio = np.inf
        pts, vals = ref, []
        for it in range(1, max_iter + 1):
            c, E = rz.solve(ref)
            level = float(abs(E))
            mono = _cheb_to_monomial(c)
            cf = np.array([float(v) for v in c])
            pts, vals, grid_max = rz.candidates(cf, mono, polish=False)
            delta, ratio = _measure(vals, grid_max, level)
            if ratio < 1e-6:
                # close to convergence: locate extrema in extended precision
                pts, vals, grid_max = rz.candidates(cf, mono, polish=True)
                delta, ratio = _measure(vals, grid_max, level)
            new_ref, _ = rz.alternate(pts, vals, need)
            if len(new_ref) < need:
                new_ref = rz.single_exchange(ref, mono, pts, vals)
            elif ratio < tol:
                return PolyApprox(
                    gamma=gamma, K=K, coeffs=tuple(mono), delta=delta,
                    alternation=tuple(float(u) for u in new_ref),
                    levelled=level, iterations=it, _cheb=tuple(cf))
            ref = [float(u) for u in new_ref]
        profile = [(float(u), float(v)) for u, v in zip(pts, vals)]
        raise ConvergenceError(
            f"Remez did not converge for gamma={gamma}, K={K} after {max_iter} "
            f"iterations (relative gap {ratio:.3e})", profile)


# --- evaluation -------------------------------------------------------------

def eval_poly(p: PolyApprox, x: float) -> float:
    """Evaluate P(x) by Horner in u = x**2 in extended precision."""
    with mp.workdps(WORK_DPS):
        u = mp.mpf(x) ** 2
        return float(_horner(p.coeffs, u))


def eval_poly_array(p: PolyApprox, x) -> np.ndarray:
    """Double-precision evaluation through the Chebyshev form; meant for grids."""
    u = np.asarray(x, dtype=float) ** 2
    return cheb.chebval(2.0 * u - 1.0, np.asarray(p._cheb))


def residual_array(p: PolyApprox, u) -> np.ndarray:
    """u**(gamma/2) - P(sqrt(u)) on an array of u in [0, 1]."""
    u = np.asarray(u, dtype=float)
    return u ** (p.gamma / 2.0) - cheb.chebval(2.0 * u - 1.0, np.asarray(p._cheb))


def alternation_set(p: PolyApprox) -> np.ndarray:
    """Equioscillation abscissae (u variable), strictly increasing."""
    if p.delta == 0.0:
        raise DegenerateApproximationError(
            f"|x|^{p.gamma} is represented exactly at K={p.K}; no alternation set")
    return np.array(p.alternation)
