"""Problem configuration, functionals, regimes, rate tables and data generation."""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

__all__ = [
    "InvalidParameterError",
    "WrongRegimeError",
    "ProblemConfig",
    "ThetaVector",
    "Regime",
    "Rate",
    "n_gamma",
    "big_n_gamma",
    "regime",
    "minimax_rate",
    "simulate_observations",
    "make_rng",
    "derive_key",
    "is_even_integer",
    "read_theta",
    "write_theta",
]

DEFAULT_C = 0.01


class InvalidParameterError(ValueError):
    """A parameter is outside the domain of the operation."""


class WrongRegimeError(ValueError):
    """The configuration is in the other (dense/sparse) regime."""


def is_even_integer(x: float) -> bool:
    return float(x).is_integer() and int(x) % 2 == 0


def _check_c(c: float) -> None:
    # constraints on the dense-zone constant used by the risk analysis
    if not (2 * c * math.log(6) <= 1 / 8):
        raise InvalidParameterError(f"c={c} violates 2*c*ln6 <= 1/8")
    if not (c * math.log(6) + c < 1 / 4):
        raise InvalidParameterError(f"c={c} violates c*ln6 + c < 1/4")
    if not (c * math.log(1 + 4 / c) < 1 / 8):
        raise InvalidParameterError(f"c={c} violates c*ln(1+4/c) < 1/8")


@dataclass(frozen=True)
class ProblemConfig:
    """One estimation problem: dimension, sparsity, noise level, exponent."""

    d: int
    s: int
    eps: float
    gamma: float
    c: float = DEFAULT_C

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise InvalidParameterError(f"d must be a positive integer, got {self.d}")
        if int(self.s) != self.s or not 1 <= self.s <= self.d:
            raise InvalidParameterError(f"s must satisfy 1 <= s <= d, got s={self.s}, d={self.d}")
        if not self.eps > 0:
            raise InvalidParameterError(f"eps must be positive, got {self.eps}")
        if not self.gamma > 0:
            raise InvalidParameterError(f"gamma must be positive, got {self.gamma}")
        if not self.c > 0:
            raise InvalidParameterError(f"c must be positive, got {self.c}")
        _check_c(self.c)
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "s", int(self.s))
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "c", float(self.c))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_text(self) -> str:
        return "".join(f"{k}={v!r}\n" for k, v in self.to_dict().items())

    @classmethod
    def from_mapping(cls, data) -> "ProblemConfig":
        unknown = set(data) - {"d", "s", "eps", "gamma", "c"}
        if unknown:
            raise InvalidParameterError(f"unknown config keys: {sorted(unknown)}")
        try:
            kwargs = dict(d=int(data["d"]), s=int(data["s"]),
                          eps=float(data["eps"]), gamma=float(data["gamma"]))
        except KeyError as exc:
            raise InvalidParameterError(f"missing config key {exc.args[0]!r}") from None
        if "c" in data:
            kwargs["c"] = float(data["c"])
        return cls(**kwargs)

    @classmethod
    def parse(cls, text: str) -> "ProblemConfig":
        """Parse either a JSON object or flat ``key=value`` lines."""
        stripped = text.strip()
        if stripped.startswith("{"):
            return cls.from_mapping(json.loads(stripped))
        data = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise InvalidParameterError(f"line {lineno}: expected key=value, got {line!r}")
            data[key.strip()] = value.strip()
        return cls.from_mapping(data)


@dataclass(frozen=True, eq=False)
class ThetaVector:
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float).ravel()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return self.values.shape[0]

    @property
    def l0(self) -> int:
        return int(np.count_nonzero(self.values))

    def in_class(self, s: int) -> bool:
        """Membership in the class of s-sparse vectors."""
        return self.l0 <= s

    def check_dim(self, cfg: ProblemConfig) -> None:
        if len(self) != cfg.d:
            raise InvalidParameterError(f"theta has length {len(self)}, config has d={cfg.d}")


ArrayLike = Union[ThetaVector, Sequence[float], np.ndarray]


def _values(theta: ArrayLike) -> np.ndarray:
    if isinstance(theta, ThetaVector):
        return theta.values
    return np.asarray(theta, dtype=float).ravel()


def big_n_gamma(theta: ArrayLike, gamma: float) -> float:
    """Sum of |theta_i|**gamma."""
    if not gamma > 0:
        raise InvalidParameterError(f"gamma must be positive, got {gamma}")
    return float(np.sum(np.abs(_values(theta)) ** gamma))


def n_gamma(theta: ArrayLike, gamma: float) -> float:
    """The functional itself for gamma <= 1, the l_gamma norm for gamma > 1."""
    total = big_n_gamma(theta, gamma)
    if gamma <= 1:
        return total
    return total ** (1.0 / gamma)


class Regime(enum.Enum):
    DENSE = "Dense"
    SPARSE = "Sparse"


def regime(cfg: ProblemConfig) -> Regime:
    # s**2 == 4d resolves to Dense
    return Regime.DENSE if cfg.s * cfg.s >= 4 * cfg.d else Regime.SPARSE


@dataclass(frozen=True)
class Rate:
    """A minimax rate with unit constant.

    ``value`` is the single reference value used for ratios. In the bracketed
    case (dense, gamma > 1 not even) ``lower`` and ``upper`` carry the two
    endpoints and ``value`` equals ``upper``.
    """

    label: str
    value: float
    lower: Optional[float] = None
    upper: Optional[float] = None

    @property
    def bracketed(self) -> bool:
        return self.lower is not None


def minimax_rate(cfg: ProblemConfig) -> Rate:
    """Bare minimax-rate expression (constant 1) for the configuration.

    The split here is s <= sqrt(d) versus s > sqrt(d), which is the split the
    rate expressions are stated for; the estimator selection uses s**2 >= 4d.
    """
    d, s, eps, g = cfg.d, cfg.s, cfg.eps, cfg.gamma
    low_sparsity = s * s <= d
    if g <= 1:
        if low_sparsity:
            return Rate("gamma<=1, s<=sqrt(d)",
                        eps ** (2 * g) * s * s * math.log1p(d / s ** 2) ** g)
        return Rate("gamma<=1, s>sqrt(d)",
                    eps ** (2 * g) * s * s * math.log1p(s ** 2 / d) ** (-g))
    if low_sparsity:
        return Rate("gamma>1, s<=sqrt(d)",
                    eps ** 2 * s ** (2 / g) * math.log1p(d / s ** 2))
    if is_even_integer(g):
        return Rate("gamma even, s>sqrt(d)", eps ** 2 * d ** (1 / g))
    lg = math.log1p(s ** 2 / d)
    lower = eps ** 2 * s ** (2 / g) * lg ** (1 - 2 * g)
    upper = eps ** 2 * s ** (2 / g) / lg
    return Rate("gamma>1 not even, s>sqrt(d)", upper, lower=lower, upper=upper)


# --- random generation -----------------------------------------------------
#
# Every random stream is a numpy Philox4x64 counter-based generator whose
# 128-bit key is the BLAKE2b-128 digest of the '/'-joined decimal/str parts
# (for example "17/observations"). Draws are then bit-reproducible for a
# given numpy version on every platform.

def derive_key(*parts) -> int:
    text = "/".join(str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=16).digest(), "little")


def make_rng(seed: int, *stream) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=derive_key(int(seed), *stream)))


def simulate_observations(theta: ArrayLike, eps: float, seed: int) -> np.ndarray:
    """Draw y = theta + eps * xi with xi i.i.d. standard normal."""
    if not eps > 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    th = _values(theta)
    noise = make_rng(seed, "observations").standard_normal(th.shape[0])
    return th + eps * noise


# --- theta file format -----------------------------------------------------

def read_theta(path: Union[str, Path]) -> ThetaVector:
    """Read one decimal float per line (UTF-8)."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    values = []
    for lineno, line in enumerate(lines, start=1):
        try:
            values.append(float(line.strip()))
        except ValueError:
            raise InvalidParameterError(f"{path}:{lineno}: cannot parse {line!r} as a float") from None
    return ThetaVector(np.array(values))


def write_theta(path: Union[str, Path], theta: Union[ArrayLike, Iterable[float]]) -> None:
    vals = _values(theta)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in vals:
            fh.write(f"{float(v)!r}\n")
