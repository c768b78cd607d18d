"""Monte Carlo risk experiments and comparison with the minimax rate table.

Per-replicate seeds are the top 63 bits of BLAKE2b-128 over
"<seed>/<config index>/<estimator>/<profile>/<replicate>", so adding a
profile or an estimator never changes the draws of other rows. Work is split
into (config, estimator, profile) cells; each cell is computed in full by one
worker, so the output does not depend on the number of workers.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .core import (
    InvalidParameterError,
    ProblemConfig,
    Regime,
    ThetaVector,
    big_n_gamma,
    derive_key,
    is_even_integer,
    minimax_rate,
    n_gamma,
    regime,
    simulate_observations,
)
from .estimators import EstimatorId, estimate
from .priors import matching_measures, prior_config, sample_prior
from .special import sparse_threshold

__all__ = [
    "PROFILES",
    "ESTIMATORS",
    "CSV_HEADER",
    "ExperimentSpec",
    "RiskRow",
    "RiskReport",
    "RateCheck",
    "InsufficientGridError",
    "theta_profile",
    "resolve_estimator",
    "replicate_seed",
    "run_risk_experiment",
    "rate_check",
    "emit",
]

log = logging.getLogger(__name__)

PROFILES = ("zero", "spikes-at-threshold", "spikes-large", "prior-draw")
ESTIMATORS = ("auto", "dense", "even", "sparse")
TARGETS = ("functional", "norm")
SUMMARY = "max"
CSV_HEADER = ("d", "s", "eps", "gamma", "c", "estimator", "profile", "target",
              "replicates", "seed", "mse", "se", "rate", "ratio")
PASS_SPREAD = 10.0


class InsufficientGridError(ValueError):
    """The report does not vary (d, s) enough to judge rate boundedness."""


class ProfileUnavailable(ValueError):
    """The profile cannot be built for this configuration."""


@dataclass(frozen=True)
class ExperimentSpec:
    grid: Tuple[ProblemConfig, ...]
    estimators: Tuple[str, ...] = ("auto",)
    theta_profiles: Tuple[str, ...] = PROFILES
    replicates: int = 200
    seed: int = 0
    target: str = "norm"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(self.grid))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "theta_profiles", tuple(self.theta_profiles))
        for e in self.estimators:
            if e not in ESTIMATORS:
                raise InvalidParameterError(f"unknown estimator {e!r}; choose from {ESTIMATORS}")
        for p in self.theta_profiles:
            if p not in PROFILES:
                raise InvalidParameterError(f"unknown profile {p!r}; choose from {PROFILES}")
        if self.target not in TARGETS:
            raise InvalidParameterError(f"target must be one of {TARGETS}, got {self.target!r}")
        if int(self.replicates) != self.replicates or self.replicates < 2:
            raise InvalidParameterError(f"replicates must be an integer >= 2, got {self.replicates}")
        if self.workers < 1:
            raise InvalidParameterError(f"workers must be >= 1, got {self.workers}")

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentSpec":
        data = dict(data)
        try:
            grid = tuple(ProblemConfig.from_mapping(g) for g in data.pop("grid"))
        except KeyError:
            raise InvalidParameterError("experiment spec needs a 'grid' list") from None
        allowed = {"estimators", "theta_profiles", "replicates", "seed", "target", "workers"}
        unknown = set(data) - allowed
        if unknown:
            raise InvalidParameterError(f"unknown spec keys: {sorted(unknown)}")
        return cls(grid=grid, **data)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        return cls.from_mapping(json.loads(text))


@dataclass(frozen=True)
class RiskRow:
    config: ProblemConfig
    estimator: str
    estimator_id: str
    profile: str
    target: str
    replicates: int
    seed: int
    mse: float
    se: float
    rate: float
    ratio: float

    @property
    def regime(self) -> Regime:
        return regime(self.config)

    def csv_fields(self) -> list:
        c = self.config
        return [c.d, c.s, c.eps, c.gamma, c.c, self.estimator_id, self.profile, self.target,
                self.replicates, self.seed, self.mse, self.se, self.rate, self.ratio]


@dataclass
class RiskReport:
    rows: List[RiskRow] = field(default_factory=list)
    skipped: List[dict] = field(default_factory=list)


# --- profiles ---------------------------------------------------------------

def _prior_draw(cfg: ProblemConfig, seed: int) -> np.ndarray:
    if regime(cfg) is not Regime.DENSE:
        raise ProfileUnavailable("prior-draw is defined for s^2 >= 4d only")
    pc = prior_config(cfg.d, cfg.s, cfg.eps)
    if is_even_integer(cfg.gamma) and cfg.gamma <= pc.K:
        raise ProfileUnavailable(f"no separating prior for even gamma={cfg.gamma} at K={pc.K}")
    prior = matching_measures(cfg.gamma, pc.K, pc.M)
    # redraw until the vector is s-sparse; the attempt index is part of the stream
    for attempt in range(1000):
        th = sample_prior(prior, cfg.d, cfg.s, 1, derive_key(seed, "prior-draw", attempt) >> 65)
        if th.in_class(cfg.s):
            return th.values
    raise ProfileUnavailable("could not draw an s-sparse vector from the prior")


def theta_profile(profile: str, cfg: ProblemConfig, seed: int = 0) -> ThetaVector:
    """Deterministic s-sparse test vector; nonzero entries occupy the first slots."""
    d, s, eps = cfg.d, cfg.s, cfg.eps
    theta = np.zeros(d)
    if profile == "zero":
        pass
    elif profile == "spikes-at-threshold":
        theta[:s] = eps * sparse_threshold(d, s)
    elif profile == "spikes-large":
        theta[:s] = 10.0 * eps * math.sqrt(math.log(d))
    elif profile == "prior-draw":
        theta = _prior_draw(cfg, seed)
    else:
        raise InvalidParameterError(f"unknown profile {profile!r}; choose from {PROFILES}")
    return ThetaVector(theta)


# --- running ----------------------------------------------------------------

def resolve_estimator(name: str, cfg: ProblemConfig) -> EstimatorId:
    """Which estimator ``name`` runs on ``cfg``; raises when preconditions fail."""
    dense = regime(cfg) is Regime.DENSE
    if name == "auto":
        if not dense:
            return EstimatorId.SPARSE_THRESHOLD
        return EstimatorId.EVEN_CLONE if is_even_integer(cfg.gamma) else EstimatorId.DENSE_BLOCK
    if name == "dense":
        if not dense:
            raise InvalidParameterError("dense estimator needs s^2 >= 4d")
        return EstimatorId.DENSE_BLOCK
    if name == "even":
        if not float(cfg.gamma).is_integer():
            raise InvalidParameterError("cloning estimator needs an integer gamma")
        return EstimatorId.EVEN_CLONE
    if name == "sparse":
        if dense:
            raise InvalidParameterError("sparse estimator needs s^2 < 4d")
        return EstimatorId.SPARSE_THRESHOLD
    raise InvalidParameterError(f"unknown estimator {name!r}")


def replicate_seed(seed: int, config_index: int, estimator: str, profile: str, replicate: int) -> int:
    return derive_key(seed, config_index, estimator, profile, replicate) >> 65


def _cell(args) -> np.ndarray:
    cfg, theta, truth, index, est, profile, spec_seed, reps, target = args
    errs = np.empty(reps)
    norm = target == "norm"
    for r in range(reps):
        sub = replicate_seed(spec_seed, index, est, profile, r)
        y = simulate_observations(theta, cfg.eps, sub)
        res = estimate(y, cfg, sub, estimator=est, norm=norm)
        value = res.n_gamma_estimate if norm else res.value
        errs[r] = (value - truth) ** 2
    return errs


def _rate(cfg: ProblemConfig, target: str) -> float:
    # the rate table is stated for n_gamma; it also covers N_gamma when gamma <= 1
    if target == "functional" and cfg.gamma > 1:
        return math.nan
    return minimax_rate(cfg).value


def run_risk_experiment(spec: ExperimentSpec) -> RiskReport:
    report = RiskReport()
    jobs, keys = [], []
    for index, cfg in enumerate(spec.grid):
        for est in spec.estimators:
            try:
                est_id = resolve_estimator(est, cfg)
            except InvalidParameterError as exc:
                _skip(report, index, cfg, est, "*", str(exc))
                continue
            for profile in spec.theta_profiles:
                try:
                    theta = theta_profile(profile, cfg, seed=derive_key(spec.seed, index, "theta") >> 65)
                except ProfileUnavailable as exc:
                    _skip(report, index, cfg, est, profile, str(exc))
                    continue
                truth = n_gamma(theta, cfg.gamma) if spec.target == "norm" else big_n_gamma(theta, cfg.gamma)
                jobs.append((cfg, theta.values, truth, index, est, profile, spec.seed,
                             int(spec.replicates), spec.target))
                keys.append((index, cfg, est, est_id, profile))

    if spec.workers == 1 or len(jobs) <= 1:
        results = [_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_cell, jobs))

    # jobs are ordered by (config, estimator, profile); keep that order
    groups: Dict[Tuple[int, str], List[RiskRow]] = {}
    for (index, cfg, est, est_id, profile), errs in zip(keys, results):
        n = errs.shape[0]
        mse = float(np.mean(errs))
        se = float(np.std(errs, ddof=1) / math.sqrt(n))
        rate = _rate(cfg, spec.target)
        groups.setdefault((index, est), []).append(
            RiskRow(cfg, est, est_id.value, profile, spec.target, n, spec.seed,
                    mse, se, rate, mse / rate))
    for rows in groups.values():
        report.rows.extend(rows)
        report.rows.append(_summary(rows))
    return report


def _summary(rows: List[RiskRow]) -> RiskRow:
    # the zero vector is dominated; it only counts when nothing else ran
    pool = [r for r in rows if r.profile != "zero"] or rows
    top = max(pool, key=lambda r: r.mse)
    return RiskRow(top.config, top.estimator, top.estimator_id, SUMMARY, top.target,
                   top.replicates, top.seed, top.mse, top.se, top.rate, top.ratio)


def _skip(report: RiskReport, index: int, cfg: ProblemConfig, est: str, profile: str, reason: str):
    log.warning("skipping config %d (d=%d, s=%d, gamma=%g) estimator=%s profile=%s: %s",
                index, cfg.d, cfg.s, cfg.gamma, est, profile, reason)
    report.skipped.append({"config_index": index, "estimator": est, "profile": profile, "reason": reason})


# --- rate check ---------------------------------------------------------------

@dataclass(frozen=True)
class RateCheck:
    passed: bool
    spreads: Dict[str, float]
    ratios: Dict[str, List[float]]
    threshold: float = PASS_SPREAD

    def to_dict(self) -> dict:
        return {"passed": self.passed, "threshold": self.threshold,
                "spreads": self.spreads, "ratios": self.ratios}


def rate_check(report: RiskReport, min_points: int = 4, threshold: float = PASS_SPREAD) -> RateCheck:
    """Spread max/min of (max-over-profiles MSE) / rate within each family.

    Families are (estimator, regime, gamma). Every regime present must have
    at least ``min_points`` distinct configurations.
    """
    rows = [r for r in report.rows if r.profile == SUMMARY and math.isfinite(r.ratio)]
    per_regime: Dict[Regime, set] = {}
    for r in rows:
        per_regime.setdefault(r.regime, set()).add(r.config)
    if not per_regime:
        raise InsufficientGridError("report has no summary rows with a finite rate")
    for reg, cfgs in per_regime.items():
        if len(cfgs) < min_points:
            raise InsufficientGridError(
                f"{reg.value} regime has {len(cfgs)} grid points, need at least {min_points}")
    fams: Dict[str, List[float]] = {}
    for r in rows:
        key = f"{r.estimator_id}/{r.regime.value}/gamma={r.config.gamma:g}"
        fams.setdefault(key, []).append(r.ratio)
    spreads = {}
    for key, vals in fams.items():
        lo, hi = min(vals), max(vals)
        spreads[key] = hi / lo if lo > 0 else math.inf
    passed = all(v <= threshold for v in spreads.values())
    return RateCheck(passed, spreads, fams, threshold)


# --- output -----------------------------------------------------------------

def _fmt(x) -> str:
    # repr gives the shortest decimal string that round-trips
    return repr(float(x)) if isinstance(x, float) else str(x)


def report_csv(report: RiskReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in report.rows:
        w.writerow([_fmt(v) for v in r.csv_fields()])
    return buf.getvalue()


def report_json(report: RiskReport) -> str:
    def clean(x):
        return None if isinstance(x, float) and not math.isfinite(x) else x

    rows = [{k: clean(v) for k, v in zip(CSV_HEADER, r.csv_fields())} for r in report.rows]
    return json.dumps({"rows": rows, "skipped": report.skipped}, indent=2) + "\n"


def emit(report: RiskReport, path, format: str = "csv") -> None:
    if format == "csv":
        text = report_csv(report)
    elif format == "json":
        text = report_json(report)
    else:
        raise InvalidParameterError(f"format must be csv or json, got {format!r}")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc
