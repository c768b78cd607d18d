"""Command-line interface: estimate, priors, simulate, rates."""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from typing import List, Optional

from .bench import (
    ESTIMATORS,
    PROFILES,
    ExperimentSpec,
    InsufficientGridError,
    emit,
    rate_check,
    run_risk_experiment,
)
from .core import DEFAULT_C, InvalidParameterError, ProblemConfig, minimax_rate, read_theta, regime
from .estimators import estimate
from .priors import chi_square_bound, matching_measures, out_of_class_mass, prior_config

EXIT_FAIL = 2
EXIT_ERROR = 1


def _floats(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _pairs(text: str):
    out = []
    for item in text.split(","):
        d, _, s = item.partition(":")
        if not s:
            raise argparse.ArgumentTypeError(f"expected d:s, got {item!r}")
        out.append((int(d), int(s)))
    return out


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def cmd_estimate(args) -> int:
    cfg = ProblemConfig(args.d, args.s, args.eps, args.gamma, args.c)
    theta = read_theta(args.data)
    theta.check_dim(cfg)
    res = estimate(theta.values, cfg, args.seed, estimator=args.estimator, norm=args.norm)
    print(_dump(res.to_dict()))
    return 0


def cmd_priors(args) -> int:
    pc = prior_config(args.d, args.s, args.eps)
    prior = matching_measures(args.gamma, pc.K, pc.M)
    chi = chi_square_bound(args.d, args.s, pc)
    exact, bound = out_of_class_mass(args.d, args.s)
    out = {
        "Lambda": pc.Lambda,
        "M": pc.M,
        "K": pc.K,
        "mu0": {"support": list(prior.support0), "weights": list(prior.weights0)},
        "mu1": {"support": list(prior.support1), "weights": list(prior.weights1)},
        "gap": prior.gap,
        "chi2_bound": chi.bound,
        "out_of_class": {"exact": exact, "bound": bound},
    }
    print(_dump(out))
    return 0


def _inline_spec(args) -> ExperimentSpec:
    if not args.pairs:
        raise InvalidParameterError("give --spec or --pairs")
    grid = [ProblemConfig(d, s, eps, g, args.c)
            for (d, s), eps, g in itertools.product(args.pairs, args.eps, args.gamma)]
    return ExperimentSpec(grid=grid, estimators=args.estimators, theta_profiles=args.profiles,
                          replicates=args.replicates, seed=args.seed, target=args.target,
                          workers=args.workers)


def cmd_simulate(args) -> int:
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            spec = ExperimentSpec.from_json(fh.read())
        if args.workers != 1:
            spec = ExperimentSpec(spec.grid, spec.estimators, spec.theta_profiles,
                                  spec.replicates, spec.seed, spec.target, args.workers)
    else:
        spec = _inline_spec(args)
    report = run_risk_experiment(spec)
    if args.out:
        emit(report, args.out, args.format)
    if not args.check:
        return 0
    try:
        check = rate_check(report)
    except InsufficientGridError as exc:
        print(f"rate check: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for fam, spread in sorted(check.spreads.items()):
        print(f"{fam}: spread {spread:.4g}")
    print("PASS" if check.passed else "FAIL")
    return 0 if check.passed else EXIT_FAIL


def cmd_rates(args) -> int:
    print("d,s,eps,gamma,regime,case,rate,lower,upper")
    for d, s in args.pairs:
        for eps, g in itertools.product(args.eps, args.gamma):
            cfg = ProblemConfig(d, s, eps, g)
            r = minimax_rate(cfg)
            lo = "" if r.lower is None else repr(r.lower)
            hi = "" if r.upper is None else repr(r.upper)
            print(f"{d},{s},{eps!r},{g!r},{regime(cfg).value},\"{r.label}\",{r.value!r},{lo},{hi}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nsfest", description="Estimate sum |theta_i|^gamma in the sparse normal means model.")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="estimate the functional from observations")
    e.add_argument("--data", required=True, help="observations, one float per line")
    e.add_argument("--d", type=int, required=True)
    e.add_argument("--s", type=int, required=True)
    e.add_argument("--eps", type=float, required=True)
    e.add_argument("--gamma", type=float, required=True)
    e.add_argument("--c", type=float, default=DEFAULT_C)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--estimator", choices=ESTIMATORS, default="auto")
    e.add_argument("--norm", action="store_true", help="also report |value|^(1/gamma)")
    e.set_defaults(func=cmd_estimate)

    q = sub.add_parser("priors", help="moment-matching priors and their certificates")
    q.add_argument("--d", type=int, required=True)
    q.add_argument("--s", type=int, required=True)
    q.add_argument("--eps", type=float, required=True)
    q.add_argument("--gamma", type=float, required=True)
    q.set_defaults(func=cmd_priors)

    m = sub.add_parser("simulate", help="Monte Carlo risk experiment")
    m.add_argument("--spec", help="JSON experiment spec")
    m.add_argument("--pairs", type=_pairs, help="grid of d:s pairs, comma separated")
    m.add_argument("--eps", type=_floats, default=[1.0])
    m.add_argument("--gamma", type=_floats, default=[1.0])
    m.add_argument("--c", type=float, default=DEFAULT_C)
    m.add_argument("--estimators", type=lambda t: t.split(","), default=["auto"])
    m.add_argument("--profiles", type=lambda t: t.split(","), default=list(PROFILES))
    m.add_argument("--replicates", type=int, default=200)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--target", choices=("functional", "norm"), default="norm")
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--out", help="output path")
    m.add_argument("--format", choices=("csv", "json"), default="csv")
    m.add_argument("--check", action="store_true", help="run the rate check; exit 2 on FAIL")
    m.set_defaults(func=cmd_simulate)

    r = sub.add_parser("rates", help="print the minimax rate table")
    r.add_argument("--pairs", type=_pairs, required=True, help="d:s pairs, comma separated")
    r.add_argument("--eps", type=_floats, default=[1.0])
    r.add_argument("--gamma", type=_floats, default=[1.0])
    r.set_defaults(func=cmd_rates)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
