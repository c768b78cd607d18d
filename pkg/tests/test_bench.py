import json
import math

import numpy as np
import pytest
from scipy import integrate

from nsfest.bench import (
    CSV_HEADER,
    PROFILES,
    ExperimentSpec,
    InsufficientGridError,
    RiskReport,
    emit,
    rate_check,
    replicate_seed,
    run_risk_experiment,
    theta_profile,
)
from nsfest.core import InvalidParameterError, ProblemConfig
from nsfest.special import alpha_gamma, sparse_threshold


class TestProfiles:
    def test_examples(self):
        cfg = ProblemConfig(100, 5, 1.0, 1.0)
        assert theta_profile("zero", cfg).l0 == 0
        th = theta_profile("spikes-at-threshold", cfg).values
        assert th[:5] == pytest.approx([1.7941] * 5, abs=1e-4) and np.all(th[5:] == 0)
        big = theta_profile("spikes-large", cfg).values
        assert big[0] == pytest.approx(10 * math.sqrt(math.log(100)))

    @pytest.mark.parametrize("profile", PROFILES)
    @pytest.mark.parametrize("d,s,g", [(64, 64, 1.0), (100, 30, 1.5), (256, 40, 0.5)])
    def test_in_class(self, profile, d, s, g):
        cfg = ProblemConfig(d, s, 0.5, g)
        th = theta_profile(profile, cfg, seed=7)
        assert len(th) == d and th.in_class(s)
        assert np.array_equal(th.values, theta_profile(profile, cfg, seed=7).values)

    def test_unknown(self):
        with pytest.raises(InvalidParameterError):
            theta_profile("spikes-huge", ProblemConfig(10, 2, 1, 1))


def small_spec(**kw):
    base = dict(grid=(ProblemConfig(100, 5, 1.0, 1.0), ProblemConfig(64, 64, 1.0, 1.5)),
                estimators=("auto",), theta_profiles=("zero", "spikes-at-threshold"),
                replicates=50, seed=3)
    base.update(kw)
    return ExperimentSpec(**base)


class TestExperiment:
    def test_noiseless_even(self):
        spec = ExperimentSpec(grid=(ProblemConfig(50, 20, 1e-12, 2.0),), estimators=("even",),
                              theta_profiles=("zero", "spikes-at-threshold", "spikes-large"),
                              replicates=20, target="functional")
        rep = run_risk_experiment(spec)
        assert all(r.mse <= 1e-18 for r in rep.rows)

    def test_sparse_zero_profile_variance(self):
        d, s, eps = 100, 5, 1.0
        a = alpha_gamma(1.0, d, s)
        x = sparse_threshold(d, s)
        phi = lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi)
        var1 = 2 * integrate.quad(lambda t: (t - a) ** 2 * phi(t), x, np.inf)[0]
        spec = ExperimentSpec(grid=(ProblemConfig(d, s, eps, 1.0),), estimators=("sparse",),
                              theta_profiles=("zero",), replicates=4000, seed=1, target="functional")
        row = run_risk_experiment(spec).rows[0]
        assert abs(row.mse - d * var1) <= 3 * row.se

    def test_se_scaling(self):
        spec = ExperimentSpec(grid=(ProblemConfig(100, 5, 1.0, 1.0),), estimators=("sparse",),
                              theta_profiles=("spikes-at-threshold",), replicates=1000, seed=2)
        se = {n: run_risk_experiment(ExperimentSpec(spec.grid, spec.estimators, spec.theta_profiles,
                                                    n, spec.seed)).rows[0].se for n in (1000, 2000, 4000)}
        assert se[2000] / se[1000] == pytest.approx(1 / math.sqrt(2), rel=0.3)
        assert se[4000] / se[1000] == pytest.approx(0.5, rel=0.3)

    def test_row_count_and_summary(self):
        spec = small_spec(estimators=("auto", "sparse"))
        rep = run_risk_experiment(spec)
        # sparse is skipped on the dense configuration
        assert len(rep.rows) == 2 * 2 * 3 - 3
        assert len(rep.skipped) == 1 and rep.skipped[0]["estimator"] == "sparse"
        for r in rep.rows:
            if r.profile == "max":
                others = [o for o in rep.rows if o.config == r.config and o.estimator == r.estimator
                          and o.profile not in ("max", "zero")]
                assert r.mse == max(o.mse for o in others)

    def test_worker_count_independent(self):
        a = run_risk_experiment(small_spec(workers=1))
        b = run_risk_experiment(small_spec(workers=2))
        assert a.rows == b.rows

    def test_adding_profile_keeps_rows(self):
        a = run_risk_experiment(small_spec(theta_profiles=("spikes-at-threshold",)))
        b = run_risk_experiment(small_spec(theta_profiles=("zero", "spikes-at-threshold", "spikes-large")))
        pick = lambda rep: [r for r in rep.rows if r.profile == "spikes-at-threshold"]
        assert pick(a) == pick(b)

    def test_replicate_seeds(self):
        seeds = {replicate_seed(0, i, "auto", "zero", r) for i in range(3) for r in range(100)}
        assert len(seeds) == 300 and all(0 <= s < 2 ** 63 for s in seeds)

    def test_functional_rate_is_undefined_above_one(self):
        rep = run_risk_experiment(small_spec(target="functional"))
        for r in rep.rows:
            assert math.isnan(r.rate) == (r.config.gamma > 1)

    @pytest.mark.parametrize("kw", [dict(replicates=1), dict(estimators=("magic",)),
                                    dict(theta_profiles=("flat",)), dict(target="both"), dict(workers=0)])
    def test_invalid_spec(self, kw):
        with pytest.raises(InvalidParameterError):
            small_spec(**kw)

    def test_spec_from_json(self):
        text = json.dumps({"grid": [{"d": 100, "s": 5, "eps": 1, "gamma": 1}], "replicates": 10,
                           "estimators": ["sparse"], "theta_profiles": ["zero"]})
        spec = ExperimentSpec.from_json(text)
        assert spec.grid[0] == ProblemConfig(100, 5, 1.0, 1.0) and spec.replicates == 10
        with pytest.raises(InvalidParameterError):
            ExperimentSpec.from_json(json.dumps({"grid": [], "extra": 1}))


class TestRateCheck:
    def test_insufficient(self):
        with pytest.raises(InsufficientGridError):
            rate_check(run_risk_experiment(small_spec()))

    def test_sparse_grid_passes(self):
        grid = [ProblemConfig(d, math.ceil(d ** 0.25), 1.0, 1.0) for d in (256, 512, 1024, 2048)]
        spec = ExperimentSpec(grid=grid, estimators=("sparse",),
                              theta_profiles=("zero", "spikes-at-threshold", "spikes-large"),
                              replicates=200, seed=4)
        check = rate_check(run_risk_experiment(spec))
        assert check.passed and list(check.spreads) == ["SparseThreshold/Sparse/gamma=1"]
        assert check.spreads["SparseThreshold/Sparse/gamma=1"] <= 10

    def test_zero_rows_excluded(self):
        grid = [ProblemConfig(d, math.ceil(d ** 0.25), 1.0, 1.0) for d in (256, 512, 1024, 2048)]
        spec = ExperimentSpec(grid=grid, estimators=("sparse",), theta_profiles=("zero", "spikes-large"),
                              replicates=50, seed=4)
        rep = run_risk_experiment(spec)
        check = rate_check(rep)
        large = [r.ratio for r in rep.rows if r.profile == "spikes-large"]
        assert check.ratios["SparseThreshold/Sparse/gamma=1"] == large


class TestEmit:
    def test_empty_report(self, tmp_path):
        p = tmp_path / "empty.csv"
        emit(RiskReport(), p)
        assert p.read_bytes() == (",".join(CSV_HEADER) + "\n").encode()

    def test_byte_identical_and_format(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        emit(run_risk_experiment(small_spec()), a)
        emit(run_risk_experiment(small_spec()), b)
        raw = a.read_bytes()
        assert raw == b.read_bytes() and b"\r" not in raw
        lines = raw.decode().splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        mse = [float(line.split(",")[10]) for line in lines[1:]]
        rep = run_risk_experiment(small_spec())
        assert mse == [r.mse for r in rep.rows]

    def test_json(self, tmp_path):
        p = tmp_path / "r.json"
        emit(run_risk_experiment(small_spec(target="functional")), p, "json")
        obj = json.loads(p.read_text())
        assert set(obj["rows"][0]) == set(CSV_HEADER)
        assert any(r["rate"] is None for r in obj["rows"])

    def test_errors(self, tmp_path):
        with pytest.raises(InvalidParameterError):
            emit(RiskReport(), tmp_path / "x", "xml")
        with pytest.raises(OSError, match="missing"):
            emit(RiskReport(), tmp_path / "missing" / "x.csv")
