import dataclasses
import math

import numpy as np
import pytest
from scipy import stats
from scipy.optimize import linprog

from nsfest.approx import best_poly_approx
from nsfest.core import InvalidParameterError, WrongRegimeError
from nsfest.priors import (
    PriorCertificationError,
    certify,
    chi_square_bound,
    chi_square_exact_small,
    matching_measures,
    moment,
    out_of_class_mass,
    prior_config,
    sample_prior,
)


def lp_gap(gamma, K, n=2001):
    """Independent oracle: largest |t|^gamma gap over grid measures with matched moments."""
    t = np.linspace(-1, 1, n)
    rows = [np.concatenate([t ** l, -(t ** l)]) for l in range(1, K + 1)]
    A_eq = np.array(rows + [np.r_[np.ones(n), np.zeros(n)], np.r_[np.zeros(n), np.ones(n)]])
    b_eq = np.r_[np.zeros(K), 1.0, 1.0]
    c = -np.r_[np.abs(t) ** gamma, -np.abs(t) ** gamma]
    res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return -res.fun


class TestPriorConfig:
    def test_examples(self):
        pc = prior_config(100, 20, 1.0)
        assert pc.Lambda == pytest.approx(1.1774, abs=1e-4)
        assert pc.K == 6
        assert prior_config(256, 256, 1.0).Lambda == pytest.approx(2.3548, abs=1e-4)
        pc = prior_config(256, 256, 0.37)
        assert pc.M == 0.37 * pc.Lambda

    @pytest.mark.parametrize("d,s", [(100, 20), (100, 40), (256, 256), (1000, 300), (50, 50)])
    def test_K_even_and_minimal(self, d, s):
        pc = prior_config(d, s, 1.0)
        bound = 1.5 * math.e * pc.Lambda ** 2
        assert pc.K % 2 == 0 and pc.K >= bound and pc.K - 2 < bound

    def test_wrong_regime(self):
        with pytest.raises(WrongRegimeError):
            prior_config(100, 19, 1.0)


class TestMatchingMeasures:
    def test_classical_pair(self):
        p = matching_measures(1.0, 2, 1.0)
        assert set(p.support0) | set(p.support1) <= {0.0, 0.5, -0.5, 1.0, -1.0}
        assert p.gap == pytest.approx(0.25, rel=1e-6)
        assert lp_gap(1.0, 2) == pytest.approx(0.25, abs=1e-6)

    @pytest.mark.parametrize("gamma,K", [(0.5, 2), (1.0, 4), (1.5, 4), (0.7, 6)])
    def test_gap_against_lp(self, gamma, K):
        p = matching_measures(gamma, K, 1.0)
        lp = lp_gap(gamma, K)
        # grid optimum can only be lower than the continuous one
        assert lp <= p.gap * (1 + 1e-7)
        assert lp == pytest.approx(p.gap, rel=2e-3)

    @pytest.mark.parametrize("gamma", [0.5, 1.0, 1.5])
    @pytest.mark.parametrize("K", [2, 6, 12, 24])
    def test_properties(self, gamma, K):
        M = 2.3
        p = matching_measures(gamma, K, M)
        for supp, w in ((p.support0, p.weights0), (p.support1, p.weights1)):
            assert sum(w) == pytest.approx(1, abs=1e-10)
            assert all(abs(t) <= M * (1 + 1e-15) for t in supp)
            table = dict(zip(supp, w))
            assert all(table[-t] == wt for t, wt in table.items())
        for l in range(K + 1):
            assert abs(moment(p.support1, p.weights1, l) - moment(p.support0, p.weights0, l)) <= 1e-8 * M ** l
        delta = best_poly_approx(gamma, K // 2).delta
        assert p.gap == pytest.approx(2 * M ** gamma * delta, rel=1e-6)

    def test_scaling(self):
        a = matching_measures(1.5, 8, 1.0)
        b = matching_measures(1.5, 8, 3.7)
        assert np.allclose(np.array(b.support1), 3.7 * np.array(a.support1), rtol=1e-8)
        assert np.allclose(np.array(b.support0), 3.7 * np.array(a.support0), rtol=1e-8)
        assert b.weights0 == pytest.approx(a.weights0, rel=1e-12)
        assert b.gap == pytest.approx(3.7 ** 1.5 * a.gap, rel=1e-8)

    @pytest.mark.parametrize("kw", [dict(gamma=1, K=3, M=1), dict(gamma=1, K=0, M=1),
                                    dict(gamma=1, K=2, M=0), dict(gamma=2, K=2, M=1),
                                    dict(gamma=4, K=6, M=1)])
    def test_invalid(self, kw):
        with pytest.raises(InvalidParameterError):
            matching_measures(**kw)

    def test_even_gamma_above_K(self):
        p = matching_measures(4.0, 2, 1.0)
        assert p.gap > 0

    def test_certify_detects_tampering(self):
        p = matching_measures(1.0, 4, 1.0)
        with pytest.raises(PriorCertificationError, match="moment"):
            w = list(p.weights1)
            w[0] += 1e-3
            w[-1] += 1e-3
            certify(dataclasses.replace(p, weights1=tuple(w)))
        with pytest.raises(PriorCertificationError, match="symmetric"):
            s = list(p.support1)
            s[0] *= 1.01
            certify(dataclasses.replace(p, support1=tuple(s)))
        with pytest.raises(PriorCertificationError, match="gap"):
            certify(dataclasses.replace(p, gap=p.gap * 1.001))


class TestChiSquare:
    @pytest.mark.parametrize("d,s", [(100, 20), (400, 40), (64, 64), (256, 256), (1000, 700), (4096, 4096)])
    def test_certificate(self, d, s):
        assert chi_square_bound(d, s, prior_config(d, s, 1.0)).bound < 0.25

    def test_monotone_in_K(self):
        pc = prior_config(100, 20, 1.0)
        vals = [chi_square_bound(100, 20, dataclasses.replace(pc, K=K)).bound for K in (2, 4, 6, 8, 12)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_small_lambda(self):
        pc = prior_config(100, 20, 1.0)
        tiny = dataclasses.replace(pc, Lambda=1e-3)
        assert chi_square_bound(100, 20, tiny).bound < 1e-30

    def test_series_against_direct_sum(self):
        pc = prior_config(100, 40, 1.0)
        lam2 = pc.Lambda ** 2
        direct = sum(lam2 ** k / math.factorial(k) for k in range(pc.K + 1, 150))
        assert chi_square_bound(100, 40, pc).per_coordinate == pytest.approx(direct, rel=1e-13)

    @pytest.mark.parametrize("gamma", [0.5, 1.0, 1.5])
    @pytest.mark.parametrize("d,s", [(100, 20), (64, 64), (256, 256)])
    def test_exact_below_ingredient(self, gamma, d, s):
        pc = prior_config(d, s, 0.8)
        prior = matching_measures(gamma, pc.K, pc.M)
        exact = chi_square_exact_small(d, s, prior, pc)
        ingredient = chi_square_bound(d, s, pc).per_coordinate
        assert 0 <= exact <= ingredient * (1 + 1e-6)

    def test_low_order_terms_vanish(self):
        pc = prior_config(100, 20, 1.0)
        prior = matching_measures(1.0, pc.K, pc.M)
        for k in range(pc.K + 1):
            e1 = float(moment(prior.support1, prior.weights1, k))
            e0 = float(moment(prior.support0, prior.weights0, k))
            assert (e1 - e0) ** 2 / math.factorial(k) <= 1e-16

    def test_unit_prior(self):
        # the classical pair on [-1, 1] read as a Lambda = 1 prior
        prior = matching_measures(1.0, 2, 1.0)
        pc = prior_config(100, 20, 1.0)
        pc = dataclasses.replace(pc, Lambda=1.0, M=1.0, K=2)
        exact = chi_square_exact_small(100, 20, prior, pc)
        assert 0 < exact <= chi_square_bound(100, 20, pc).per_coordinate


class TestSampling:
    def test_count_and_support(self):
        d, s = 200, 40
        pc = prior_config(d, s, 1.0)
        prior = matching_measures(1.0, pc.K, pc.M)
        counts = []
        for seed in range(2000):
            th = sample_prior(prior, d, s, seed % 2, seed)
            nz = th.values[th.values != 0]
            assert np.all(np.abs(nz) <= pc.M * (1 + 1e-12))
            counts.append(th.l0)
        counts = np.array(counts)
        # zero is an atom of mu_0, so its expected nonzero count is slightly below s/2
        ones = counts[1::2]
        assert abs(ones.mean() - s / 2) <= 3 * ones.std(ddof=1) / math.sqrt(ones.size)

    def test_determinism(self):
        prior = matching_measures(1.0, 4, 1.0)
        a = sample_prior(prior, 50, 10, 1, 3)
        assert np.array_equal(a.values, sample_prior(prior, 50, 10, 1, 3).values)
        with pytest.raises(InvalidParameterError):
            sample_prior(prior, 50, 10, 2, 3)


class TestOutOfClass:
    def test_examples(self):
        exact, bound = out_of_class_mass(100, 10)
        assert bound == pytest.approx(0.5353, abs=1e-4)
        assert exact <= bound
        assert out_of_class_mass(50, 50)[0] == 0.0

    @pytest.mark.parametrize("d,s", [(d, s) for d in (10, 50, 200, 1000, 5000)
                                     for s in (1, 3, int(math.sqrt(d)), d // 2)])
    def test_grid_against_scipy(self, d, s):
        exact, bound = out_of_class_mass(d, s)
        assert exact == pytest.approx(stats.binom.sf(s, d, s / (2 * d)), rel=1e-10, abs=1e-300)
        assert exact <= bound

    def test_domain(self):
        with pytest.raises(InvalidParameterError):
            out_of_class_mass(10, 11)
