import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from nsfest.core import InvalidParameterError
from nsfest.special import (
    CrossCheckError,
    alpha_gamma,
    gaussian_two_sided_tail,
    sparse_threshold,
    truncated_abs_moment,
    truncated_abs_moment_quad,
    upper_incomplete_gamma,
)
from scipy import special as sps


def phi(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


class TestTail:
    def test_examples(self):
        assert gaussian_two_sided_tail(0.0) == 1.0
        assert gaussian_two_sided_tail(1.959963985) == pytest.approx(0.05, abs=1e-9)
        assert gaussian_two_sided_tail(3.0) == pytest.approx(0.0026997961, abs=1e-9)

    @pytest.mark.parametrize("x", [0.1, 1.0, 5.0, 10.0, 20.0, 30.0])
    def test_relative_accuracy(self, x):
        # independent oracle: survival function in log space
        ref = 2 * math.exp(stats.norm.logsf(x))
        assert gaussian_two_sided_tail(x) == pytest.approx(ref, rel=1e-12)

    def test_negative(self):
        with pytest.raises(InvalidParameterError):
            gaussian_two_sided_tail(-1.0)


class TestIncompleteGamma:
    @pytest.mark.parametrize("a", [0.75, 1.0, 1.5, 2.0, 3.5])
    @pytest.mark.parametrize("z", [0.0, 0.1, 1.0, 2.5, 8.0, 50.0, 300.0])
    def test_against_scipy(self, a, z):
        ref = sps.gammaincc(a, z) * math.gamma(a)
        got = upper_incomplete_gamma(a, z)
        if ref == 0:
            assert got < 1e-120
        else:
            assert got == pytest.approx(ref, rel=1e-12)


class TestTruncatedMoment:
    def test_examples(self):
        assert truncated_abs_moment(2, 0) == pytest.approx(1, rel=1e-14)
        assert truncated_abs_moment(1, 0) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-14)
        want = 2 * phi(1) + gaussian_two_sided_tail(1)
        assert truncated_abs_moment(2, 1) == pytest.approx(want, rel=1e-13)
        assert truncated_abs_moment(2, 1) == pytest.approx(0.8012519, abs=1e-7)

    @pytest.mark.parametrize("gamma", [0.25, 0.5, 1, 1.5, 2, 3, 5])
    @pytest.mark.parametrize("x", [0.0, 0.3, 1.0, 2.0, 3.5, 6.0])
    def test_paths_agree(self, gamma, x):
        a = truncated_abs_moment(gamma, x)
        b = truncated_abs_moment_quad(gamma, x)
        assert a == pytest.approx(b, rel=1e-10)
        truncated_abs_moment(gamma, x, check=True)

    @pytest.mark.parametrize("gamma", [0.5, 1, 2.5])
    def test_decreasing_in_x(self, gamma):
        xs = np.linspace(0, 8, 200)
        v = np.array([truncated_abs_moment(gamma, x) for x in xs])
        assert np.all(np.diff(v) < 0)
        assert v[0] == pytest.approx(2 ** (gamma / 2) * math.gamma((gamma + 1) / 2) / math.sqrt(math.pi))

    def test_bad_args(self):
        with pytest.raises(InvalidParameterError):
            truncated_abs_moment(0, 1)
        with pytest.raises(InvalidParameterError):
            truncated_abs_moment(1, -1)

    def test_cross_check_error_is_raised(self, monkeypatch):
        import nsfest.special as sp
        monkeypatch.setattr(sp, "truncated_abs_moment_quad", lambda g, x: 1.0)
        with pytest.raises(CrossCheckError):
            sp.truncated_abs_moment(1.0, 1.0, check=True)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.1, 6), st.floats(0, 7))
    def test_bounded_by_full_moment(self, gamma, x):
        assert truncated_abs_moment(gamma, x) <= truncated_abs_moment(gamma, 0) * (1 + 1e-14)


class TestAlpha:
    def test_gamma2_closed_form(self):
        # d = s^2: x* = sqrt(2 ln 2); alpha_2 = 1 + x* phi(x*) / Q(x*), Q one-sided
        x = math.sqrt(2 * math.log(2))
        q = 0.5 * gaussian_two_sided_tail(x)
        want = 1 + x * phi(x) / q
        assert alpha_gamma(2, 100, 10) == pytest.approx(want, abs=1e-9)

    def test_mills_asymptotics(self):
        # alpha_2 / x^2 = 1 + 2/x^2 + O(x^-4): about 1.07 at d/s^2 = 1e6, within 5% of 1 by 1e12
        for d in (10 ** 6, 10 ** 9, 10 ** 12):
            x = sparse_threshold(d, 1)
            r = alpha_gamma(2, d, 1) / x ** 2
            assert r == pytest.approx(1 + 2 / x ** 2, abs=4 / x ** 4)
        assert r == pytest.approx(1, rel=0.05)

    def test_positive_at_dense_edge(self):
        a = alpha_gamma(1.3, 100, 20)
        assert math.isfinite(a) and a > 0

    @pytest.mark.parametrize("gamma", [0.5, 1, 2, 3])
    @pytest.mark.parametrize("d,s", [(4, 4), (100, 10), (1000, 10), (10000, 10)])
    def test_centering(self, gamma, d, s):
        # d/s^2 in {1/4, 1, 10, 100}
        a = alpha_gamma(gamma, d, s)
        x = sparse_threshold(d, s)
        f = lambda t: (t ** gamma - a) * phi(t)
        val = 2 * (integrate.quad(f, x, x + 10, epsabs=1e-13, limit=200)[0]
                   + integrate.quad(f, x + 10, np.inf, epsabs=1e-13)[0])
        assert abs(val) < 1e-9

    def test_domain(self):
        with pytest.raises(InvalidParameterError):
            alpha_gamma(1, 10, 11)
