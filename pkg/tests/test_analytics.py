import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from arratia import analytics as an
from arratia.errors import DomainError
from arratia.rng import stream


def gauss_tail_oracle(a, t):
    # sqrt(2/pi) * integral of exp(-v^2/2) over [a/sqrt(t), inf)
    val, _ = integrate.quad(lambda v: math.exp(-v * v / 2), a / math.sqrt(t), np.inf, epsabs=1e-14)
    return math.sqrt(2 / math.pi) * val


pos = st.floats(min_value=1e-3, max_value=1e3)
scale = st.floats(min_value=1e-2, max_value=1e2)


class TestHittingTimeCdf:
    def test_unit_level_unit_time(self):
        assert an.hitting_time_cdf(1.0, 1.0) == pytest.approx(gauss_tail_oracle(1, 1), abs=1e-12)
        assert an.hitting_time_cdf(1.0, 1.0) == pytest.approx(0.317311, abs=5e-7)

    def test_recurrence(self):
        assert an.hitting_time_cdf(1.0, 1e8) > 0.9999

    def test_brownian_scaling_example(self):
        assert an.hitting_time_cdf(2.0, 1.0) == pytest.approx(an.hitting_time_cdf(1.0, 0.25), rel=1e-14)

    @pytest.mark.parametrize("a,t", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0)])
    def test_domain(self, a, t):
        with pytest.raises(DomainError):
            an.hitting_time_cdf(a, t)

    def test_no_cancellation_deep_tail(self):
        # a/sqrt(t) = 10: 1 - Phi rounds to zero there
        assert 2 * (1 - stats.norm.cdf(10.0)) == 0.0
        p = an.hitting_time_cdf(10.0, 1.0)
        assert p == pytest.approx(2 * stats.norm.sf(10.0), rel=1e-12)
        assert 1e-24 < p < 1e-22

    @given(st.lists(pos, min_size=2, max_size=20, unique=True), pos)
    def test_monotone_in_level(self, levels, t):
        a = np.sort(levels)
        p = an.hitting_time_cdf(a, t)
        assert np.all(np.diff(p) <= 0)
        assert np.all((p >= 0) & (p <= 1))

    @given(pos, st.floats(min_value=1e-2, max_value=1e2), st.floats(min_value=1.01, max_value=10))
    def test_increasing_in_time(self, a, t, f):
        assert an.hitting_time_cdf(a, t * f) >= an.hitting_time_cdf(a, t)


class TestClusterSurvival:
    def test_zero_radius(self):
        assert an.cluster_survival(1.0, 0.0) == 1.0

    def test_radius_two(self):
        assert an.cluster_survival(1.0, 2.0) == pytest.approx(gauss_tail_oracle(2 / math.sqrt(2), 1), abs=1e-12)
        assert an.cluster_survival(1.0, 2.0) == pytest.approx(0.157299, abs=5e-7)

    def test_negative_radius(self):
        with pytest.raises(DomainError):
            an.cluster_survival(1.0, -0.1)

    @given(pos, pos, scale)
    def test_scaling_family(self, t, r, c):
        assert an.cluster_survival(c * c * t, c * r) == pytest.approx(an.cluster_survival(t, r), abs=1e-12)

    @given(pos, pos)
    def test_consistency_with_hitting_time(self, t, r):
        assert abs(an.cluster_survival(t, r) - an.hitting_time_cdf(r / math.sqrt(2), t)) <= 1e-15

    @given(pos, st.lists(pos, min_size=2, max_size=20, unique=True))
    def test_strictly_decreasing(self, t, rs):
        r = np.sort(rs)
        s = an.cluster_survival(t, r)
        assert np.all(np.diff(s) <= 0)

    def test_strict_on_moderate_grid(self):
        s = an.cluster_survival(1.0, np.linspace(0.01, 10, 500))
        assert np.all(np.diff(s) < 0)

    @given(pos, pos)
    def test_darling_identity(self, t, y):
        assert an.darling_limit_cdf(y) == pytest.approx(1 - an.cluster_survival(t, y * math.sqrt(t)), abs=1e-12)


class TestDarling:
    def test_values(self):
        assert an.darling_limit_cdf(0.0) == 0.0
        erf1, _ = integrate.quad(lambda x: 2 / math.sqrt(math.pi) * math.exp(-x * x), 0, 1)
        assert an.darling_limit_cdf(2.0) == pytest.approx(erf1, abs=1e-12)
        assert an.darling_limit_cdf(2.0) == pytest.approx(0.842701, abs=5e-7)
        assert an.darling_limit_cdf(10.0) > 0.9999

    def test_negative(self):
        with pytest.raises(DomainError):
            an.darling_limit_cdf(-1e-9)

    def test_is_cdf(self):
        y = np.linspace(0, 20, 400)
        f = an.darling_limit_cdf(y)
        assert np.all(np.diff(f) >= 0) and f[-1] == pytest.approx(1.0)


class TestMeanWidth:
    @pytest.mark.parametrize("t", [1.0, 4.0, math.pi, 0.01])
    def test_against_integral(self, t):
        val, _ = integrate.quad(lambda r: an.cluster_survival(t, r), 0, np.inf, epsabs=1e-13)
        assert an.mean_cluster_width(t) == pytest.approx(val, rel=1e-10)

    def test_values(self):
        assert an.mean_cluster_width(1.0) == pytest.approx(1.128379, abs=5e-7)
        assert an.mean_cluster_width(4.0) == pytest.approx(2.256758, abs=5e-7)
        assert an.mean_cluster_width(4.0) == pytest.approx(2 * an.mean_cluster_width(1.0), rel=1e-15)
        assert an.mean_cluster_width(math.pi) == pytest.approx(2.0, rel=1e-15)

    def test_domain(self):
        with pytest.raises(DomainError):
            an.mean_cluster_width(0.0)


class TestEnvelopes:
    def test_lower_at_double_exponential(self):
        t = math.exp(-math.e)
        # ln ln(1/t) = 1 there
        assert an.lil_envelope_lower(t) == pytest.approx(math.sqrt(2 * t), rel=1e-14)
        assert an.lil_envelope_lower(t) == pytest.approx(0.363285, abs=5e-7)

    @given(st.floats(min_value=1e-300, max_value=math.exp(-1) * (1 - 1e-9)))
    def test_ratio_sqrt2(self, t):
        assert an.lil_envelope_upper(t) / an.lil_envelope_lower(t) == pytest.approx(math.sqrt(2), rel=1e-13)

    @pytest.mark.parametrize("t", [math.exp(-1), 0.5, 1.0, 0.0, -1.0])
    def test_domain(self, t):
        for fn in (an.lil_envelope_lower, an.lil_envelope_upper):
            with pytest.raises(DomainError):
                fn(t)


class TestSamplers:
    @pytest.mark.parametrize("a", [0.5, 1.0, 3.0])
    def test_ks_against_cdf(self, a):
        x = an.hitting_time_sample(a, stream(11, f"test/hit/{a}"), 100_000)
        res = stats.kstest(x, lambda s: an.hitting_time_cdf(a, np.maximum(s, 1e-300)))
        assert res.statistic < 0.0136
        assert res.pvalue > 0.01

    def test_scaling_in_law(self):
        # same normal draws: theta(2) = 4 theta(1) exactly
        x1 = an.hitting_time_sample(1.0, stream(5, "s"), 1000)
        x2 = an.hitting_time_sample(2.0, stream(5, "s"), 1000)
        np.testing.assert_allclose(x2, 4 * x1, rtol=1e-15)
        y = an.hitting_time_sample(2.0, stream(6, "s2"), 50_000)
        assert stats.ks_2samp(4 * an.hitting_time_sample(1.0, stream(7, "s1"), 50_000), y).pvalue > 0.01

    def test_median(self):
        q = stats.norm.ppf(0.75)
        target = 1 / q**2
        # inversion oracle: the median solves cdf(1, m) = 1/2
        from scipy.optimize import brentq

        m = brentq(lambda s: an.hitting_time_cdf(1.0, s) - 0.5, 0.1, 100)
        assert m == pytest.approx(target, rel=1e-10)
        x = an.hitting_time_sample(1.0, stream(8, "med"), 100_000)
        # the sample median's CDF value sits within 3 binomial se of 1/2
        assert abs(an.hitting_time_cdf(1.0, np.median(x)) - 0.5) < 3 * 0.5 / math.sqrt(x.size)

    @pytest.mark.parametrize("r,t", [(1.0, 1.0), (2.0, 1.0), (0.5, 0.2)])
    def test_collision_frequency(self, r, t):
        n = 100_000
        x = an.two_particle_collision_sample(r, stream(9, f"col/{r}/{t}"), n)
        p = an.cluster_survival(t, r)
        assert abs(np.mean(x <= t) - p) < 3 * math.sqrt(p * (1 - p) / n)

    def test_collision_reduction(self):
        x = an.two_particle_collision_sample(math.sqrt(2), stream(1, "r"), 100)
        y = an.hitting_time_sample(1.0, stream(1, "r"), 100)
        np.testing.assert_allclose(x, y, rtol=1e-15)

    @pytest.mark.parametrize("gap", [0.0, -1.0])
    def test_collision_domain(self, gap):
        with pytest.raises(DomainError):
            an.two_particle_collision_sample(gap, stream(0, "d"))


class TestSeries:
    def test_event_probabilities_match_substitution(self):
        eps = 0.5
        t = 0.1 ** np.arange(3, 11)
        ll = np.log(np.log(1 / t))
        np.testing.assert_allclose(an.lower_event_probability(t, eps), [math.erfc(0.5 * math.sqrt(v / 2)) for v in ll],
                                   rtol=1e-13)
        np.testing.assert_allclose(an.upper_event_probability(t, eps), [math.erfc(1.5 * math.sqrt(v)) for v in ll],
                                   rtol=1e-13)

    def test_series_terms_agree_with_times(self):
        n = np.arange(3, 30)
        t = 0.1 ** n.astype(float)
        np.testing.assert_allclose(an.upper_series_terms(n, 0.5, 0.1), an.upper_event_probability(t, 0.5), rtol=1e-12)
        np.testing.assert_allclose(an.lower_series_terms(n, 0.5, 0.1), an.lower_event_probability(t, 0.5), rtol=1e-12)

    def test_upper_limit_against_long_sum(self):
        # independent check: a direct fsum to 2e6 plus the integral tail bound
        n = np.arange(3, 2_000_001, dtype=float)
        direct = math.fsum(an.upper_series_terms(n, 0.5, 0.1))
        limit = an.upper_series_limit(3, 0.5, 0.1)
        assert direct < limit
        assert limit - direct < 2e-4 * limit

    def test_decay_exponents(self):
        assert an.series_decay_exponent(an.upper_series_terms, 10.0, 0.5, 0.1) > 1
        assert an.series_decay_exponent(an.lower_series_terms, 10.0, 0.5, 0.1) < 1
        # asymptotically the upper exponent tends to (1 + eps)^2
        assert an.series_decay_exponent(an.upper_series_terms, 1e12, 0.5, 0.1) == pytest.approx(2.25, abs=0.1)
