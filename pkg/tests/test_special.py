import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mqforest.special import (chi_cdf, chi_mean, kolmogorov_sf, ks_1samp, ks_2samp,
                              regularized_incomplete_beta)


def _beta_series(x, a, b, terms=400):
    """Independent power-series oracle: I_x(a,b) = x^a (1-x)^b / (a B(a,b)) * sum ..."""
    front = math.exp(a * math.log(x) + b * math.log1p(-x)
                     + math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)) / a
    total, term = 1.0, 1.0
    for n in range(terms):
        term *= (a + b + n) / (a + 1 + n) * x
        total += term
    return front * total


class TestIncompleteBeta:
    def test_endpoints_and_symmetry(self):
        assert regularized_incomplete_beta(0.0, 2, 3) == 0.0
        assert regularized_incomplete_beta(1.0, 2, 3) == 1.0
        for a in (0.5, 3, 10, 47.5):
            assert regularized_incomplete_beta(0.5, a, a) == pytest.approx(0.5, abs=1e-14)

    def test_against_series_oracle(self):
        assert regularized_incomplete_beta(0.3, 2, 3) == pytest.approx(_beta_series(0.3, 2, 3), abs=1e-12)
        # frozen reference values
        assert regularized_incomplete_beta(0.3, 2, 3) == pytest.approx(0.3483, abs=1e-12)
        assert regularized_incomplete_beta(0.12, 0.5, 7.5) == pytest.approx(0.8268389560264311, abs=1e-10)
        assert regularized_incomplete_beta(0.9, 30, 2.5) == pytest.approx(0.26254832087078783, abs=1e-10)

    @settings(max_examples=200)
    @given(st.floats(0.001, 0.45), st.floats(0.2, 40), st.floats(0.2, 40))
    def test_series_oracle_small_x(self, x, a, b):
        assert regularized_incomplete_beta(x, a, b) == pytest.approx(_beta_series(x, a, b, 2000), abs=1e-10)

    @settings(max_examples=200)
    @given(st.floats(0, 1), st.floats(0.1, 60), st.floats(0.1, 60))
    def test_reflection(self, x, a, b):
        y = 1.0 - x
        x = 1.0 - y  # exact complementary pair in floating point
        total = regularized_incomplete_beta(x, a, b) + regularized_incomplete_beta(y, b, a)
        assert total == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("args", [(-0.1, 1, 1), (1.1, 1, 1), (0.5, 0, 1), (0.5, 1, -2), (0.5, math.inf, 1)])
    def test_domain(self, args):
        with pytest.raises(ValueError):
            regularized_incomplete_beta(*args)


class TestKolmogorov:
    def test_frozen_values(self):
        for lam, ref in [(0.5, 0.9639452436648751), (1.0, 0.26999967167735456),
                         (1.36, 0.049485876755377876), (2.0, 0.0006709252557796953)]:
            assert kolmogorov_sf(lam) == pytest.approx(ref, abs=1e-10)
        assert kolmogorov_sf(0.0) == 1.0
        assert kolmogorov_sf(0.01) == 1.0

    def test_two_sample(self, rng):
        x = rng.standard_normal(3000)
        stat, p = ks_2samp(x, rng.standard_normal(3000))
        assert p > 0.001 and stat < 0.06
        stat, p = ks_2samp(x, rng.standard_normal(3000) + 0.3)
        assert p < 1e-6
        assert ks_2samp([1.0, 2.0], [1.0, 2.0])[0] == 0.0
        with pytest.raises(ValueError):
            ks_2samp([], [1.0])

    def test_one_sample_statistic(self):
        # D for {0.25, 0.75} against U(0,1) is 0.25
        stat, _ = ks_1samp([0.25, 0.75], lambda z: z)
        assert stat == pytest.approx(0.25)


class TestChi:
    def test_mean(self):
        assert chi_mean(20) == pytest.approx(4.416605124547246, rel=1e-12)
        assert chi_mean(1) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-12)

    def test_cdf_half_normal_identity(self):
        x = np.linspace(0, 4, 9)
        np.testing.assert_allclose(chi_cdf(x, 1, 0.7), [math.erf(t / 0.7 / math.sqrt(2)) for t in x], atol=1e-12)

    def test_cdf_matches_sampling(self, rng):
        s = 0.3 * np.sqrt(rng.chisquare(5, 200000))
        for t in (0.3, 0.6, 0.9):
            assert chi_cdf(t, 5, 0.3) == pytest.approx(np.mean(s <= t), abs=4e-3)
