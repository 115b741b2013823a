import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from signedmix import ComponentParams, DegenerateTruncation, DomainError, Family, Interval, IntervalSet, make_rng
from signedmix.components import (
    cdf,
    extrema_on,
    isf,
    mass,
    pdf,
    quantile,
    region_mass,
    sample,
    truncated_sample,
)

normal_params = st.builds(
    ComponentParams.normal,
    st.floats(-10, 10),
    st.floats(0.05, 9.0),
)
gamma_params = st.builds(
    ComponentParams.gamma,
    st.floats(0.3, 30.0),
    st.floats(0.1, 10.0),
)


def scipy_dist(c: ComponentParams):
    if c.family is Family.NORMAL:
        return stats.norm(c.p1, math.sqrt(c.p2))
    return stats.gamma(c.p1, scale=1.0 / c.p2)


class TestParams:
    def test_rejects_nonpositive_variance(self):
        with pytest.raises(DomainError):
            ComponentParams.normal(0.0, 0.0)

    def test_rejects_nonpositive_shape(self):
        with pytest.raises(DomainError):
            ComponentParams.gamma(-1.0, 1.0)

    def test_rejects_nan(self):
        with pytest.raises(DomainError):
            ComponentParams.normal(math.nan, 1.0)

    def test_family_from_string(self):
        assert ComponentParams("gamma", 2, 3).family is Family.GAMMA

    def test_modes(self):
        assert ComponentParams.normal(1.5, 2.0).mode == 1.5
        assert ComponentParams.gamma(3.0, 2.0).mode == pytest.approx(1.0)
        assert ComponentParams.gamma(0.5, 2.0).mode == 0.0

    def test_support(self):
        assert ComponentParams.gamma(2, 1).support == (0.0, math.inf)


@pytest.mark.parametrize("c", [
    ComponentParams.normal(0.3, 0.49),
    ComponentParams.normal(-4.0, 9.0),
    ComponentParams.gamma(0.7, 2.0),
    ComponentParams.gamma(12.0, 0.5),
])
def test_kernels_match_scipy(c):
    d = scipy_dist(c)
    x = np.linspace(d.ppf(1e-6), d.ppf(1 - 1e-6), 57)
    np.testing.assert_allclose(pdf(c, x), d.pdf(x), rtol=1e-12)
    np.testing.assert_allclose(cdf(c, x), d.cdf(x), rtol=1e-12, atol=1e-300)
    u = np.linspace(1e-9, 1 - 1e-9, 31)
    np.testing.assert_allclose(quantile(c, u), d.ppf(u), rtol=1e-9)
    np.testing.assert_allclose(isf(c, u), d.isf(u), rtol=1e-9)


def test_standard_normal_values():
    c = ComponentParams.normal(0.0, 1.0)
    assert pdf(c, 0.0) == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), rel=1e-15)
    assert cdf(c, 0.0) == pytest.approx(0.5, rel=1e-15)


def test_far_right_tail_keeps_relative_precision():
    c = ComponentParams.normal(0.0, 1.0)
    # survival mass above 30 is about 4.9e-198; a cdf difference would give 0
    m = mass(c, 30.0, math.inf)
    assert m == pytest.approx(stats.norm.sf(30.0), rel=1e-10)


@given(normal_params, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_mass_additive_normal(c, u1, u2):
    lo, hi = sorted((float(quantile(c, 0.01 + 0.98 * u1)), float(quantile(c, 0.01 + 0.98 * u2))))
    mid = 0.5 * (lo + hi)
    total = mass(c, lo, hi)
    assert total == pytest.approx(mass(c, lo, mid) + mass(c, mid, hi), abs=1e-12)
    assert 0.0 <= total <= 1.0


@given(gamma_params, st.floats(1e-6, 1 - 1e-6))
@settings(max_examples=60, deadline=None)
def test_quantile_inverts_cdf_gamma(c, u):
    x = quantile(c, u)
    assert cdf(c, x) == pytest.approx(u, rel=1e-8, abs=1e-12)


@given(st.one_of(normal_params, gamma_params), st.floats(0.0, 1.0), st.floats(0.01, 2.0))
@settings(max_examples=80, deadline=None)
def test_extrema_on_brackets_grid(c, u, width_q):
    lo = float(quantile(c, 0.02 + 0.5 * u))
    hi = lo + width_q * math.sqrt(c.p2 if c.family is Family.NORMAL else c.p1) / (1 if c.family is Family.NORMAL else c.p2)
    sup, inf = extrema_on(c, lo, hi)
    vals = pdf(c, np.linspace(lo, hi, 2001))
    assert sup >= vals.max() * (1 - 1e-12)
    assert inf <= vals.min() * (1 + 1e-12)
    assert sup <= vals.max() * (1 + 1e-3)


def test_extrema_reject_unbounded_interval():
    with pytest.raises(DomainError):
        extrema_on(ComponentParams.normal(0, 1), -math.inf, 0.0)


def test_extrema_gamma_singular_at_origin():
    with pytest.raises(DomainError):
        extrema_on(ComponentParams.gamma(0.5, 1.0), 0.0, 1.0)


class TestIntervalSet:
    def test_sorted_on_construction(self):
        s = IntervalSet.of((2, 3), (0, 1))
        assert [iv.lo for iv in s] == [0, 2]
        assert s.length == 2

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            IntervalSet.of((0, 2), (1, 3))

    def test_contains(self):
        s = IntervalSet.of((0, 1), (2, 3))
        assert list(s.contains([0.5, 1.5, 2.5])) == [True, False, True]

    def test_str(self):
        s = IntervalSet((Interval(-math.inf, -1.0), Interval(1.0, math.inf, True, False)))
        assert str(s) == "(-inf, -1] U [1, inf)"


def test_region_mass_of_complement_tails():
    c = ComponentParams.normal(0.0, 1.0)
    s = IntervalSet.of((-math.inf, -1.0), (1.0, math.inf))
    assert region_mass(c, s) == pytest.approx(2 * stats.norm.sf(1.0), rel=1e-13)


class TestTruncatedSample:
    def test_stays_in_region(self, rng):
        c = ComponentParams.gamma(3.0, 1.0)
        region = IntervalSet.of((0.0, 0.5), (8.0, math.inf))
        x = truncated_sample(c, region, rng, size=5000)
        assert np.all(region.contains(x))

    def test_far_tail_distribution(self, rng):
        c = ComponentParams.normal(0.0, 1.0)
        region = IntervalSet.of((6.0, math.inf))
        x = truncated_sample(c, region, rng, size=4000)
        # truncated-normal oracle
        ref = stats.truncnorm(6.0, math.inf)
        assert stats.kstest(x, ref.cdf).pvalue > 0.001

    def test_two_piece_weights(self, rng):
        c = ComponentParams.normal(0.0, 1.0)
        region = IntervalSet.of((-math.inf, -1.0), (0.0, 0.5))
        x = truncated_sample(c, region, rng, size=20000)
        p_left = stats.norm.cdf(-1.0) / (stats.norm.cdf(-1.0) + stats.norm.cdf(0.5) - 0.5)
        assert np.mean(x < 0) == pytest.approx(p_left, abs=0.015)

    def test_scalar(self, rng):
        c = ComponentParams.normal(0.0, 1.0)
        assert isinstance(truncated_sample(c, IntervalSet.of((0, 1)), rng), float)

    def test_empty_mass_raises(self, rng):
        c = ComponentParams.normal(0.0, 1.0)
        with pytest.raises(DegenerateTruncation):
            truncated_sample(c, IntervalSet.of((100.0, 101.0)), rng)


def test_sample_moments(rng):
    c = ComponentParams.gamma(4.0, 2.0)
    x = sample(c, rng, size=100_000)
    assert x.mean() == pytest.approx(2.0, rel=0.01)
    assert x.var() == pytest.approx(1.0, rel=0.03)


def test_make_rng_reproducible():
    assert np.array_equal(make_rng(5).random(4), make_rng(5).random(4))
