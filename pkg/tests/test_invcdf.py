import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from signedmix import DomainError, make_rng, model_cdf
from signedmix.invcdf import QuantileStats, QuantileTable, build_table, quantile, sample_invcdf, sample_invcdf_batch

from conftest import KS_CRIT_1PCT, ks_stat


@pytest.fixture(scope="module")
def normal_table(normal_alt):
    return build_table(normal_alt)


class TestTable:
    def test_monotone(self, normal_alt, normal_table):
        assert np.all(np.diff(normal_table.p) >= 0)
        assert normal_table.n == 1024

    def test_covers_most_mass(self, gamma_alt):
        t = build_table(gamma_alt)
        assert t.p[0] < 1e-6 and t.p[-1] > 1 - 1e-6

    def test_rejects_bad_abscissae(self):
        with pytest.raises(ValueError):
            QuantileTable(np.array([0.0, 0.0]), np.array([0.1, 0.2]))

    def test_rejects_tiny(self, normal_alt):
        with pytest.raises(ValueError):
            build_table(normal_alt, n=1)


class TestQuantile:
    def test_standard_normal(self, std_normal_model):
        t = build_table(std_normal_model)
        for u in (1e-12, 0.025, 0.5, 0.975, 1 - 1e-12):
            x = quantile(std_normal_model, t, u)
            assert abs(stats.norm.cdf(x) - u) < 1e-10

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
    def test_domain(self, std_normal_model, u):
        with pytest.raises(DomainError):
            quantile(std_normal_model, build_table(std_normal_model), u)

    def test_extreme_tails_outside_table(self, normal_alt, normal_table):
        for u in (1e-14, 1 - 1e-13):
            x = quantile(normal_alt, normal_table, u)
            assert abs(model_cdf(normal_alt, x) - u) < 1e-10
        assert quantile(normal_alt, normal_table, 1e-14) < normal_table.q[0]

    def test_gamma_left_tail_stays_positive(self, gamma_alt):
        t = build_table(gamma_alt)
        x = quantile(gamma_alt, t, 1e-15)
        assert x > 0 and abs(model_cdf(gamma_alt, x) - 1e-15) < 1e-10

    def test_few_iterations(self, normal_alt, normal_table):
        st_ = QuantileStats([])
        u = make_rng(3).random(300)
        for v in u:
            quantile(normal_alt, normal_table, float(v), st_)
        assert np.median(st_.iterations) <= 8

    def test_coarser_precision(self, normal_alt, normal_table):
        coarse = QuantileTable(normal_table.q, normal_table.p, 1e-4)
        x = quantile(normal_alt, coarse, 0.3)
        assert abs(model_cdf(normal_alt, x) - 0.3) < 1e-4


@pytest.fixture(scope="module")
def gamma_table(gamma_alt):
    return build_table(gamma_alt)


@given(st.floats(1e-9, 1 - 1e-9))
@settings(max_examples=200, deadline=None)
def test_contract_gamma(gamma_alt, gamma_table, u):
    x = quantile(gamma_alt, gamma_table, u)
    assert abs(model_cdf(gamma_alt, x) - u) < 1e-10


class TestSampling:
    def test_distribution(self, example1):
        from signedmix import validate_model

        m = validate_model(example1).normalized
        d = sample_invcdf_batch(m, build_table(m), 10_000, make_rng(8))
        assert ks_stat(d, lambda x: model_cdf(m, x)) < KS_CRIT_1PCT

    def test_reproducible(self, normal_alt, normal_table):
        a = sample_invcdf_batch(normal_alt, normal_table, 50, make_rng(1))
        b = sample_invcdf_batch(normal_alt, normal_table, 50, make_rng(1))
        assert np.array_equal(a, b)

    def test_scalar(self, normal_alt, normal_table, rng):
        assert isinstance(sample_invcdf(normal_alt, normal_table, rng), float)
