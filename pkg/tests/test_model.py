import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from signedmix import ComponentParams, IntervalSet, ModelFormatError, SignedMixtureModel
from signedmix.model import (
    format_model,
    interval_masses,
    load_model,
    model_cdf,
    model_mass,
    model_pdf,
    model_sf,
    parse_model,
    save_model,
    validate_model,
    vanilla_sample_batch,
    vanilla_sample_model,
)

from conftest import KS_CRIT_1PCT, ks_stat

EXAMPLE_TEXT = """\
# four-component example
family normal
+ 2.0 0.0 1.0
+ 1.8 0.5 1.0
- 1.0 0.25 0.25
- 0.8 0.75 0.16
"""


def same(a, b):
    return a.positives == b.positives and a.negatives == b.negatives


class TestParsing:
    def test_parse_example(self, example1):
        assert same(parse_model(EXAMPLE_TEXT), example1)

    def test_roundtrip(self, example1):
        assert same(parse_model(format_model(example1, ["hdr"])), example1)

    def test_header_written_as_comment(self, example1):
        assert format_model(example1, ["a b"]).startswith("# a b\nfamily normal\n")

    def test_save_load(self, tmp_path, example1):
        path = tmp_path / "m.txt"
        save_model(example1, path)
        assert same(load_model(path), example1)

    @pytest.mark.parametrize("text", [
        "",
        "family cauchy\n+ 1 0 1\n",
        "family normal\n* 1 0 1\n",
        "family normal\n+ 1 0\n",
        "family normal\n+ one 0 1\n",
        "family gamma\n+ 1 -2 1\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(ModelFormatError):
            parse_model(text)


class TestDensity:
    def test_example_pdf_at_zero(self, example1):
        # mpmath oracle, 30 digits
        assert model_pdf(example1, 0.0) == pytest.approx(0.589898943796621664, rel=1e-14)

    def test_cdf_matches_quadrature(self, example1):
        m = example1.scaled(2.0)
        for x in (-1.0, 0.3, 2.5):
            ref, _ = integrate.quad(lambda t: model_pdf(m, t), -np.inf, x, epsabs=1e-13)
            assert model_cdf(m, x) == pytest.approx(ref, abs=1e-10)

    def test_cdf_plus_sf_is_total(self, example1):
        x = np.linspace(-3, 3, 11)
        np.testing.assert_allclose(model_cdf(example1, x) + model_sf(example1, x), 2.0, rtol=1e-13)

    def test_interval_masses_sum(self, normal_alt):
        edges = np.linspace(-5, 20, 26)
        m = interval_masses(normal_alt, edges[:-1], edges[1:])
        assert m.sum() == pytest.approx(model_cdf(normal_alt, 20.0) - model_cdf(normal_alt, -5.0), abs=1e-12)

    def test_model_mass_region(self, std_normal_model):
        region = IntervalSet.of((-math.inf, -1.0), (1.0, math.inf))
        assert model_mass(std_normal_model, region) == pytest.approx(2 * stats.norm.sf(1.0), rel=1e-12)

    def test_vanilla_acceptance(self, half_pair_model):
        assert half_pair_model.vanilla_acceptance == pytest.approx(0.5)

    def test_scaled(self, example1):
        m = example1.scaled(2.0)
        assert m.total_positive - m.total_negative == pytest.approx(1.0)


class TestValidation:
    def test_unnormalized_example(self, example1):
        rep = validate_model(example1)
        assert not rep.ok
        assert any("unnormalized, factor 2.0" in f for f in rep.failures)
        assert rep.normalized is not None
        assert validate_model(rep.normalized).ok

    def test_valid_fixture(self, normal_alt, gamma_alt):
        assert validate_model(normal_alt).ok
        assert validate_model(gamma_alt).ok

    def test_negative_density(self):
        m = SignedMixtureModel(
            ((2.0, ComponentParams.normal(0.0, 1.0)),),
            ((1.0, ComponentParams.normal(3.0, 1.0)),),
        )
        rep = validate_model(m)
        assert not rep.ok
        assert any("negative" in f for f in rep.failures)
        assert rep.min_value < 0
        assert str(rep).startswith("invalid")

    def test_mixed_families(self):
        m = SignedMixtureModel(
            ((1.0, ComponentParams.normal(0.0, 1.0)), (1.0, ComponentParams.gamma(2.0, 1.0))),
            ((1.0, ComponentParams.normal(0.0, 0.5)),),
        )
        rep = validate_model(m)
        assert not rep.ok and "mix families" in rep.failures[0]

    def test_nonpositive_weight(self):
        m = SignedMixtureModel(((0.0, ComponentParams.normal(0.0, 1.0)),), ())
        assert not validate_model(m).ok

    def test_never_raises_on_negative_total(self):
        m = SignedMixtureModel(
            ((1.0, ComponentParams.normal(0.0, 1.0)),),
            ((2.0, ComponentParams.normal(0.0, 0.5)),),
        )
        rep = validate_model(m)
        assert not rep.ok


class TestVanilla:
    def test_half_pair_distribution(self, half_pair_model, rng):
        draws, props = vanilla_sample_batch(half_pair_model, 10_000, rng)
        assert ks_stat(draws, lambda x: model_cdf(half_pair_model, x)) < KS_CRIT_1PCT
        assert draws.size / props.sum() == pytest.approx(0.5, abs=0.02)

    def test_scalar_wrapper(self, half_pair_model, rng):
        x, k = vanilla_sample_model(half_pair_model, rng)
        assert isinstance(x, float) and k >= 1

    def test_no_negatives_accepts_everything(self, std_normal_model, rng):
        draws, props = vanilla_sample_batch(std_normal_model, 500, rng)
        assert np.all(props == 1)


@given(st.floats(1.05, 20.0), st.floats(-2, 2), st.floats(0.2, 3.0))
@settings(max_examples=40, deadline=None)
def test_saturated_pair_density_nonnegative(a_scale, mu, var):
    """a* f - g stays >= 0 everywhere for a Normal pair built at a* (an invariant)."""
    from signedmix import a_star

    f = ComponentParams.normal(mu, var)
    g = ComponentParams.normal(mu + 0.3, var / a_scale)
    a = a_star(f, g)
    m = SignedMixtureModel(((a / (a - 1), f),), ((1 / (a - 1), g),))
    x = np.linspace(mu - 8 * math.sqrt(var), mu + 8 * math.sqrt(var), 4001)
    assert model_pdf(m, x).min() >= -1e-12
    assert model_cdf(m, np.inf) == pytest.approx(1.0, abs=1e-12)
