import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from signedmix import ComponentParams, Family, make_rng, model_pdf, validate_model, vanilla_sample_batch
from signedmix.model import format_model
from signedmix.modelgen import (
    K_RANGES,
    P_RANGES,
    GenSpec,
    _balance,
    draw_positive,
    generate,
    negative_for,
)
from signedmix.pair import a_star
from signedmix.pairing import optimal_pairing


def acceptance(model):
    return 1.0 / model.total_positive


@pytest.mark.parametrize("family, method, p_range", list(itertools.product(
    ["normal", "gamma"], [1, 2], P_RANGES)))
def test_every_bracket_valid(family, method, p_range):
    m = generate(GenSpec(family, (5, 10), p_range, method, seed=7))
    assert validate_model(m).ok
    lo, hi = p_range
    assert lo < acceptance(m) <= hi


@pytest.mark.parametrize("k_range", K_RANGES)
def test_component_count(k_range):
    m = generate(GenSpec("normal", k_range, (0.05, 0.1), 1, seed=3))
    # each positive carries one or two negatives, plus at most three extras
    assert k_range[0] <= m.P <= k_range[1] + 3
    assert m.N >= m.P - 3


@pytest.mark.parametrize("method", [1, 2])
def test_deterministic(method):
    spec = GenSpec("gamma", (5, 10), (0.01, 0.05), method, seed=12)
    assert format_model(generate(spec)) == format_model(generate(spec))


def test_seeds_differ():
    a = generate(GenSpec("normal", (5, 10), (0.01, 0.05), 1, seed=1))
    b = generate(GenSpec("normal", (5, 10), (0.01, 0.05), 1, seed=2))
    assert format_model(a) != format_model(b)


def test_manifest():
    spec = GenSpec("normal", (5, 10), (0.01, 0.05), 2, seed=9)
    assert spec.manifest(7) == "method=2 family=normal K=7 target_p=[0.01,0.05] seed=9"


@pytest.mark.parametrize("kwargs", [
    dict(k_range=(5, 11)),
    dict(p_range=(0.3, 0.4)),
    dict(method=3),
])
def test_spec_rejects(kwargs):
    base = dict(family="normal", k_range=(5, 10), p_range=(0.01, 0.05), method=1)
    base.update(kwargs)
    with pytest.raises(ValueError):
        GenSpec(**base)


@given(st.sampled_from(list(Family)), st.integers(0, 2**32 - 1), st.floats(1.25, 1 / 0.7))
@settings(max_examples=80, deadline=None)
def test_negative_hits_window(family, seed, target):
    rng = make_rng(seed)
    f = draw_positive(family, rng)
    g = negative_for(f, target, rng)
    assert a_star(f, g) == pytest.approx(target, rel=1e-8)


def test_method2_leaves_negative_residuals():
    residual = 0
    for seed in range(6):
        m = generate(GenSpec("normal", (5, 10), (0.01, 0.05), 2, seed=seed))
        residual += optimal_pairing(m, 0.6).s.sum() > 0
    assert residual >= 4


def test_balancing_inequality():
    rng = make_rng(4)
    f = ComponentParams.normal(5.0, 1.0)
    g = negative_for(f, 3.0, rng)
    others = [ComponentParams.normal(4.0, 2.0), ComponentParams.normal(6.5, 1.5)]
    a = 0.5 * a_star(f, g)
    w = _balance(a, f, g, others)
    x = np.linspace(-5, 15, 20001)
    total = a * f.pdf(x) - g.pdf(x) + sum(wi * o.pdf(x) for wi, o in zip(w, others))
    assert total.min() >= -1e-12


@pytest.mark.parametrize("family, method", list(itertools.product(["normal", "gamma"], [1, 2])))
def test_vanilla_rate_matches_theory(family, method):
    m = generate(GenSpec(family, (5, 10), (0.1, 0.2), method, seed=31))
    d, c = vanilla_sample_batch(m, 1000, make_rng(32))
    p = acceptance(m)
    n = c.sum()
    assert abs(d.size / n - p) <= 3 * math.sqrt(p * (1 - p) / n) + 1e-12
