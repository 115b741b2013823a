import math

import numpy as np
import pytest
from scipy import optimize, stats

from signedmix import ComponentParams, Family, build_alternating_model, make_rng
from signedmix.components import quantile
from signedmix.model import SignedMixtureModel, example1_model

# 1% critical value of the one-sample KS statistic at n = 10^4
KS_CRIT_1PCT = 0.0163


@pytest.fixture(scope="session")
def normal_alt():
    return build_alternating_model(Family.NORMAL)


@pytest.fixture(scope="session")
def gamma_alt():
    return build_alternating_model(Family.GAMMA)


@pytest.fixture
def rng():
    return make_rng(20240601)


@pytest.fixture
def example1():
    return example1_model()


@pytest.fixture
def std_normal_model():
    return SignedMixtureModel(((1.0, ComponentParams.normal(0.0, 1.0)),), ())


@pytest.fixture
def half_pair_model():
    # 2 N(0,1) - N(0,0.25): the saturated pair with a* = 2
    return SignedMixtureModel(
        ((2.0, ComponentParams.normal(0.0, 1.0)),),
        ((1.0, ComponentParams.normal(0.0, 0.25)),),
    )


def ks_stat(draws, cdf):
    x = np.sort(np.asarray(draws))
    F = np.asarray(cdf(x))
    n = x.size
    hi = np.arange(1, n + 1) / n - F
    lo = F - np.arange(0, n) / n
    return float(max(hi.max(), lo.max()))


def ratio_sup(f, g):
    """Independent oracle: grid maximisation of log g/f plus bounded golden-section polish.

    The grid starts on the 1e-9..1-1e-9 quantile range of g; log g/f is concave
    for both families, so an endpoint maximum widens the grid in that direction.
    """
    if f.family.value == "normal":
        lr = lambda t: stats.norm.logpdf(t, g.p1, math.sqrt(g.p2)) - stats.norm.logpdf(t, f.p1, math.sqrt(f.p2))
    else:
        lr = lambda t: stats.gamma.logpdf(t, g.p1, scale=1 / g.p2) - stats.gamma.logpdf(t, f.p1, scale=1 / f.p2)
    lo, hi = float(quantile(g, 1e-9)), float(quantile(g, 1 - 1e-9))
    for _ in range(60):
        x = np.linspace(lo, hi, 1 << 16)
        if f.family.value == "gamma":
            # equal shapes put the supremum at the support boundary
            x = np.concatenate([np.geomspace(1e-300, lo, 256), x])
        v = lr(x)
        k = int(np.argmax(v))
        if k == x.size - 1:
            hi += hi - lo
        elif k == 0 and f.family.value == "normal":
            lo -= hi - lo
        else:
            break
    a, b = x[max(k - 1, 0)], x[min(k + 1, x.size - 1)]
    if b > a:
        res = optimize.minimize_scalar(lambda t: -lr(t), bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-12})
        return math.exp(max(v[k], -res.fun))
    return math.exp(v[k])


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for the terminal summary and echo it."""

    def _report(number: int, ok: bool, detail: str, seconds: float) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail} [{seconds:.1f}s]"
        request.config.acceptance_lines.append(line)
        print(line)
        return ok

    return _report
