"""Random signed-mixture generators for benchmarking.

Two constructions are provided.  Method 1 glues saturated two-component
pairs whose dominating constants sit in a prescribed window, so the vanilla
acceptance lands in the requested bracket by construction.  Method 2 starts
from under-dominated pairs a f - g with a < a*, repairs them with the other
positive components, and finally steers the acceptance into the bracket by
mixing in one saturated pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .components import ComponentParams, Family, RngStream, family_pdf, make_rng, quantile
from .errors import GenerationFailed, NotPairable
from .model import SignedMixtureModel, validate_model
from .pair import a_star, a_star_location, log_a_star

K_RANGES: tuple[tuple[int, int], ...] = ((5, 10), (10, 30), (30, 50), (50, 100))
P_RANGES: tuple[tuple[float, float], ...] = (
    (0.0, 1e-4), (1e-4, 1e-3), (1e-3, 0.01), (0.01, 0.05), (0.05, 0.1), (0.1, 0.2), (0.2, 0.3),
)
MAX_RETRIES = 100
JITTER = 0.5
METHOD2_A_MAX = 10.0


@dataclass(frozen=True)
class GenSpec:
    family: Family
    k_range: tuple[int, int]
    p_range: tuple[float, float]
    method: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "k_range", tuple(int(k) for k in self.k_range))
        object.__setattr__(self, "p_range", tuple(float(p) for p in self.p_range))
        if self.k_range not in K_RANGES:
            raise ValueError(f"k_range must be one of {K_RANGES}")
        if self.p_range not in P_RANGES:
            raise ValueError(f"p_range must be one of {P_RANGES}")
        if self.method not in (1, 2):
            raise ValueError("method must be 1 or 2")

    def manifest(self, K: int) -> str:
        lo, hi = self.p_range
        return f"method={self.method} family={self.family.value} K={K} target_p=[{lo:g},{hi:g}] seed={self.seed}"


# ---------------------------------------------------------------------------
# priors and the negative-component search
# ---------------------------------------------------------------------------


def draw_positive(family: Family, rng: RngStream) -> ComponentParams:
    if family is Family.NORMAL:
        mu = rng.uniform(0.0, 20.0)
        sd = rng.gamma(3.0, 1.0 / 2.5)
        return ComponentParams.normal(mu, sd * sd)
    return ComponentParams.gamma(rng.gamma(4.0, 1.0 / 0.5), rng.gamma(2.0, 1.0 / 0.7))


def _bisect_increasing(fun: Callable[[float], float], lo: float, hi: float, target: float) -> float:
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if fun(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class _NormalSearch:
    """g = N(mu + d, (t sd)^2); log a* = -log t + c / (1 - t^2) with c = d^2 / (2 sd^2)."""

    def __init__(self, f: ComponentParams):
        self.f = f
        self.sd = math.sqrt(f.p2)

    def c(self, d: float) -> float:
        return d * d / (2.0 * self.f.p2)

    @staticmethod
    def t_min(c: float) -> float:
        s = (1.0 + c) - math.sqrt((1.0 + c) ** 2 - 1.0)
        return math.sqrt(s)

    def log_a(self, c: float, t: float) -> float:
        return -math.log(t) + c / (1.0 - t * t)

    def min_log_a(self, d: float) -> float:
        c = self.c(d)
        return self.log_a(c, self.t_min(c)) if c > 0 else 0.0

    def solve(self, d: float, log_target: float) -> ComponentParams:
        c = self.c(d)
        tm = self.t_min(c) if c > 0 else 1.0
        # a* decreases in t on (0, t_min)
        t = _bisect_increasing(lambda t: -self.log_a(c, t), 0.0, tm, -log_target) if tm > 0 else 0.0
        t = min(max(t, 1e-300), tm)
        return ComponentParams.normal(self.f.p1 + d, (t * self.sd) ** 2)


class _GammaSearch:
    """g = Gamma(alpha + d, b) with b beyond the minimiser alpha_- beta / alpha of a*."""

    def __init__(self, f: ComponentParams):
        self.f = f

    def _log_a(self, d: float, b: float) -> float:
        return log_a_star(self.f, ComponentParams.gamma(self.f.p1 + d, b))

    def b_min(self, d: float) -> float:
        return (self.f.p1 + d) * self.f.p2 / self.f.p1

    def min_log_a(self, d: float) -> float:
        return self._log_a(d, self.b_min(d)) if d > 0 else 0.0

    def solve(self, d: float, log_target: float) -> ComponentParams:
        lo = self.b_min(d)
        if d == 0.0:
            lo = self.f.p2
        hi = max(lo * 2.0, lo + 1.0)
        while self._log_a(d, hi) < log_target:
            hi *= 2.0
        b = _bisect_increasing(lambda b: self._log_a(d, b), lo, hi, log_target)
        b = max(b, math.nextafter(self.f.p2, math.inf))
        return ComponentParams.gamma(self.f.p1 + d, b)


def negative_for(f: ComponentParams, a_target: float, rng: RngStream) -> ComponentParams:
    """A negative component g with a*(f, g) = a_target (up to bisection accuracy).

    The location/shape offset is jittered uniformly in [0, 0.5]; when that
    offset cannot reach a_target it is redrawn below the largest feasible one.
    """
    search = _NormalSearch(f) if f.family is Family.NORMAL else _GammaSearch(f)
    log_target = math.log(a_target)
    d = rng.uniform(0.0, JITTER)
    if search.min_log_a(d) >= log_target:
        lo, hi = 0.0, d
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if search.min_log_a(mid) < log_target:
                lo = mid
            else:
                hi = mid
        d = lo * rng.uniform(0.0, 1.0)
    g = search.solve(d, log_target)
    a_star(f, g)  # raises NotPairable on a degenerate solve
    return g


# ---------------------------------------------------------------------------
# assembly helpers
# ---------------------------------------------------------------------------


class _Builder:
    """Accumulates weights per distinct component, keeping first-seen order."""

    def __init__(self):
        self.pos: dict[ComponentParams, float] = {}
        self.neg: dict[ComponentParams, float] = {}

    def add_pos(self, c: ComponentParams, w: float) -> None:
        self.pos[c] = self.pos.get(c, 0.0) + w

    def add_neg(self, c: ComponentParams, w: float) -> None:
        self.neg[c] = self.neg.get(c, 0.0) + w

    @property
    def total_positive(self) -> float:
        return sum(self.pos.values())

    def scale(self, k: float) -> None:
        for d in (self.pos, self.neg):
            for c in d:
                d[c] *= k

    def model(self) -> SignedMixtureModel:
        return SignedMixtureModel(
            tuple((w, c) for c, w in self.pos.items() if w > 0),
            tuple((w, c) for c, w in self.neg.items() if w > 0),
        )


def _a_window(p_range: tuple[float, float]) -> tuple[float, float]:
    lo, hi = p_range
    return 1.0 / (1.0 - lo), 1.0 / (1.0 - hi)


def _checked(model: SignedMixtureModel, p_range: tuple[float, float]) -> SignedMixtureModel:
    lo, hi = p_range
    p = model.vanilla_acceptance
    if not (lo * (1 - 1e-9) <= p <= hi * (1 + 1e-9)):
        raise GenerationFailed(f"acceptance {p:g} outside [{lo:g}, {hi:g}]")
    report = validate_model(model)
    if not report.ok:
        raise GenerationFailed("; ".join(report.failures))
    return model


def _retry(build: Callable[[RngStream], SignedMixtureModel], rng: RngStream) -> SignedMixtureModel:
    last = None
    for _ in range(MAX_RETRIES):
        try:
            return build(rng)
        except (GenerationFailed, NotPairable, FloatingPointError, ZeroDivisionError, ValueError) as exc:
            last = exc
    raise GenerationFailed(f"gave up after {MAX_RETRIES} attempts: {last}")


# ---------------------------------------------------------------------------
# method 1
# ---------------------------------------------------------------------------


def generate_method1(spec: GenSpec, rng: RngStream) -> SignedMixtureModel:
    """Convex combination of saturated pairs with a* in the target window."""
    a_lo, a_hi = _a_window(spec.p_range)

    def build(rng: RngStream) -> SignedMixtureModel:
        K = int(rng.integers(spec.k_range[0], spec.k_range[1] + 1))
        units = []
        for _ in range(K):
            f = draw_positive(spec.family, rng)
            for _ in range(1 if rng.random() < 0.5 else 2):
                a = rng.uniform(a_lo, a_hi)
                g = negative_for(f, a, rng)
                units.append((f, g, a_star(f, g)))
        b = _Builder()
        lam = 1.0 / len(units)
        for f, g, a in units:
            b.add_pos(f, lam * a / (a - 1.0))
            b.add_neg(g, lam / (a - 1.0))
        cap = (spec.p_range[1] * b.total_positive - 1.0) / (1.0 - spec.p_range[1])
        if cap > 0 and rng.random() < 0.5:
            k = int(rng.integers(1, 4))
            share = rng.dirichlet(np.ones(k)) * rng.uniform(0.0, cap)
            for w in share:
                b.add_pos(draw_positive(spec.family, rng), float(w))
            b.scale(1.0 / (1.0 + float(share.sum())))
        return _checked(b.model(), spec.p_range)

    return _retry(build, rng)


# ---------------------------------------------------------------------------
# method 2
# ---------------------------------------------------------------------------


def _balance_grid(comps: list[ComponentParams], family: Family) -> np.ndarray:
    lo, hi = math.inf, -math.inf
    for c in comps:
        lo = min(lo, _q(c, 1e-7))
        hi = max(hi, _q(c, 1.0 - 1e-7))
    grid = [np.linspace(lo, hi, 4096)]
    if family is Family.GAMMA:
        grid.append(np.geomspace(1e-12, max(lo, 1e-6), 64))
    grid.append(np.array([c.mode for c in comps]))
    return np.unique(np.concatenate(grid))


def _q(c: ComponentParams, u: float) -> float:
    return float(quantile(c, u))


def _covered(g: ComponentParams, others: list[ComponentParams]) -> bool:
    """Pooled positives dominate g in both tails: a pairable partner exists and
    beats g at its extreme quantiles."""
    if not any(_pairable(f, g) for f in others):
        return False
    pts = [_q(g, 1e-6), _q(g, 1.0 - 1e-6)]
    pooled = sum(float(family_pdf(f.family, f.p1, f.p2, np.array(pts)).max()) for f in others)
    return pooled > 0.0


def _pairable(f: ComponentParams, g: ComponentParams) -> bool:
    try:
        return log_a_star(f, g) < 700
    except NotPairable:
        return False


def _balance(a: float, f: ComponentParams, g: ComponentParams, others: list[ComponentParams],
             max_iter: int = 20_000) -> np.ndarray:
    """Weights w with a f - g + sum w_i f_i >= 0 on a dense grid (iterative scaling)."""
    grid = _balance_grid([f, g] + others, f.family)
    extra = []
    for o in others:
        if _pairable(o, g):
            extra.append(a_star_location(o, g))
    if extra:
        grid = np.unique(np.concatenate([grid, np.array(extra)]))
    if f.family is Family.GAMMA:
        grid = grid[grid > 0]
    base = a * family_pdf(f.family, f.p1, f.p2, grid) - family_pdf(g.family, g.p1, g.p2, grid)
    dens = np.array([family_pdf(o.family, o.p1, o.p2, grid) for o in others])
    w = np.zeros(len(others))
    for _ in range(max_iter):
        h = base + w @ dens
        k = int(np.argmin(h))
        if h[k] >= 0.0:
            return w * 1.01
        i = int(np.argmax(dens[:, k]))
        if dens[i, k] <= 0.0:
            raise GenerationFailed("no positive component covers the negative region")
        w[i] = max(w[i] * 1.2, w[i] + (-h[k]) / dens[i, k])
    raise GenerationFailed("weight balancing did not terminate")


def generate_method2(spec: GenSpec, rng: RngStream) -> SignedMixtureModel:
    """Under-dominated pairs repaired by the other positives, then steered into the bracket."""
    p_lo, p_hi = spec.p_range

    def build(rng: RngStream) -> SignedMixtureModel:
        K = int(rng.integers(spec.k_range[0], spec.k_range[1] + 1))
        positives = [draw_positive(spec.family, rng) for _ in range(K)]
        unit_f = []
        for f in positives:
            unit_f.extend([f] * (1 if rng.random() < 0.5 else 2))
        units = []
        for f in unit_f:
            g = negative_for(f, rng.uniform(1.0, METHOD2_A_MAX), rng)
            ast = a_star(f, g)
            a = rng.uniform(0.0, ast)
            others = [o for o in positives if o is not f]
            tries = 0
            while not _covered(g, others):
                tries += 1
                if tries > MAX_RETRIES:
                    raise GenerationFailed("could not cover a negative component")
                fresh = draw_positive(spec.family, rng)
                positives.append(fresh)
                others.append(fresh)
            units.append((f, g, a, others))
        b = _Builder()
        lam = 1.0 / len(units)
        for f, g, a, others in units:
            w = _balance(a, f, g, others)
            mass = a - 1.0 + float(w.sum())
            if not mass > 0:
                raise GenerationFailed("balanced unit has no mass")
            b.add_pos(f, lam * a / mass)
            b.add_neg(g, lam / mass)
            for o, wi in zip(others, w):
                if wi > 0:
                    b.add_pos(o, lam * float(wi) / mass)
        # zero-weight entries from unused positives are simply absent
        S = b.total_positive
        p_cur = 1.0 / S
        if not (p_lo < p_cur <= p_hi):
            u1, u2 = sorted(rng.uniform(p_lo, p_hi, size=2))
            u1 = max(u1, p_lo + 1e-3 * (p_hi - p_lo))
            if p_cur <= p_lo:
                p_t, p_pair = u1, u2
            else:
                p_t, p_pair = u2, u1
            if p_pair == p_t:
                raise GenerationFailed("degenerate steering targets")
            a = 1.0 / (1.0 - p_pair)
            pool = list(b.pos)
            f = pool[int(rng.integers(len(pool)))]
            g = negative_for(f, a, rng)
            a = a_star(f, g)
            lam2 = (p_t * S - 1.0) / (a * (1.0 - p_t) - 1.0)
            if not lam2 > 0:
                raise GenerationFailed("steering pair weight is not positive")
            b.add_pos(f, lam2 * a)
            b.add_neg(g, lam2)
            b.scale(1.0 / (1.0 + lam2 * (a - 1.0)))
        return _checked(b.model(), spec.p_range)

    return _retry(build, rng)


def generate(spec: GenSpec, rng: RngStream | None = None) -> SignedMixtureModel:
    rng = make_rng(spec.seed) if rng is None else rng
    if spec.method == 1:
        return generate_method1(spec, rng)
    return generate_method2(spec, rng)
