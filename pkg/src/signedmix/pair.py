"""Two-component signed mixtures (a f - g) / (a - 1).

Covers the dominating constant a*, the pair density, its critical points,
the vanilla sampler proposing from f, and the stratified sampler driven by a
piecewise-constant envelope on a partition of supp(f).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .components import (
    ComponentParams,
    Family,
    Interval,
    IntervalSet,
    RngStream,
    extrema_on,
    family_cdf,
    family_isf,
    family_logpdf,
    family_pdf,
    family_quantile,
    family_sf,
    mass as comp_mass,
    region_mass,
    truncated_sample,
)
from .errors import NotPairable, ParameterDomain, PartitionOverflow
from .model import SignedMixtureModel

MAX_CELLS = 65_536
INITIAL_DIVISIONS = 100
BISECTION_STEPS = 80

# ---------------------------------------------------------------------------
# dominating constant
# ---------------------------------------------------------------------------


def log_a_star(f: ComponentParams, g: ComponentParams) -> float:
    """log sup g/f from the exponential-family closed forms."""
    if f.family is not g.family:
        raise NotPairable("components belong to different families")
    if f.family is Family.NORMAL:
        vp, vm = f.p2, g.p2
        if not vm < vp:
            raise NotPairable(f"negative variance {vm:g} must be below positive variance {vp:g}")
        return 0.5 * math.log(vp / vm) + (f.p1 - g.p1) ** 2 / (2.0 * (vp - vm))
    ap, bp, am, bm = f.p1, f.p2, g.p1, g.p2
    if not ap <= am:
        raise NotPairable(f"positive shape {ap:g} exceeds negative shape {am:g}")
    if not bp < bm:
        raise NotPairable(f"positive rate {bp:g} must be below negative rate {bm:g}")
    if ap == am:
        return ap * math.log(bm / bp)
    x_star = (ap - am) / (bp - bm)
    return (special.gammaln(ap) - special.gammaln(am) + am * math.log(bm) - ap * math.log(bp)
            + (ap - am) * (1.0 - math.log(x_star)))


def a_star(f: ComponentParams, g: ComponentParams) -> float:
    la = log_a_star(f, g)
    if la > 700:
        raise NotPairable(f"sup g/f overflows (log a* = {la:.3g})")
    return math.exp(la)


def a_star_location(f: ComponentParams, g: ComponentParams) -> float:
    """Where g/f attains a*; 0 for equal Gamma shapes (supremum at the origin)."""
    log_a_star(f, g)
    if f.family is Family.NORMAL:
        return (g.p1 * f.p2 - f.p1 * g.p2) / (f.p2 - g.p2)
    if f.p1 == g.p1:
        return 0.0
    return (f.p1 - g.p1) / (f.p2 - g.p2)


# ---------------------------------------------------------------------------
# the pair
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoComponentPair:
    f: ComponentParams
    g: ComponentParams
    a: float
    a_star: float

    def __post_init__(self):
        if not self.a_star > 1.0:
            raise NotPairable(f"a* = {self.a_star!r} must exceed 1")
        if self.a < self.a_star * (1.0 - 1e-12):
            raise ValueError(f"a = {self.a!r} is below a* = {self.a_star!r}")

    @classmethod
    def make(cls, f: ComponentParams, g: ComponentParams, a: float | None = None) -> "TwoComponentPair":
        ast = a_star(f, g)
        a = ast if a is None else float(a)
        if ast * (1 - 1e-12) <= a < ast:
            a = ast
        return cls(f, g, a, ast)

    @property
    def family(self) -> Family:
        return self.f.family

    @property
    def vanilla_acceptance(self) -> float:
        return (self.a - 1.0) / self.a

    def unnormalized(self, x):
        """a f(x) - g(x)."""
        f, g = self.f, self.g
        return self.a * family_pdf(f.family, f.p1, f.p2, x) - family_pdf(g.family, g.p1, g.p2, x)

    def as_model(self) -> SignedMixtureModel:
        s = self.a - 1.0
        return SignedMixtureModel(((self.a / s, self.f),), ((1.0 / s, self.g),))


def pair_density(pair: TwoComponentPair, x):
    """(a f - g) / (a - 1), clamped at 0 against rounding."""
    out = np.maximum(pair.unnormalized(x), 0.0) / (pair.a - 1.0)
    return float(out) if np.ndim(x) == 0 else out


def pair_mass(pair: TwoComponentPair, lo, hi):
    """Pair-density mass of (lo, hi] (vectorised)."""
    return (pair.a * comp_mass(pair.f, lo, hi) - comp_mass(pair.g, lo, hi)) / (pair.a - 1.0)


def pair_vanilla_batch(pair: TwoComponentPair, n: int, rng: RngStream):
    """Propose from f, accept with (a f - g) / (a f)."""
    f, g, a = pair.f, pair.g, pair.a
    draws = np.empty(n)
    proposals = np.zeros(n, dtype=np.int64)
    pending = np.arange(n)
    while pending.size:
        x = _sample_f(f, pending.size, rng)
        proposals[pending] += 1
        af = a * family_pdf(f.family, f.p1, f.p2, x)
        ok = rng.random(pending.size) * af <= af - family_pdf(g.family, g.p1, g.p2, x)
        draws[pending[ok]] = x[ok]
        pending = pending[~ok]
    return draws, proposals


def pair_vanilla_sample(pair: TwoComponentPair, rng: RngStream) -> tuple[float, int]:
    d, p = pair_vanilla_batch(pair, 1, rng)
    return float(d[0]), int(p[0])


def _sample_f(f: ComponentParams, n: int, rng: RngStream) -> np.ndarray:
    if f.family is Family.NORMAL:
        return rng.normal(f.p1, math.sqrt(f.p2), size=n)
    return rng.gamma(f.p1, 1.0 / f.p2, size=n)


# ---------------------------------------------------------------------------
# monotonicity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CriticalPoint:
    x: float
    kind: str  # "max" | "min"


@dataclass(frozen=True)
class MonotonicityProfile:
    critical: tuple[CriticalPoint, ...]
    pieces: tuple[tuple[float, float, str], ...]  # (lo, hi, "increasing" | "decreasing")

    @property
    def maxima(self) -> list[float]:
        return [c.x for c in self.critical if c.kind == "max"]

    @property
    def minima(self) -> list[float]:
        return [c.x for c in self.critical if c.kind == "min"]


def _bisect(fun: Callable[[float], float], lo: float, hi: float, steps: int = BISECTION_STEPS) -> float:
    flo = fun(lo)
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = fun(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _golden_max(fun: Callable[[float], float], lo: float, hi: float, steps: int = 200) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = fun(c), fun(d)
    for _ in range(steps):
        if hi - lo <= 1e-15 * max(1.0, abs(lo), abs(hi)):
            break
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = fun(d)
    return 0.5 * (lo + hi)


class _DerivativeShape:
    """Sign structure of m' in working coordinates z.

    m'(z) has the sign of D(z) = psi(z) - a * (slope * z + intercept); psi has
    one minimum and one maximum (roots of a quadratic) and psi' is unimodal
    between them, which bounds the number of critical points of m by three.
    """

    def __init__(self, pair: TwoComponentPair):
        f, g, a = pair.f, pair.g, pair.a
        self.a = a
        if pair.family is Family.NORMAL:
            sp = math.sqrt(f.p2)
            self.shift, self.scale = f.p1, sp
            mu = (g.p1 - f.p1) / sp
            s2 = g.p2 / f.p2
            self.mu, self.s2 = mu, s2
            self.lo, self.hi = -math.inf, math.inf
            self.slope, self.intercept = 1.0, 0.0
            self.quad = ((s2 - 1.0), (2.0 * mu - mu * s2), (s2 - mu * mu))
        else:
            ap, bp, am, bm = f.p1, f.p2, g.p1, g.p2
            self.f, self.g = f, g
            self._log_const = (am * math.log(bm) - math.lgamma(am)) - (ap * math.log(bp) - math.lgamma(ap))
            self.shift, self.scale = 0.0, 1.0
            self.lo, self.hi = 0.0, math.inf
            self.slope, self.intercept = bp, 1.0 - ap
            self.quad = (-bm * (bm - bp), bm * (2.0 * am - ap) + bp * (1.0 - am), (am - ap) * (1.0 - am))
        self.family = pair.family

    def log_ratio(self, z: float) -> float:
        if self.family is Family.NORMAL:
            return -0.5 * math.log(self.s2) - (z - self.mu) ** 2 / (2.0 * self.s2) + 0.5 * z * z
        f, g = self.f, self.g
        return self._log_const + (g.p1 - f.p1) * math.log(z) - (g.p2 - f.p2) * z

    def psi(self, z: float) -> float:
        r = math.exp(self.log_ratio(z))
        if self.family is Family.NORMAL:
            return (z - self.mu) * r / self.s2
        return (self.g.p2 * z + 1.0 - self.g.p1) * r

    def dpsi(self, z: float) -> float:
        qa, qb, qc = self.quad
        r = math.exp(self.log_ratio(z))
        if self.family is Family.NORMAL:
            return r / self.s2 ** 2 * (qa * z * z + qb * z + qc)
        return r * (qa * z + qb + qc / z)

    def D(self, z: float) -> float:
        return self.psi(z) - self.a * (self.slope * z + self.intercept)

    def dD(self, z: float) -> float:
        return self.dpsi(z) - self.a * self.slope

    def to_x(self, z: float) -> float:
        return self.shift + self.scale * z

    def psi_extrema(self) -> tuple[float, float]:
        qa, qb, qc = self.quad
        disc = math.sqrt(max(qb * qb - 4.0 * qa * qc, 0.0))
        # qa < 0 in both families, so the '+' root is the smaller one
        r1 = (-qb + disc) / (2.0 * qa)
        r2 = (-qb - disc) / (2.0 * qa)
        return min(r1, r2), max(r1, r2)


def _step_out(fun, start: float, direction: float, want_positive: bool, base: float) -> float:
    step = max(base, 1.0)
    z = start
    for _ in range(200):
        z = start + direction * step
        v = fun(z)
        if (v > 0) == want_positive and v != 0:
            return z
        step *= 2.0
    raise RuntimeError("failed to bracket the derivative sign")


def monotonicity(pair: TwoComponentPair) -> MonotonicityProfile:
    """Critical points of the pair density and its maximal monotone pieces."""
    sh = _DerivativeShape(pair)
    x1, x2 = sh.psi_extrema()
    gamma = pair.family is Family.GAMMA
    span = max(1.0, abs(x1), abs(x2))
    z_left = 1e-12 * span if gamma else None

    u1 = max(x1, z_left) if gamma else x1
    u2 = x2
    bps: list[float] = []
    if u2 > u1:
        zi = _golden_max(sh.dpsi, u1, u2)
        if sh.dD(zi) > 0:
            if sh.dD(u1) < 0:
                bps.append(_bisect(sh.dD, u1, zi))
            bps.append(_bisect(sh.dD, zi, u2))

    if gamma:
        left = min([z_left] + bps)
    else:
        first = bps[0] if bps else x1
        left = _step_out(sh.D, min(first, x1, 0.0), -1.0, True, span)
    last = bps[-1] if bps else x2
    right = _step_out(sh.D, max(last, x2, 0.0), 1.0, False, span)

    nodes = [left] + [b for b in bps if b > left] + [right]
    signs = [sh.D(z) for z in nodes]
    crit: list[CriticalPoint] = []
    for (za, zb), (da, db) in zip(zip(nodes, nodes[1:]), zip(signs, signs[1:])):
        if da > 0 > db:
            crit.append(CriticalPoint(sh.to_x(_bisect(sh.D, za, zb)), "max"))
        elif da < 0 < db:
            crit.append(CriticalPoint(sh.to_x(_bisect(sh.D, za, zb)), "min"))

    lo_x = 0.0 if gamma else -math.inf
    edges = [lo_x] + [c.x for c in crit] + [math.inf]
    pieces = []
    direction = "increasing" if signs[0] > 0 else "decreasing"
    for lo, hi in zip(edges, edges[1:]):
        pieces.append((lo, hi, direction))
        direction = "decreasing" if direction == "increasing" else "increasing"
    return MonotonicityProfile(tuple(crit), tuple(pieces))


def density_slope_sign(pair: TwoComponentPair, x: np.ndarray) -> np.ndarray:
    """Sign of d/dx (a f - g) evaluated pointwise."""
    f, g, a = pair.f, pair.g, pair.a
    x = np.asarray(x, dtype=float)
    fx = family_pdf(f.family, f.p1, f.p2, x)
    gx = family_pdf(g.family, g.p1, g.p2, x)
    if pair.family is Family.NORMAL:
        df = -fx * (x - f.p1) / f.p2
        dg = -gx * (x - g.p1) / g.p2
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            df = np.where(x > 0, fx * ((f.p1 - 1.0) / x - f.p2), 0.0)
            dg = np.where(x > 0, gx * ((g.p1 - 1.0) / x - g.p2), 0.0)
    return np.sign(a * df - dg)


# ---------------------------------------------------------------------------
# partition
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Partition:
    """D_0 plus bounded cells with constant envelope heights.

    ``h`` bounds a f - g on each cell (the envelope of the pair density is
    h / (a - 1)); ``masses`` are pair-density masses; ``probs`` is the cell
    selection law (m(D_0), m(D_1), ..., m(D_n)).
    """

    pair: TwoComponentPair
    delta: float
    eps: float
    d0: IntervalSet
    lo: np.ndarray
    hi: np.ndarray
    h: np.ndarray
    masses: np.ndarray
    scheme: np.ndarray
    mass0: float
    f_d0: float
    probs: np.ndarray
    M: float
    subsets: int = 1
    _cum: np.ndarray = field(default=None, repr=False)
    _tail: "_TailInverter" = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_cum", np.cumsum(self.probs))
        object.__setattr__(self, "_tail", _TailInverter(self.pair.f, self.d0))

    @property
    def n_cells(self) -> int:
        return int(self.lo.size)

    @property
    def acceptance(self) -> float:
        return 1.0 / self.M

    def dump(self) -> str:
        lines = [f"D0 {self.d0} M {self.M:.17g}"]
        for lo, hi, h, m in zip(self.lo, self.hi, self.h, self.masses):
            lines.append(f"cell {lo:.17g} {hi:.17g} {h:.17g} {m:.17g}")
        return "\n".join(lines) + "\n"


class _TailInverter:
    """Inversion sampler for f restricted to D_0 with the interval bounds precomputed."""

    def __init__(self, f: ComponentParams, region: IntervalSet):
        self.f = f
        fam, p1, p2 = f.family, f.p1, f.p2
        med = f.median
        self.lo = np.array([iv.lo for iv in region])
        self.hi = np.array([iv.hi for iv in region])
        self.upper = self.lo >= med
        sf_lo, sf_hi = family_sf(fam, p1, p2, self.lo), family_sf(fam, p1, p2, self.hi)
        cdf_lo, cdf_hi = family_cdf(fam, p1, p2, self.lo), family_cdf(fam, p1, p2, self.hi)
        self.t0 = np.where(self.upper, sf_hi, cdf_lo)
        self.t1 = np.where(self.upper, sf_lo, cdf_hi)
        w = np.maximum(self.t1 - self.t0, 0.0)
        self.cum = np.cumsum(w)

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        f = self.f
        if self.cum.size > 1:
            k = np.minimum(np.searchsorted(self.cum, rng.random(n) * self.cum[-1], side="right"), self.cum.size - 1)
        else:
            k = np.zeros(n, dtype=np.intp)
        u = 1.0 - rng.random(n)
        t = np.clip(self.t0[k] + u * (self.t1[k] - self.t0[k]), 1e-320, 1.0 - 1e-16)
        up = self.upper[k]
        x = np.empty(n)
        if up.any():
            x[up] = family_isf(f.family, f.p1, f.p2, t[up])
        if (~up).any():
            x[~up] = family_quantile(f.family, f.p1, f.p2, t[~up])
        return np.clip(x, self.lo[k], self.hi[k])


def tail_level(a: float, delta: float, eps: float) -> float:
    """Per-tail g-mass of D_0 so that g(D_0) = (a-1)(1 - delta(eps+1)) / delta."""
    return (a - 1.0) * (1.0 - delta * (eps + 1.0)) / (2.0 * delta)


def _check_domain(pair: TwoComponentPair, delta: float, eps: float) -> None:
    a = pair.a
    if not 0.0 < delta < 1.0:
        raise ParameterDomain(f"delta = {delta!r} must lie in (0, 1)")
    if not delta > 1.0 - 1.0 / a:
        raise ParameterDomain(
            f"delta = {delta!r} does not exceed the vanilla acceptance {1 - 1 / a:.6g}; use the vanilla sampler"
        )
    if not 0.0 < eps < (1.0 - delta) / delta:
        raise ParameterDomain(f"eps = {eps!r} must lie in (0, {(1 - delta) / delta:.6g})")


def _d0_split(pair: TwoComponentPair, alpha: float) -> tuple[IntervalSet, float, float]:
    g = pair.g
    if pair.family is Family.GAMMA and pair.f.p1 > 1.0:
        right = float(family_isf(g.family, g.p1, g.p2, 2.0 * alpha))
        return IntervalSet((Interval(right, math.inf, True, False),)), 0.0, right
    left = float(family_quantile(g.family, g.p1, g.p2, alpha))
    right = float(family_isf(g.family, g.p1, g.p2, alpha))
    lo_sup = 0.0 if pair.family is Family.GAMMA else -math.inf
    d0 = IntervalSet((Interval(lo_sup, left, False, True), Interval(right, math.inf, True, False)))
    return d0, left, right


def _cell_bounds(pair: TwoComponentPair, lo: np.ndarray, hi: np.ndarray):
    """Envelope heights: scheme (A) on monotone cells, scheme (B) otherwise."""
    v_lo = pair.unnormalized(lo)
    v_hi = pair.unnormalized(hi)
    h = np.maximum(v_lo, v_hi)
    # probe just inside the ends: at a critical-point cut the endpoint slope is ~0
    nudge = 1e-6 * (hi - lo)
    s = density_slope_sign(pair, lo + nudge) * density_slope_sign(pair, hi - nudge)
    use_b = s < 0
    scheme = np.where(use_b, "B", "A")
    for k in np.flatnonzero(use_b):
        fsup, _ = extrema_on(pair.f, float(lo[k]), float(hi[k]))
        _, ginf = extrema_on(pair.g, float(lo[k]), float(hi[k]))
        h[k] = pair.a * fsup - ginf
    return np.maximum(h, 0.0), scheme


def build_partition(pair: TwoComponentPair, delta: float, eps: float,
                    max_cells: int = MAX_CELLS) -> Partition:
    """Partition of supp(f) whose stratified sampler accepts with rate >= delta.

    D_0 takes g-mass (a-1)(1 - delta(1+eps)) / delta in the tails.  The
    bounded remainder is cut at the critical points of the pair density into
    monotone subsets, gridded at 1/100 of its length, and cells are halved
    until each subset's Riemann excess is within eps / (S + 1).
    """
    _check_domain(pair, delta, eps)
    a = pair.a
    alpha = tail_level(a, delta, eps)
    d0, left, right = _d0_split(pair, alpha)
    f = pair.f
    f_d0 = region_mass(f, d0)
    g_d0 = region_mass(pair.g, d0)
    mass0 = max((a * f_d0 - g_d0) / (a - 1.0), 0.0)

    profile = monotonicity(pair)
    cuts = [c.x for c in profile.critical if left < c.x < right]
    bounds = [left] + cuts + [right]
    S = len(bounds) - 1
    width0 = (right - left) / INITIAL_DIVISIONS

    los, his, sub = [], [], []
    for s, (blo, bhi) in enumerate(zip(bounds, bounds[1:])):
        k = max(1, int(math.ceil((bhi - blo) / width0 - 1e-9)))
        edges = np.linspace(blo, bhi, k + 1)
        los.append(edges[:-1])
        his.append(edges[1:])
        sub.append(np.full(k, s))
    lo = np.concatenate(los)
    hi = np.concatenate(his)
    sub = np.concatenate(sub)
    h, scheme = _cell_bounds(pair, lo, hi)
    masses = pair_mass(pair, lo, hi)

    budget = eps / (S + 1)
    while True:
        excess = h * (hi - lo) / (a - 1.0) - masses
        per_sub = np.bincount(sub, weights=excess, minlength=S)
        counts = np.bincount(sub, minlength=S)
        over = per_sub > budget
        M = a * f_d0 / (a - 1.0) + float(np.sum(h * (hi - lo))) / (a - 1.0)
        if not over.any() and 1.0 / M >= delta:
            break
        if not over.any():
            # rounding left M a hair above 1/delta: tighten every subset
            budget *= 0.5
            continue
        trigger = over[sub] & (excess > (budget / counts)[sub])
        if lo.size + int(trigger.sum()) > max_cells:
            raise PartitionOverflow(
                f"{lo.size + int(trigger.sum())} cells needed (cap {max_cells}) for delta={delta}, eps={eps}"
            )
        keep = ~trigger
        mid = 0.5 * (lo[trigger] + hi[trigger])
        new_lo = np.concatenate([lo[keep], lo[trigger], mid])
        new_hi = np.concatenate([hi[keep], mid, hi[trigger]])
        new_sub = np.concatenate([sub[keep], sub[trigger], sub[trigger]])
        nh, ns = _cell_bounds(pair, new_lo[keep.sum():], new_hi[keep.sum():])
        nm = pair_mass(pair, new_lo[keep.sum():], new_hi[keep.sum():])
        h = np.concatenate([h[keep], nh])
        scheme = np.concatenate([scheme[keep], ns])
        masses = np.concatenate([masses[keep], nm])
        order = np.argsort(new_lo, kind="stable")
        lo, hi, sub = new_lo[order], new_hi[order], new_sub[order]
        h, scheme, masses = h[order], scheme[order], masses[order]

    masses = np.maximum(masses, 0.0)
    probs = np.concatenate(([mass0], masses))
    probs = probs / probs.sum()
    return Partition(pair, float(delta), float(eps), d0, lo, hi, h, masses, scheme,
                     mass0, f_d0, probs, M, S)


# ---------------------------------------------------------------------------
# stratified sampling
# ---------------------------------------------------------------------------


def stratified_batch(pair: TwoComponentPair, part: Partition, n: int, rng: RngStream):
    """n draws by the stratified scheme: one cell per draw, accept-reject inside it."""
    f, g, a = pair.f, pair.g, pair.a
    cells = np.searchsorted(part._cum, rng.random(n) * part._cum[-1], side="right")
    cells = np.minimum(cells, part.probs.size - 1)
    draws = np.empty(n)
    proposals = np.zeros(n, dtype=np.int64)
    pending = np.arange(n)
    while pending.size:
        k = cells[pending]
        x = np.empty(pending.size)
        env = np.empty(pending.size)
        tail = k == 0
        if tail.any():
            x[tail] = part._tail.sample(int(tail.sum()), rng)
            env[tail] = a * family_pdf(f.family, f.p1, f.p2, x[tail])
        inner = ~tail
        if inner.any():
            c = k[inner] - 1
            x[inner] = part.lo[c] + rng.random(c.size) * (part.hi[c] - part.lo[c])
            env[inner] = part.h[c]
        proposals[pending] += 1
        target = a * family_pdf(f.family, f.p1, f.p2, x) - family_pdf(g.family, g.p1, g.p2, x)
        ok = (rng.random(pending.size) * env <= target) & (env > 0)
        draws[pending[ok]] = x[ok]
        pending = pending[~ok]
    return draws, proposals


def stratified_sample(pair: TwoComponentPair, part: Partition, rng: RngStream) -> tuple[float, int]:
    d, p = stratified_batch(pair, part, 1, rng)
    return float(d[0]), int(p[0])
