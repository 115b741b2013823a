"""Normal and Gamma component primitives.

Normal components are parametrised by (mean, variance) and Gamma components
by (shape, rate).  Every function here is vectorised over ``x`` and over the
parameter arrays, which lets the mixture layer evaluate all components of a
model in a single broadcast.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from .errors import DegenerateTruncation, DomainError

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

RngStream = np.random.Generator


def make_rng(seed: int | np.random.SeedSequence) -> RngStream:
    """Seeded PCG64 stream; identical seeds give identical draw sequences."""
    return np.random.Generator(np.random.PCG64(seed))


class Family(str, enum.Enum):
    NORMAL = "normal"
    GAMMA = "gamma"


@dataclass(frozen=True)
class ComponentParams:
    """One component density.

    ``p1`` is the Normal mean or the Gamma shape, ``p2`` the Normal variance
    or the Gamma rate.
    """

    family: Family
    p1: float
    p2: float

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "p1", float(self.p1))
        object.__setattr__(self, "p2", float(self.p2))
        if not (math.isfinite(self.p1) and math.isfinite(self.p2)):
            raise DomainError(f"non-finite parameters {self.p1}, {self.p2}")
        if self.p2 <= 0:
            raise DomainError(f"second parameter must be positive, got {self.p2}")
        if self.family is Family.GAMMA and self.p1 <= 0:
            raise DomainError(f"Gamma shape must be positive, got {self.p1}")

    @classmethod
    def normal(cls, mean: float, var: float) -> "ComponentParams":
        return cls(Family.NORMAL, mean, var)

    @classmethod
    def gamma(cls, shape: float, rate: float) -> "ComponentParams":
        return cls(Family.GAMMA, shape, rate)

    @property
    def support(self) -> tuple[float, float]:
        if self.family is Family.NORMAL:
            return (-math.inf, math.inf)
        return (0.0, math.inf)

    @property
    def mode(self) -> float:
        if self.family is Family.NORMAL:
            return self.p1
        return max(0.0, (self.p1 - 1.0) / self.p2)

    @functools.cached_property
    def median(self) -> float:
        return float(quantile(self, 0.5))

    def pdf(self, x):
        return pdf(self, x)

    def cdf(self, x):
        return cdf(self, x)

    def __str__(self):
        return f"{self.family.value}({self.p1:.17g}, {self.p2:.17g})"


# ---------------------------------------------------------------------------
# family-level kernels (broadcast over x, p1, p2)
# ---------------------------------------------------------------------------


def family_logpdf(family: Family, p1, p2, x):
    x = np.asarray(x, dtype=float)
    if family is Family.NORMAL:
        return -0.5 * (x - p1) ** 2 / p2 - 0.5 * np.log(p2) - LOG_SQRT_2PI
    shape, rate = np.asarray(p1, dtype=float), np.asarray(p2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        xpos = np.where(x > 0, x, 1.0)
        out = shape * np.log(rate) + (shape - 1.0) * np.log(xpos) - rate * xpos - special.gammaln(shape)
        at_zero = np.where(shape < 1, np.inf, np.where(shape == 1, np.log(rate), -np.inf))
        out = np.where(x > 0, out, np.where(x == 0, at_zero, -np.inf))
    return out


def family_pdf(family: Family, p1, p2, x):
    return np.exp(family_logpdf(family, p1, p2, x))


def family_cdf(family: Family, p1, p2, x):
    x = np.asarray(x, dtype=float)
    if family is Family.NORMAL:
        return special.ndtr((x - p1) / np.sqrt(p2))
    return special.gammainc(p1, np.maximum(x, 0.0) * p2)


def family_sf(family: Family, p1, p2, x):
    x = np.asarray(x, dtype=float)
    if family is Family.NORMAL:
        return special.ndtr((p1 - x) / np.sqrt(p2))
    return special.gammaincc(p1, np.maximum(x, 0.0) * p2)


def _gamma_polish(shape, rate, x, target, upper: bool):
    # Two safeguarded Newton steps on the (complementary) incomplete gamma.
    for _ in range(2):
        dens = family_pdf(Family.GAMMA, shape, rate, x)
        if upper:
            resid = target - family_sf(Family.GAMMA, shape, rate, x)
        else:
            resid = family_cdf(Family.GAMMA, shape, rate, x) - target
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where((dens > 0) & np.isfinite(dens), resid / dens, 0.0)
        cand = x - step
        ok = np.isfinite(cand) & (cand > 0.5 * x) & (cand < 2.0 * x + 1e-300)
        x = np.where(ok, cand, x)
    return x


def family_quantile(family: Family, p1, p2, u):
    u = np.asarray(u, dtype=float)
    if family is Family.NORMAL:
        return p1 + np.sqrt(p2) * special.ndtri(u)
    x = special.gammaincinv(p1, u) / p2
    return _gamma_polish(p1, p2, x, u, upper=False)


def family_isf(family: Family, p1, p2, q):
    """Inverse survival function: the x with P(X > x) = q."""
    q = np.asarray(q, dtype=float)
    if family is Family.NORMAL:
        return p1 - np.sqrt(p2) * special.ndtri(q)
    x = special.gammainccinv(p1, q) / p2
    return _gamma_polish(p1, p2, x, q, upper=True)


# ---------------------------------------------------------------------------
# single-component API
# ---------------------------------------------------------------------------


def _scalar_or_array(out, like):
    return float(out) if np.ndim(like) == 0 else out


def pdf(params: ComponentParams, x):
    return _scalar_or_array(family_pdf(params.family, params.p1, params.p2, x), x)


def logpdf(params: ComponentParams, x):
    return _scalar_or_array(family_logpdf(params.family, params.p1, params.p2, x), x)


def cdf(params: ComponentParams, x):
    return _scalar_or_array(family_cdf(params.family, params.p1, params.p2, x), x)


def sf(params: ComponentParams, x):
    return _scalar_or_array(family_sf(params.family, params.p1, params.p2, x), x)


def quantile(params: ComponentParams, u):
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr <= 0) | (u_arr >= 1)) or np.any(np.isnan(u_arr)):
        raise DomainError("quantile level must lie in (0, 1)")
    return _scalar_or_array(family_quantile(params.family, params.p1, params.p2, u_arr), u)


def isf(params: ComponentParams, q):
    q_arr = np.asarray(q, dtype=float)
    if np.any((q_arr <= 0) | (q_arr >= 1)) or np.any(np.isnan(q_arr)):
        raise DomainError("tail level must lie in (0, 1)")
    return _scalar_or_array(family_isf(params.family, params.p1, params.p2, q_arr), q)


def sample(params: ComponentParams, rng: RngStream, size=None):
    if params.family is Family.NORMAL:
        return rng.normal(params.p1, math.sqrt(params.p2), size=size)
    return rng.gamma(params.p1, 1.0 / params.p2, size=size)


def mass(params: ComponentParams, lo, hi):
    """P(lo < X <= hi), using the survival function right of the median."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    med = params.median
    left = family_cdf(params.family, params.p1, params.p2, hi) - family_cdf(params.family, params.p1, params.p2, lo)
    right = family_sf(params.family, params.p1, params.p2, lo) - family_sf(params.family, params.p1, params.p2, hi)
    out = np.where(lo >= med, right, left)
    return _scalar_or_array(np.maximum(out, 0.0), lo)


def extrema_on(params: ComponentParams, lo: float, hi: float) -> tuple[float, float]:
    """Exact (sup, inf) of the density on the bounded interval [lo, hi].

    Both families are unimodal, so the extrema sit at the endpoints or at the
    mode when it falls inside.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise DomainError(f"extrema need a bounded interval, got [{lo}, {hi}]")
    if params.family is Family.GAMMA and params.p1 < 1 and lo <= 0.0 <= hi:
        raise DomainError("Gamma density with shape < 1 is unbounded at 0")
    ends = [pdf(params, lo), pdf(params, hi)]
    sup = max(ends)
    if lo < params.mode < hi:
        sup = max(sup, pdf(params, params.mode))
    return sup, min(ends)


# ---------------------------------------------------------------------------
# interval sets and truncated sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = False
    hi_closed: bool = True

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def __str__(self):
        left = "[" if self.lo_closed and math.isfinite(self.lo) else "("
        right = "]" if self.hi_closed and math.isfinite(self.hi) else ")"
        return f"{left}{self.lo:.17g}, {self.hi:.17g}{right}"


@dataclass(frozen=True)
class IntervalSet:
    """Sorted union of disjoint intervals."""

    intervals: tuple[Interval, ...]

    def __post_init__(self):
        ivs = tuple(sorted(self.intervals, key=lambda iv: iv.lo))
        for iv in ivs:
            if iv.hi < iv.lo:
                raise ValueError(f"empty interval {iv}")
        for left, right in zip(ivs, ivs[1:]):
            if right.lo < left.hi:
                raise ValueError(f"overlapping intervals {left} and {right}")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def of(cls, *pairs: Sequence[float]) -> "IntervalSet":
        return cls(tuple(Interval(float(lo), float(hi)) for lo, hi in pairs))

    @classmethod
    def real_line(cls) -> "IntervalSet":
        return cls.of((-math.inf, math.inf))

    def __iter__(self) -> Iterable[Interval]:
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    @property
    def length(self) -> float:
        return sum(iv.length for iv in self.intervals)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for iv in self.intervals:
            out |= (x >= iv.lo) & (x <= iv.hi)
        return out

    def __str__(self):
        return " U ".join(str(iv) for iv in self.intervals) or "{}"


def region_mass(params: ComponentParams, region: IntervalSet) -> float:
    return float(sum(mass(params, iv.lo, iv.hi) for iv in region))


def truncated_sample(params: ComponentParams, region: IntervalSet, rng: RngStream, size=None):
    """Exact draws from ``params`` restricted to ``region`` by cdf inversion.

    Intervals right of the median are inverted through the survival function
    so that far right tails keep full relative precision.
    """
    masses = np.array([mass(params, iv.lo, iv.hi) for iv in region], dtype=float)
    total = masses.sum()
    if not total >= 1e-300:
        raise DegenerateTruncation(f"{params} has mass {total:g} on {region}")
    n = 1 if size is None else int(np.prod(size))
    if len(masses) == 1:
        which = np.zeros(n, dtype=np.intp)
    else:
        which = rng.choice(len(masses), size=n, p=masses / total)
    u = 1.0 - rng.random(n)  # in (0, 1]
    out = np.empty(n)
    med = params.median
    fam, p1, p2 = params.family, params.p1, params.p2
    for k, iv in enumerate(region):
        sel = which == k
        if not sel.any():
            continue
        uk = u[sel]
        if iv.lo >= med:
            s_lo = family_sf(fam, p1, p2, iv.lo)
            s_hi = family_sf(fam, p1, p2, iv.hi)
            t = s_hi + uk * (s_lo - s_hi)
            x = family_isf(fam, p1, p2, np.clip(t, 1e-320, 1.0 - 1e-16))
        else:
            c_lo = family_cdf(fam, p1, p2, iv.lo)
            c_hi = family_cdf(fam, p1, p2, iv.hi)
            t = c_lo + uk * (c_hi - c_lo)
            x = family_quantile(fam, p1, p2, np.clip(t, 1e-320, 1.0 - 1e-16))
        out[sel] = np.clip(x, iv.lo, iv.hi)
    if size is None:
        return float(out[0])
    return out.reshape(size)
