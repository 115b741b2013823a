"""Numerical inversion of the mixture cdf.

A table of (q_i, p_i) pairs gives a piecewise-affine first guess of the
quantile, refined by regula falsi on the bracketing cell.  Outside the table
the bracket is grown geometrically until it contains the target level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .components import RngStream
from .errors import DomainError, MaxIterations
from .model import SignedMixtureModel, model_cdf

DEFAULT_TABLE_SIZE = 1024
DEFAULT_PRECISION = 1e-10
MAX_ITER = 10_000
TABLE_TAIL = 1e-8


@dataclass(frozen=True, eq=False)
class QuantileTable:
    q: np.ndarray
    p: np.ndarray
    precision: float = DEFAULT_PRECISION

    def __post_init__(self):
        if self.q.size < 2:
            raise ValueError("a quantile table needs at least two points")
        if np.any(np.diff(self.q) <= 0):
            raise ValueError("table abscissae must be strictly increasing")

    @property
    def n(self) -> int:
        return int(self.q.size)


def build_table(model: SignedMixtureModel, n: int = DEFAULT_TABLE_SIZE,
                precision: float = DEFAULT_PRECISION) -> QuantileTable:
    """n equally spaced points over the union of component 1e-8 quantile ranges."""
    if n < 2:
        raise ValueError("n must be at least 2")
    lo, hi = model.quantile_span(TABLE_TAIL)
    q = np.linspace(lo, hi, n)
    p = np.asarray(model_cdf(model, q), dtype=float)
    # m >= 0, so any decrease is rounding; enforce a monotone table
    p = np.maximum.accumulate(np.clip(p, 0.0, 1.0))
    return QuantileTable(q, p, precision)


@dataclass
class QuantileStats:
    iterations: list[int]
    bisection_fallbacks: int = 0


def _regula_falsi(cdf, u: float, ql: float, pl: float, qr: float, pr: float, eps: float,
                  stats: QuantileStats | None) -> float:
    """Refine inside a bracket with pl <= u <= pr; falls back to bisection on stalls."""
    if abs(pl - u) < eps:
        return ql
    if abs(pr - u) < eps:
        return qr
    side = 0
    for it in range(1, MAX_ITER + 1):
        slope = pr - pl
        if slope > 1e-300:
            qs = ((qr - ql) * u - pl * qr + pr * ql) / slope
        else:
            qs = math.nan
        bisect = not (ql < qs < qr) or side >= 2 or side <= -2
        if bisect:
            qs = 0.5 * (ql + qr)
            if stats is not None:
                stats.bisection_fallbacks += 1
            side = 0
        ps = float(cdf(qs))
        if abs(u - ps) < eps:
            if stats is not None:
                stats.iterations.append(it)
            return qs
        if ps < u:
            ql, pl = qs, ps
            side = side + 1 if side >= 0 else 1
        else:
            qr, pr = qs, ps
            side = side - 1 if side <= 0 else -1
        if not qr > ql or (qr - ql) <= 4 * np.spacing(max(abs(ql), abs(qr))):
            # the cdf jumps across u at machine resolution: q is as good as it gets
            if stats is not None:
                stats.iterations.append(it)
            return ql if abs(pl - u) <= abs(pr - u) else qr
    raise MaxIterations(f"no convergence for u = {u!r} after {MAX_ITER} iterations")


def _tail_bracket(cdf, u: float, table: QuantileTable, left: bool, lower_bound: float):
    """Step outward from the table end until the bracket contains u."""
    eps = table.precision
    q0, p0 = (table.q[0], table.p[0]) if left else (table.q[-1], table.p[-1])
    step = table.q[-1] - table.q[0]
    inner_q, inner_p = q0, p0
    for _ in range(MAX_ITER):
        q = q0 - step if left else q0 + step
        if left and q <= lower_bound:
            q = 0.5 * (lower_bound + inner_q)
        p = float(cdf(q))
        if left and p <= u + eps:
            return q, p, inner_q, inner_p
        if not left and p >= u - eps:
            return inner_q, inner_p, q, p
        inner_q, inner_p = q, p
        if left:
            q0 = q
        step *= 2.0
    raise MaxIterations(f"tail bracket for u = {u!r} not found")


def quantile(model: SignedMixtureModel, table: QuantileTable, u: float,
             stats: QuantileStats | None = None) -> float:
    """x with |m((-inf, x]) - u| < precision."""
    if not 0.0 < u < 1.0:
        raise DomainError(f"u = {u!r} must lie in (0, 1)")
    cdf = lambda x: model_cdf(model, x)
    eps = table.precision
    q, p = table.q, table.p
    lower = 0.0 if model.family.value == "gamma" else -math.inf
    if u < p[0]:
        ql, pl, qr, pr = _tail_bracket(cdf, u, table, True, lower)
        if pl > u:  # stopped within eps above u
            return ql
    elif u > p[-1]:
        ql, pl, qr, pr = _tail_bracket(cdf, u, table, False, lower)
        if pr < u:
            return qr
    else:
        i = int(np.searchsorted(p, u, side="left"))
        i = min(max(i, 1), q.size - 1)
        ql, pl, qr, pr = q[i - 1], p[i - 1], q[i], p[i]
    return _regula_falsi(cdf, u, ql, pl, qr, pr, eps, stats)


def sample_invcdf_batch(model: SignedMixtureModel, table: QuantileTable, n: int, rng: RngStream,
                        stats: QuantileStats | None = None) -> np.ndarray:
    u = rng.random(n)
    # rng.random can return exactly 0
    while np.any(u == 0.0):
        u[u == 0.0] = rng.random(int(np.sum(u == 0.0)))
    return np.array([quantile(model, table, float(v), stats) for v in u])


def sample_invcdf(model: SignedMixtureModel, table: QuantileTable, rng: RngStream) -> float:
    return float(sample_invcdf_batch(model, table, 1, rng)[0])
