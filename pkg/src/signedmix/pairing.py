"""Pairing of positive and negative components and the full-mixture sampler.

A pairing rewrites m as a mixture of non-negative two-component pairs
(w+ f_i - w- g_j) plus residual positives r_i f_i, minus residual
negatives s_j g_j.  The weights come from a linear program minimising the
expected number of proposals; sampling draws from the pair/residual proposal
and corrects for the negative residuals with one final accept-reject step.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .components import ComponentParams, Family, RngStream, family_pdf
from .errors import EmptyPairSet, NotPairable, ParameterDomain, RatioOverflow, SimplexFailure
from .model import SignedMixtureModel, model_pdf
from .pair import (
    Partition,
    TwoComponentPair,
    build_partition,
    log_a_star,
    pair_vanilla_batch,
    stratified_batch,
)
from .simplex import OPTIMAL, LpProblem, LpSolution, simplex_solve

WEIGHT_FLOOR = 1e-9
FEAS_TOL = 1e-9
RESIDUAL_FLOOR = 1e-12


@dataclass(frozen=True)
class AcceptablePairSet:
    entries: tuple[tuple[int, int, float], ...]
    by_positive: dict[int, tuple[int, ...]]
    by_negative: dict[int, tuple[int, ...]]

    def __len__(self) -> int:
        return len(self.entries)

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i, j, _ in self.entries]


def acceptable_pairs(model: SignedMixtureModel) -> AcceptablePairSet:
    """All (i, j) with finite sup g_j / f_i, indices into model.positives / negatives."""
    entries = []
    for i, (_, f) in enumerate(model.positives):
        for j, (_, g) in enumerate(model.negatives):
            try:
                la = log_a_star(f, g)
            except NotPairable:
                continue
            if la > 700:
                continue
            entries.append((i, j, math.exp(la)))
    if model.N and not entries:
        raise EmptyPairSet("no positive component dominates any negative component")
    by_pos: dict[int, list[int]] = {}
    by_neg: dict[int, list[int]] = {}
    for e, (i, j, _) in enumerate(entries):
        by_pos.setdefault(i, []).append(e)
        by_neg.setdefault(j, []).append(e)
    return AcceptablePairSet(
        tuple(entries),
        {k: tuple(v) for k, v in by_pos.items()},
        {k: tuple(v) for k, v in by_neg.items()},
    )


def pairing_lp(model: SignedMixtureModel, pairs: AcceptablePairSet, delta: float) -> LpProblem:
    """LP over (w+_e, w-_e): |E| domination rows, then P positive and N negative capacity rows."""
    E, P, N = len(pairs), model.P, model.N
    c = np.empty(2 * E)
    c[:E] = 1.0 - delta
    c[E:] = -1.0
    A = np.zeros((E + P + N, 2 * E))
    b = np.zeros(E + P + N)
    for e, (i, j, ast) in enumerate(pairs.entries):
        # a* w- - w+ <= 0, divided by a* for conditioning
        A[e, e] = -1.0 / ast
        A[e, E + e] = 1.0
        A[E + i, e] = 1.0
        A[E + P + j, E + e] = 1.0
    b[E:E + P] = model.pos_w
    b[E + P:] = model.neg_w
    return LpProblem(c, A, b)


@dataclass(frozen=True)
class PairEntry:
    i: int
    j: int
    w_plus: float
    w_minus: float
    a_star: float

    @property
    def a(self) -> float:
        return self.w_plus / self.w_minus if self.w_minus > 0 else math.inf

    @property
    def mass(self) -> float:
        return self.w_plus - self.w_minus

    def strategy(self, delta: float) -> str:
        return "vanilla" if (1.0 - delta) * self.w_plus - self.w_minus >= 0 else "stratified"


@dataclass(eq=False)
class Pairing:
    model: SignedMixtureModel
    delta: float
    eps: float
    entries: tuple[PairEntry, ...]
    r: np.ndarray
    s: np.ndarray
    C: float
    lp: LpSolution | None = None
    _partitions: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        w = np.array([e.mass for e in self.entries] + list(self.r), dtype=float)
        self.index_probs = w / w.sum()
        self._cum = np.cumsum(self.index_probs)
        model = self.model
        paired_neg = np.zeros(model.N)
        for e in self.entries:
            paired_neg[e.j] += e.w_minus
        self._paired_neg = paired_neg

    @property
    def strategies(self) -> list[str]:
        return [e.strategy(self.delta) for e in self.entries]

    @property
    def needs_final_accept(self) -> bool:
        return bool(np.any(self.s > 0))

    def pair(self, k: int) -> TwoComponentPair:
        e = self.entries[k]
        f = self.model.positives[e.i][1]
        g = self.model.negatives[e.j][1]
        return TwoComponentPair(f, g, max(e.a, e.a_star), e.a_star)

    def partition(self, k: int) -> Partition:
        """Partition of entry k, built on first use and cached."""
        part = self._partitions.get(k)
        if part is None:
            with self._lock:
                part = self._partitions.get(k)
                if part is None:
                    part = build_partition(self.pair(k), self.delta, self.eps)
                    self._partitions[k] = part
        return part

    def prepare(self) -> "Pairing":
        for k, st in enumerate(self.strategies):
            if st == "stratified":
                self.partition(k)
        return self

    def proposal_density(self, x):
        """C * pi(x): paired pair terms plus positive residuals."""
        m = self.model
        x = np.asarray(x, dtype=float)
        out = m.positive_density(x)
        for w, (_, g) in zip(self._paired_neg, m.negatives):
            if w > 0:
                out = out - w * family_pdf(g.family, g.p1, g.p2, x)
        return out

    def dump(self) -> str:
        lines = []
        for e, st in zip(self.entries, self.strategies):
            lines.append(f"pair {e.i + 1} {e.j + 1} {e.w_plus:.17g} {e.w_minus:.17g} {st}")
        for i, v in enumerate(self.r):
            lines.append(f"residual+ {i + 1} {v:.17g}")
        for j, v in enumerate(self.s):
            lines.append(f"residual- {j + 1} {v:.17g}")
        lines.append(f"C {self.C:.17g}")
        return "\n".join(lines) + "\n"


def _check_delta_eps(delta: float, eps: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ParameterDomain(f"delta = {delta!r} must lie in (0, 1)")
    if not 0.0 < eps < (1.0 - delta) / delta:
        raise ParameterDomain(f"eps = {eps!r} must lie in (0, {(1 - delta) / delta:.6g}) for delta = {delta}")


def optimal_pairing(model: SignedMixtureModel, delta: float, eps: float = 0.2,
                    pairs: AcceptablePairSet | None = None) -> Pairing:
    """Solve the pairing LP and materialise F, residuals and C."""
    _check_delta_eps(delta, eps)
    pos_w, neg_w = model.pos_w, model.neg_w
    if model.N == 0:
        return Pairing(model, delta, eps, (), pos_w.copy(), np.zeros(0), float(pos_w.sum()))
    pairs = acceptable_pairs(model) if pairs is None else pairs
    sol = simplex_solve(pairing_lp(model, pairs, delta))
    if sol.status != OPTIMAL:
        raise SimplexFailure(sol.status)
    E = len(pairs)
    wp, wm = sol.x[:E], sol.x[E:]
    entries = []
    for e, (i, j, ast) in enumerate(pairs.entries):
        p, q = float(wp[e]), float(wm[e])
        if p + q <= WEIGHT_FLOOR:
            continue
        # push solver slack on the domination constraint into the negative residual
        q = min(q, p / ast)
        if p - q <= 0.0:
            continue
        entries.append(PairEntry(i, j, p, q, ast))
    r = pos_w.copy()
    s = neg_w.copy()
    for e in entries:
        r[e.i] -= e.w_plus
        s[e.j] -= e.w_minus
    if r.min(initial=0.0) < -FEAS_TOL or s.min(initial=0.0) < -FEAS_TOL:
        raise SimplexFailure("infeasible")
    # rounding leftovers of saturated components are not residuals
    r[r < RESIDUAL_FLOOR * max(1.0, float(pos_w.max()))] = 0.0
    s[s < RESIDUAL_FLOOR * max(1.0, float(neg_w.max()))] = 0.0
    C = float(pos_w.sum() - sum(e.w_minus for e in entries))
    return Pairing(model, delta, eps, tuple(entries), r, s, C, sol)


def check_pairing(p: Pairing, tol: float = FEAS_TOL) -> list[str]:
    """Independent re-check of domination and capacity constraints; returns violations."""
    bad = []
    model = p.model
    sum_p = np.zeros(model.P)
    sum_m = np.zeros(model.N)
    for e in p.entries:
        if e.w_plus - e.a_star * e.w_minus < -tol:
            bad.append(f"pair ({e.i},{e.j}) violates domination")
        sum_p[e.i] += e.w_plus
        sum_m[e.j] += e.w_minus
    for i in np.flatnonzero(sum_p > model.pos_w + tol):
        bad.append(f"positive {i} over capacity")
    for j in np.flatnonzero(sum_m > model.neg_w + tol):
        bad.append(f"negative {j} over capacity")
    if not p.C > 0:
        bad.append("C not positive")
    return bad


@dataclass(frozen=True)
class Budget:
    identity: float       # 1/delta + (1 - 1/delta) sum r + (1/delta) sum s
    lemma_bound: float    # sum w+ + (1/delta) sum_F min(0, (1 - delta) w+ - w-)


def expected_budget(p: Pairing, delta: float | None = None) -> Budget:
    delta = p.delta if delta is None else delta
    sr, ss = float(p.r.sum()), float(p.s.sum())
    ident = 1.0 / delta + (1.0 - 1.0 / delta) * sr + ss / delta
    bound = float(p.model.pos_w.sum()) + sum(
        min(0.0, (1.0 - delta) * e.w_plus - e.w_minus) for e in p.entries
    ) / delta
    return Budget(ident, bound)


def expected_proposals(p: Pairing) -> float:
    """Exact mean proposals per accepted draw given the built partitions."""
    total = float(p.r.sum())
    for k, (e, st) in enumerate(zip(p.entries, p.strategies)):
        if st == "vanilla":
            total += e.w_plus
        else:
            total += e.mass * p.partition(k).M
    return total


def sample_mixture_batch(model: SignedMixtureModel, p: Pairing, n: int, rng: RngStream):
    """n exact draws from m; returns (draws, proposals per draw)."""
    n_pairs = len(p.entries)
    strategies = p.strategies
    final = p.needs_final_accept
    draws = np.empty(n)
    proposals = np.zeros(n, dtype=np.int64)
    pending = np.arange(n)
    while pending.size:
        size = pending.size
        idx = np.searchsorted(p._cum, rng.random(size) * p._cum[-1], side="right")
        idx = np.minimum(idx, p._cum.size - 1)
        x = np.empty(size)
        used = np.zeros(size, dtype=np.int64)
        for k in np.unique(idx):
            sel = np.flatnonzero(idx == k)
            if k < n_pairs:
                pair = p.pair(int(k))
                if strategies[k] == "vanilla":
                    d, c = pair_vanilla_batch(pair, sel.size, rng)
                else:
                    d, c = stratified_batch(pair, p.partition(int(k)), sel.size, rng)
            else:
                f = model.positives[int(k) - n_pairs][1]
                d = _sample_component(f, sel.size, rng)
                c = 1
            x[sel] = d
            used[sel] = c
        proposals[pending] += used
        if final:
            target = model_pdf(model, x)
            cpi = p.proposal_density(x)
            # cancellation noise scales with the positive part, not with m
            over = target > cpi * (1.0 + 1e-9) + 1e-12 * model.positive_density(x)
            if np.any(over):
                raise RatioOverflow(f"m / (C pi) exceeds one at x = {x[over][0]!r}")
            ok = rng.random(size) * cpi <= target
        else:
            ok = np.ones(size, dtype=bool)
        draws[pending[ok]] = x[ok]
        pending = pending[~ok]
    return draws, proposals


def sample_mixture(model: SignedMixtureModel, p: Pairing, rng: RngStream) -> tuple[float, int]:
    d, c = sample_mixture_batch(model, p, 1, rng)
    return float(d[0]), int(c[0])


def _sample_component(f: ComponentParams, n: int, rng: RngStream) -> np.ndarray:
    if f.family is Family.NORMAL:
        return rng.normal(f.p1, math.sqrt(f.p2), size=n)
    return rng.gamma(f.p1, 1.0 / f.p2, size=n)
