"""Benchmark harness comparing the vanilla, stratified and inverse-cdf samplers."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .components import ComponentParams, Family, make_rng
from .errors import SignedMixError
from .invcdf import DEFAULT_PRECISION, build_table, sample_invcdf_batch
from .model import SignedMixtureModel, vanilla_sample_batch
from .pair import a_star
from .pairing import expected_proposals, optimal_pairing, sample_mixture_batch

log = logging.getLogger(__name__)

METHODS = ("vanilla", "stratified", "invcdf")
DEFAULT_DELTAS = (0.4, 0.6, 0.8)
DEFAULT_EPS = (0.1, 0.2, 0.5, 1.0)
DEFAULT_NS = (10, 100, 1000, 10_000)

COLUMNS = ("family", "method", "delta", "eps", "n", "accepted", "proposed", "delta_hat", "wall_ns",
           "theory_delta", "R_n", "Q_n")
TIMING_COLUMNS = ("wall_ns", "R_n", "Q_n")


# ---------------------------------------------------------------------------
# alternating fixtures
# ---------------------------------------------------------------------------


ALTERNATING_K = {Family.NORMAL: 51, Family.GAMMA: 41}


def alternating_pair(family: Family, k: int) -> tuple[ComponentParams, ComponentParams]:
    """The k-th (1-based) positive/negative components of the alternating fixture."""
    family = Family(family)
    if family is Family.NORMAL:
        mu = 0.2 * (k - 1)
        sd = 0.25 + 0.015 * (k - 1)
        return ComponentParams.normal(mu, sd * sd), ComponentParams.normal(mu + 0.01, (sd - 0.01) ** 2)
    alpha = 1.0 + 0.1 * (k - 1)
    beta = 0.25 + 0.04375 * (k - 1)
    return ComponentParams.gamma(alpha, beta), ComponentParams.gamma(alpha + 0.01, beta + 0.01)


def printed_a_star(family: Family, k: int) -> float:
    """The closed form printed next to the fixture definitions (kept for reporting only)."""
    family = Family(family)
    if family is Family.NORMAL:
        s = 0.25 + 0.015 * (k - 1)
        return s / (s - 0.1) * math.exp(0.01 / (4.0 * s - 0.02))
    alpha = 1.0 + 0.1 * (k - 1)
    beta = 0.25 + 0.04375 * (k - 1)
    return (math.exp(math.lgamma(alpha) - math.lgamma(alpha + 0.1 * (k - 1)))
            * (beta / (beta + 0.01)) ** (0.01 * (k - 1)) * math.exp(0.01 * (1 - k)))


def build_alternating_model(family: Family, K: int | None = None) -> SignedMixtureModel:
    """Convex combination of saturated pairs with weights proportional to a*/(a* - 1)."""
    family = Family(family)
    K = ALTERNATING_K[family] if K is None else int(K)
    pairs = [alternating_pair(family, k) for k in range(1, K + 1)]
    consts = [a_star(f, g) for f, g in pairs]
    lam = np.array([a / (a - 1.0) for a in consts])
    lam /= lam.sum()
    pos = tuple((l * a / (a - 1.0), f) for l, a, (f, _) in zip(lam, consts, pairs))
    neg = tuple((l / (a - 1.0), g) for l, a, (_, g) in zip(lam, consts, pairs))
    return SignedMixtureModel(pos, neg)


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    model: SignedMixtureModel
    label: str = ""
    methods: tuple[str, ...] = METHODS
    deltas: tuple[float, ...] = DEFAULT_DELTAS
    eps: tuple[float, ...] = DEFAULT_EPS
    ns: tuple[int, ...] = DEFAULT_NS
    seed: int = 0
    precision: float = DEFAULT_PRECISION
    parallel: bool = False
    workers: int | None = None

    def __post_init__(self):
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}")
        if any(n < 1 for n in self.ns):
            raise ValueError("n must be at least 1")
        if any(not 0 < d < 1 for d in self.deltas):
            raise ValueError("delta must lie in (0, 1)")

    def cells(self) -> list[tuple[str, float, float, int]]:
        """(method, delta, eps, n) in a fixed order; eps values outside (0, (1-delta)/delta) are skipped."""
        out = []
        for method in self.methods:
            for n in self.ns:
                if method == "stratified":
                    for d in self.deltas:
                        for e in self.eps:
                            if 0 < e < (1.0 - d) / d:
                                out.append((method, d, e, n))
                else:
                    out.append((method, math.nan, math.nan, n))
        return out


@dataclass
class CellResult:
    method: str
    delta: float
    eps: float
    n: int
    accepted: int = 0
    proposed: int = 0
    wall_ns: int = 0
    theory_delta: float = math.nan
    R_n: float = math.nan
    Q_n: float = math.nan
    error: str | None = None
    draws: np.ndarray | None = field(default=None, repr=False)

    @property
    def delta_hat(self) -> float:
        return self.accepted / self.proposed if self.proposed else math.nan


@dataclass
class RunResult:
    label: str
    cells: list[CellResult]

    @property
    def errors(self) -> list[CellResult]:
        return [c for c in self.cells if c.error is not None]

    def rows(self) -> list[list[str]]:
        out = []
        for c in self.cells:
            out.append([
                self.label, c.method, _fmt(c.delta), _fmt(c.eps), str(c.n), str(c.accepted), str(c.proposed),
                _fmt(c.delta_hat), str(c.wall_ns), _fmt(c.theory_delta), _fmt(c.R_n), _fmt(c.Q_n),
            ])
        return out

    def to_tsv(self, timing: bool = True) -> str:
        keep = [i for i, name in enumerate(COLUMNS) if timing or name not in TIMING_COLUMNS]
        lines = ["\t".join(COLUMNS[i] for i in keep)]
        for r in self.rows():
            lines.append("\t".join(r[i] for i in keep))
        return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "NA"
    return f"{v:.6g}"


def cell_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for cell ``index``; unaffected by scheduling order."""
    return make_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def run_cell(model: SignedMixtureModel, method: str, delta: float, eps: float, n: int,
             rng: np.random.Generator, precision: float = DEFAULT_PRECISION,
             keep_draws: bool = False) -> CellResult:
    res = CellResult(method, delta, eps, n)
    try:
        t0 = time.perf_counter_ns()
        if method == "vanilla":
            draws, props = vanilla_sample_batch(model, n, rng)
            theory = model.vanilla_acceptance
        elif method == "stratified":
            pairing = optimal_pairing(model, delta, eps)
            draws, props = sample_mixture_batch(model, pairing, n, rng)
            theory = None
        else:
            table = build_table(model, precision=precision)
            draws = sample_invcdf_batch(model, table, n, rng)
            props = np.ones(n, dtype=np.int64)
            theory = 1.0
        res.wall_ns = time.perf_counter_ns() - t0
        if theory is None:
            theory = 1.0 / expected_proposals(pairing)
        res.accepted = int(draws.size)
        res.proposed = int(props.sum())
        res.theory_delta = float(theory)
        if keep_draws:
            res.draws = draws
    except SignedMixError as exc:
        res.error = f"{type(exc).__name__}: {exc}"
        log.warning("cell %s delta=%s eps=%s n=%s failed: %s", method, delta, eps, n, res.error)
    return res


def run_compare(config: RunConfig) -> RunResult:
    """Run every cell of ``config``; timing includes per-cell setup."""
    cells = config.cells()
    model = config.model

    def job(k: int) -> CellResult:
        method, d, e, n = cells[k]
        return run_cell(model, method, d, e, n, cell_rng(config.seed, k), config.precision)

    if config.parallel:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(job, range(len(cells))))
    else:
        results = [job(k) for k in range(len(cells))]
    _relative_efficiencies(results)
    return RunResult(config.label or model.family.value, results)


def _relative_efficiencies(results: Sequence[CellResult]) -> None:
    van = {r.n: r.wall_ns for r in results if r.method == "vanilla" and r.error is None}
    inv = {r.n: r.wall_ns for r in results if r.method == "invcdf" and r.error is None}
    for r in results:
        if r.error is not None or r.wall_ns <= 0:
            continue
        if r.n in van:
            r.R_n = van[r.n] / r.wall_ns
        if r.n in inv:
            r.Q_n = inv[r.n] / r.wall_ns


def strip_timing(tsv: str) -> str:
    """Drop the wall-time derived columns from a result table."""
    lines = tsv.rstrip("\n").split("\n")
    header = lines[0].split("\t")
    keep = [i for i, name in enumerate(header) if name not in TIMING_COLUMNS]
    return "\n".join("\t".join(line.split("\t")[i] for i in keep) for line in lines) + "\n"


def parse_floats(text: str | Iterable[float]) -> tuple[float, ...]:
    if isinstance(text, str):
        return tuple(float(v) for v in text.split(",") if v.strip())
    return tuple(float(v) for v in text)
