"""Signed mixture models: evaluation, validation, file format and the vanilla sampler."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .components import (
    ComponentParams,
    Family,
    IntervalSet,
    RngStream,
    family_cdf,
    family_isf,
    family_pdf,
    family_quantile,
    family_sf,
)
from .errors import DomainError, ModelFormatError

NORMALIZATION_TOL = 1e-8
POSITIVITY_TOL = 1e-12
_CHUNK = 1 << 15

Weighted = tuple[float, ComponentParams]


@dataclass(frozen=True, eq=False)
class SignedMixtureModel:
    """m = sum_k w+_k f_k - sum_k w-_k g_k, weights stored as positive numbers.

    Construction is lenient so that :func:`validate_model` can report every
    defect of a parsed file; evaluation requires a single family.
    """

    positives: tuple[Weighted, ...]
    negatives: tuple[Weighted, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "positives", tuple((float(w), c) for w, c in self.positives))
        object.__setattr__(self, "negatives", tuple((float(w), c) for w, c in self.negatives))

    @classmethod
    def from_arrays(cls, family, pos_w, pos_p1, pos_p2, neg_w=(), neg_p1=(), neg_p2=()):
        family = Family(family)
        pos = [(w, ComponentParams(family, a, b)) for w, a, b in zip(pos_w, pos_p1, pos_p2)]
        neg = [(w, ComponentParams(family, a, b)) for w, a, b in zip(neg_w, neg_p1, neg_p2)]
        return cls(tuple(pos), tuple(neg))

    @property
    def P(self) -> int:
        return len(self.positives)

    @property
    def N(self) -> int:
        return len(self.negatives)

    @property
    def components(self) -> list[ComponentParams]:
        return [c for _, c in self.positives] + [c for _, c in self.negatives]

    @property
    def families(self) -> set[Family]:
        return {c.family for c in self.components}

    @cached_property
    def family(self) -> Family:
        fams = self.families
        if len(fams) != 1:
            raise DomainError(f"model mixes families {sorted(f.value for f in fams)}")
        return fams.pop()

    @cached_property
    def pos_w(self) -> np.ndarray:
        return np.array([w for w, _ in self.positives], dtype=float)

    @cached_property
    def neg_w(self) -> np.ndarray:
        return np.array([w for w, _ in self.negatives], dtype=float)

    @cached_property
    def _pos_params(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([c.p1 for _, c in self.positives], dtype=float),
                np.array([c.p2 for _, c in self.positives], dtype=float))

    @cached_property
    def _neg_params(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([c.p1 for _, c in self.negatives], dtype=float),
                np.array([c.p2 for _, c in self.negatives], dtype=float))

    @property
    def total_positive(self) -> float:
        return float(self.pos_w.sum())

    @property
    def total_negative(self) -> float:
        return float(self.neg_w.sum()) if self.N else 0.0

    @property
    def vanilla_acceptance(self) -> float:
        """Average acceptance of accept-reject from the positive part."""
        return 1.0 / self.total_positive

    def scaled(self, factor: float) -> "SignedMixtureModel":
        return SignedMixtureModel(
            tuple((w / factor, c) for w, c in self.positives),
            tuple((w / factor, c) for w, c in self.negatives),
        )

    # evaluation helpers -------------------------------------------------

    def _sum(self, kernel, x, which: str) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        if which == "pos":
            (p1, p2), w = self._pos_params, self.pos_w
        else:
            (p1, p2), w = self._neg_params, self.neg_w
        out = np.zeros(flat.shape)
        if len(w) == 0:
            return out.reshape(x.shape)
        fam = self.family
        for start in range(0, flat.size, _CHUNK):
            xs = flat[start:start + _CHUNK, None]
            out[start:start + _CHUNK] = kernel(fam, p1[None, :], p2[None, :], xs) @ w
        return out.reshape(x.shape)

    def positive_density(self, x):
        """sum_k w+_k f_k(x), i.e. the unnormalised positive part."""
        return self._sum(family_pdf, x, "pos")

    def negative_density(self, x):
        return self._sum(family_pdf, x, "neg")

    def quantile_span(self, tail: float) -> tuple[float, float]:
        """Union of the [tail, 1 - tail] quantile ranges of all components."""
        lo, hi = math.inf, -math.inf
        for c in self.components:
            lo = min(lo, float(family_quantile(c.family, c.p1, c.p2, tail)))
            hi = max(hi, float(family_isf(c.family, c.p1, c.p2, tail)))
        return lo, hi


def _as_output(out, x):
    return float(out) if np.ndim(x) == 0 else out


def model_pdf(model: SignedMixtureModel, x):
    """Signed mixture density; may dip to about -1e-12 through rounding."""
    return _as_output(model.positive_density(x) - model.negative_density(x), x)


def model_cdf(model: SignedMixtureModel, x):
    return _as_output(model._sum(family_cdf, x, "pos") - model._sum(family_cdf, x, "neg"), x)


def model_sf(model: SignedMixtureModel, x):
    return _as_output(model._sum(family_sf, x, "pos") - model._sum(family_sf, x, "neg"), x)


def _component_masses(family, p1, p2, lo, hi):
    med = family_quantile(family, p1, p2, 0.5)
    left = family_cdf(family, p1, p2, hi) - family_cdf(family, p1, p2, lo)
    right = family_sf(family, p1, p2, lo) - family_sf(family, p1, p2, hi)
    return np.where(lo >= med, right, left)


def interval_masses(model: SignedMixtureModel, lo, hi) -> np.ndarray:
    """Signed mass of m on each interval (lo[i], hi[i]]."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))[:, None]
    hi = np.atleast_1d(np.asarray(hi, dtype=float))[:, None]
    fam = model.family
    p1, p2 = model._pos_params
    out = _component_masses(fam, p1[None, :], p2[None, :], lo, hi) @ model.pos_w
    if model.N:
        q1, q2 = model._neg_params
        out = out - _component_masses(fam, q1[None, :], q2[None, :], lo, hi) @ model.neg_w
    return out


def model_mass(model: SignedMixtureModel, region: IntervalSet) -> float:
    """Signed mass m(region) through component cdfs."""
    if len(region) == 0:
        return 0.0
    lo = [iv.lo for iv in region]
    hi = [iv.hi for iv in region]
    return float(interval_masses(model, lo, hi).sum())


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass
class ValidationReport:
    ok: bool
    failures: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    normalization: float = math.nan
    min_value: float = math.nan
    min_location: float = math.nan
    normalized: SignedMixtureModel | None = None

    def __str__(self):
        lines = ["valid" if self.ok else "invalid"]
        lines += [f"failure: {f}" for f in self.failures]
        lines += [f"note: {n}" for n in self.notes]
        if math.isfinite(self.min_value):
            lines.append(f"min probed density {self.min_value:.6g} at x = {self.min_location:.6g}")
        return "\n".join(lines)


def positivity_grid(model: SignedMixtureModel, n: int = 512, tail: float = 1e-6) -> np.ndarray:
    """Probe grid: n points over the component quantile span, refined x4 near small values."""
    lo, hi = model.quantile_span(tail)
    if model.family is Family.GAMMA:
        lo = max(lo, 0.0)
    grid = np.linspace(lo, hi, n)
    modes = [c.mode for c in model.components if lo <= c.mode <= hi]
    grid = np.union1d(grid, modes)
    vals = model_pdf(model, grid)
    low = np.flatnonzero(vals < 1e-6)
    if low.size:
        extra = []
        for i in low:
            a = grid[max(i - 1, 0)]
            b = grid[min(i + 1, grid.size - 1)]
            extra.append(np.linspace(a, b, 9))
        grid = np.union1d(grid, np.concatenate(extra))
    return grid


def validate_model(model: SignedMixtureModel, grid_points: int = 512) -> ValidationReport:
    """Check weights, families, parameter domains and probe positivity.

    Never raises: every defect becomes an entry of ``failures``.  When the
    only normalisation defect is a positive scale factor, the rescaled model
    is offered in ``normalized`` and the positivity probe is run on it.
    """
    rep = ValidationReport(ok=True)
    if model.P < 1:
        rep.failures.append("no positive component")
    if len(model.families) > 1:
        rep.failures.append("components mix families " + ", ".join(sorted(f.value for f in model.families)))
    for sign, comps in (("+", model.positives), ("-", model.negatives)):
        for k, (w, c) in enumerate(comps):
            if not (w > 0 and math.isfinite(w)):
                rep.failures.append(f"weight {sign}{k} must be positive and finite, got {w}")
    if rep.failures:
        rep.ok = False
        return rep

    factor = model.total_positive - model.total_negative
    rep.normalization = factor
    target = model
    if abs(factor - 1.0) > NORMALIZATION_TOL:
        rep.ok = False
        if factor > 0:
            rep.failures.append(f"unnormalized, factor {round(factor, 12)!r}")
            rep.normalized = model.scaled(factor)
            target = rep.normalized
        else:
            rep.failures.append(f"total signed weight {factor:.6g} is not positive")
            return rep

    grid = positivity_grid(target, grid_points)
    vals = model_pdf(target, grid)
    scale = target.positive_density(grid) + target.negative_density(grid)
    k = int(np.argmin(vals))
    rep.min_value, rep.min_location = float(vals[k]), float(grid[k])
    bad = vals < -POSITIVITY_TOL * np.maximum(1.0, scale)
    if bad.any():
        rep.ok = False
        first = grid[bad][0]
        rep.failures.append(f"density negative on {int(bad.sum())} probe points (first at x = {first:.6g})")
    elif rep.normalized is not None:
        rep.notes.append("rescaled model passes the positivity probe")
    return rep


# ---------------------------------------------------------------------------
# vanilla accept-reject from the positive part
# ---------------------------------------------------------------------------


def sample_components(family: Family, p1: np.ndarray, p2: np.ndarray, rng: RngStream) -> np.ndarray:
    """One draw per entry of the (already gathered) parameter arrays."""
    if family is Family.NORMAL:
        return rng.normal(p1, np.sqrt(p2))
    return rng.gamma(p1, 1.0 / p2)


def propose_positive(model: SignedMixtureModel, n: int, rng: RngStream) -> np.ndarray:
    p1, p2 = model._pos_params
    idx = rng.choice(model.P, size=n, p=model.pos_w / model.total_positive)
    return sample_components(model.family, p1[idx], p2[idx], rng)


def vanilla_sample_batch(model: SignedMixtureModel, n: int, rng: RngStream):
    """n exact draws from m and the number of m+ proposals behind each.

    Proposals are generated in chunks; acceptances are consumed in proposal
    order, so the result equals a sequential accept-reject run.
    """
    draws = np.empty(n)
    proposals = np.empty(n, dtype=np.int64)
    if model.N == 0:
        draws[:] = propose_positive(model, n, rng)
        proposals[:] = 1
        return draws, proposals
    rate = model.vanilla_acceptance
    filled, carried = 0, 0
    while filled < n:
        need = n - filled
        chunk = int(min(max(need / rate * 1.1 + 64, 256), 1 << 18))
        x = propose_positive(model, chunk, rng)
        u = rng.random(chunk)
        pos = model.positive_density(x)
        neg = model.negative_density(x)
        accepted = np.flatnonzero(u * pos <= pos - neg)
        take = accepted[:need]
        if take.size:
            gaps = np.diff(np.concatenate(([-1], take)))
            gaps[0] += carried
            draws[filled:filled + take.size] = x[take]
            proposals[filled:filled + take.size] = gaps
            filled += take.size
            carried = chunk - 1 - take[-1] if filled < n else 0
        else:
            carried += chunk
    return draws, proposals


def vanilla_sample_model(model: SignedMixtureModel, rng: RngStream) -> tuple[float, int]:
    draws, props = vanilla_sample_batch(model, 1, rng)
    return float(draws[0]), int(props[0])


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------


def parse_model(text: str) -> SignedMixtureModel:
    family = None
    pos, neg = [], []
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if family is None:
            if len(parts) != 2 or parts[0] != "family" or parts[1] not in ("normal", "gamma"):
                raise ModelFormatError(f"line {lineno}: expected 'family normal|gamma', got {line!r}")
            family = Family(parts[1])
            continue
        if len(parts) != 4 or parts[0] not in ("+", "-"):
            raise ModelFormatError(f"line {lineno}: expected '<+|-> <weight> <p1> <p2>', got {line!r}")
        try:
            w, p1, p2 = (float(v) for v in parts[1:])
        except ValueError as exc:
            raise ModelFormatError(f"line {lineno}: {exc}") from None
        try:
            comp = ComponentParams(family, p1, p2)
        except DomainError as exc:
            raise ModelFormatError(f"line {lineno}: {exc}") from None
        (pos if parts[0] == "+" else neg).append((w, comp))
    if family is None:
        raise ModelFormatError("empty model file")
    return SignedMixtureModel(tuple(pos), tuple(neg))


def format_model(model: SignedMixtureModel, header: Sequence[str] = ()) -> str:
    out = [f"# {h}" for h in header]
    out.append(f"family {model.family.value}")
    for sign, comps in (("+", model.positives), ("-", model.negatives)):
        for w, c in comps:
            out.append(f"{sign} {w:.17g} {c.p1:.17g} {c.p2:.17g}")
    return "\n".join(out) + "\n"


def load_model(path: str | Path) -> SignedMixtureModel:
    return parse_model(Path(path).read_text(encoding="utf-8"))


def save_model(model: SignedMixtureModel, path: str | Path, header: Iterable[str] = ()) -> None:
    Path(path).write_text(format_model(model, tuple(header)), encoding="utf-8")


def example1_model() -> SignedMixtureModel:
    """The four-component Normal example, unnormalised (total signed weight 2)."""
    n = ComponentParams.normal
    return SignedMixtureModel(
        ((2.0, n(0.0, 1.0)), (1.8, n(0.5, 1.0))),
        ((1.0, n(0.25, 0.25)), (0.8, n(0.75, 0.16))),
    )
