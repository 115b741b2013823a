"""Dense two-phase tableau simplex for small and medium linear programs.

Problems are stated as ``minimize c @ x`` subject to row constraints
``A[i] @ x (<=|>=|=) b[i]`` and ``x >= 0``.  Pricing is Dantzig's rule with a
tiny index-proportional perturbation of the costs; after 2 (n + m)
iterations it switches to Bland's rule, which cannot cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-9
PERTURBATION = 1e-11

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
CYCLED = "cycled"


@dataclass(frozen=True)
class LpProblem:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    senses: tuple[str, ...] | None = None  # per row: "<=", ">=" or "="; default all "<="

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float)
        if A.shape != (b.size, c.size):
            raise ValueError(f"constraint matrix shape {A.shape} does not match ({b.size}, {c.size})")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("non-finite coefficients")
        senses = tuple(self.senses) if self.senses is not None else ("<=",) * b.size
        if len(senses) != b.size or any(s not in ("<=", ">=", "=") for s in senses):
            raise ValueError("senses must be '<=', '>=' or '=' per row")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "senses", senses)

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_constraints(self) -> int:
        return self.b.size


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    objective: float
    status: str
    iterations: int
    reduced_costs: np.ndarray | None = None


class _Tableau:
    def __init__(self, T: np.ndarray, basis: np.ndarray):
        self.T = T
        self.basis = basis

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] /= T[row, col]
        colv = T[:, col].copy()
        colv[row] = 0.0
        rows = np.flatnonzero(colv)
        if rows.size:
            prow = T[row]
            cols = np.flatnonzero(prow)
            T[np.ix_(rows, cols)] -= np.outer(colv[rows], prow[cols])
            T[rows, col] = 0.0
        self.basis[row] = col

    def run(self, allowed: np.ndarray, bland_after: int, max_iter: int) -> tuple[str, int]:
        T = self.T
        m = T.shape[0] - 1
        it = 0
        while True:
            d = T[m, :-1]
            candidates = np.flatnonzero((d < -TOL) & allowed)
            if candidates.size == 0:
                return OPTIMAL, it
            if it >= max_iter:
                return CYCLED, it
            if it >= bland_after:
                col = int(candidates[0])
            else:
                col = int(candidates[np.argmin(d[candidates])])
            colv = T[:m, col]
            pos = np.flatnonzero(colv > TOL)
            if pos.size == 0:
                return UNBOUNDED, it
            ratios = T[pos, -1] / colv[pos]
            best = ratios.min()
            ties = pos[ratios <= best + TOL * max(1.0, abs(best))]
            row = int(ties[np.argmin(self.basis[ties])])
            self.pivot(row, col)
            it += 1


def simplex_solve(problem: LpProblem, max_iter: int | None = None) -> LpSolution:
    """Solve ``problem``; returns an LpSolution whose status may be non-optimal."""
    A, b, c = problem.A.copy(), problem.b.copy(), problem.c
    m, n = A.shape
    senses = list(problem.senses)
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    for i in np.flatnonzero(flip):
        senses[i] = {"<=": ">=", ">=": "<=", "=": "="}[senses[i]]

    n_slack = sum(s != "=" for s in senses)
    needs_art = [i for i, s in enumerate(senses) if s != "<="]
    n_art = len(needs_art)
    width = n + n_slack + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis = np.empty(m, dtype=np.int64)
    k = n
    for i, s in enumerate(senses):
        if s == "<=":
            T[i, k] = 1.0
            basis[i] = k
            k += 1
        elif s == ">=":
            T[i, k] = -1.0
            k += 1
    for j, i in enumerate(needs_art):
        T[i, n + n_slack + j] = 1.0
        basis[i] = n + n_slack + j

    total = n + m
    bland_after = 2 * total
    max_iter = max_iter if max_iter is not None else 50 * total + 1000
    tab = _Tableau(T, basis)
    iters = 0

    if n_art:
        T[m, :] = 0.0
        T[m, n + n_slack:width] = 1.0
        for i in needs_art:
            T[m] -= T[i]
        allowed = np.ones(width, dtype=bool)
        status, it = tab.run(allowed, bland_after, max_iter)
        iters += it
        if status == CYCLED:
            return LpSolution(np.zeros(n), float("nan"), CYCLED, iters)
        if -T[m, -1] > TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
            return LpSolution(np.zeros(n), float("nan"), INFEASIBLE, iters)
        # drive zero-level artificials out of the basis
        for r in range(m):
            if basis[r] >= n + n_slack:
                nz = np.flatnonzero(np.abs(T[r, :n + n_slack]) > TOL)
                if nz.size:
                    tab.pivot(r, int(nz[0]))

    cost = np.zeros(width)
    cost[:n] = c + PERTURBATION * np.arange(1, n + 1) * max(1.0, float(np.abs(c).max(initial=0.0)))
    T[m, :-1] = cost
    T[m, -1] = 0.0
    for r in range(m):
        j = basis[r]
        if cost[j] != 0.0:
            T[m] -= cost[j] * T[r]
    allowed = np.ones(width, dtype=bool)
    allowed[n + n_slack:] = False
    status, it = tab.run(allowed, bland_after, max_iter)
    iters += it

    x_full = np.zeros(width)
    x_full[basis] = T[:m, -1]
    x = np.maximum(x_full[:n], 0.0)
    x[x < TOL * 1e-3] = 0.0
    obj = float(c @ x) if status == OPTIMAL else float("nan")
    return LpSolution(x, obj, status, iters, T[m, :n].copy())
