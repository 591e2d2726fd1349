"""Bound-constrained maximizers for hyperparameter search.

Two methods are provided: a synchronous DE/rand/1/bin differential
evolution and a projected limited-memory quasi-Newton ascent. Both
maximize; callers pass the objective as-is.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import DimensionMismatch, InfeasibleStart, InvalidConfig

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class Bounds:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatch("lo and hi must be vectors of equal length")
        if not np.all(lo < hi):
            raise InvalidConfig("every lower bound must be below its upper bound")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def d(self) -> int:
        return self.lo.size

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))

    def project(self, x) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)


@dataclass
class OptimResult:
    x_best: np.ndarray
    f_best: float
    evaluations: int
    converged: bool
    trace: List[Tuple[int, float]] = field(default_factory=list)
    message: str = ""


def _evaluate(objective: Objective, points: np.ndarray, workers: int) -> np.ndarray:
    # results are stored by index, so scheduling cannot change them
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(objective, list(points)))
    else:
        values = [objective(p) for p in points]
    out = np.asarray(values, dtype=float)
    if np.any(np.isnan(out)) or np.any(out == np.inf):
        raise ValueError("objective returned NaN or +inf")
    return out


def differential_evolution(
    objective: Objective,
    bounds: Bounds,
    population: int = 20,
    iterations: int = 200,
    seed: int = 0,
    mutation: float = 0.8,
    crossover: float = 0.9,
    stagnation: int = 30,
    workers: int = 1,
) -> OptimResult:
    """Maximize `objective` with DE/rand/1/bin.

    Each generation builds all trial vectors from the current population,
    evaluates them (optionally on `workers` threads), then performs
    selection in index order. Mutants are clipped to the bounds. The run
    stops early once the best value has not improved by more than a
    relative 1e-10 for `stagnation` consecutive generations.

    Infeasible points should score ``-inf``; they lose every comparison.
    """
    if population < 4:
        raise InvalidConfig(f"population must be at least 4, got {population}")
    if iterations < 1:
        raise InvalidConfig("iterations must be positive")
    d = bounds.d
    rng = np.random.Generator(np.random.Philox(seed))
    span = bounds.hi - bounds.lo

    pop = bounds.lo + rng.random((population, d)) * span
    fit = _evaluate(objective, pop, workers)
    evals = population
    ibest = int(np.argmax(fit))
    f_best = fit[ibest]
    trace = [(0, float(f_best))]
    stale = 0
    converged = False

    idx = np.arange(population)
    for gen in range(1, iterations + 1):
        # three distinct donors per member, none equal to the member itself
        donors = np.empty((population, 3), dtype=int)
        for i in range(population):
            donors[i] = rng.choice(np.delete(idx, i), size=3, replace=False)
        cross = rng.random((population, d)) < crossover
        forced = rng.integers(0, d, size=population)
        cross[idx, forced] = True

        mutant = pop[donors[:, 0]] + mutation * (pop[donors[:, 1]] - pop[donors[:, 2]])
        mutant = bounds.project(mutant)
        trial = np.where(cross, mutant, pop)
        f_trial = _evaluate(objective, trial, workers)
        evals += population

        better = f_trial >= fit
        pop[better] = trial[better]
        fit[better] = f_trial[better]

        ibest = int(np.argmax(fit))
        f_new = fit[ibest]
        if f_new > f_best + 1e-10 * abs(f_best):
            stale = 0
        else:
            stale += 1
        f_best = f_new
        trace.append((gen, float(f_best)))
        if stale >= stagnation:
            converged = True
            break

    return OptimResult(
        x_best=pop[ibest].copy(),
        f_best=float(f_best),
        evaluations=evals,
        converged=converged,
        trace=trace,
        message="stagnation" if converged else "iteration budget exhausted",
    )


def finite_diff_grad(objective: Objective, x, h: float = 1e-5, bounds: Optional[Bounds] = None) -> np.ndarray:
    """Central-difference gradient, one-sided where a step would leave `bounds`."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    f0 = None
    for j in range(x.size):
        up = x.copy()
        dn = x.copy()
        up[j] += h
        dn[j] -= h
        up_ok = bounds is None or up[j] <= bounds.hi[j]
        dn_ok = bounds is None or dn[j] >= bounds.lo[j]
        if up_ok and dn_ok:
            g[j] = (objective(up) - objective(dn)) / (2 * h)
            continue
        if f0 is None:
            f0 = objective(x)
        if up_ok:
            g[j] = (objective(up) - f0) / h
        elif dn_ok:
            g[j] = (f0 - objective(dn)) / h
    return g


def _projected_gradient(x, g, bounds: Bounds) -> np.ndarray:
    # ascent direction: step along +g then project back into the box
    return bounds.project(x + g) - x


def _two_loop(g: np.ndarray, pairs) -> np.ndarray:
    # L-BFGS inverse Hessian product for the minimization of -f
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return q


def bounded_quasi_newton(
    objective: Objective,
    gradient: Callable[[np.ndarray], np.ndarray],
    bounds: Bounds,
    x0,
    max_iters: int = 200,
    memory: int = 10,
    pg_tol: float = 1e-6,
    armijo: float = 1e-4,
    shrink: float = 0.5,
    max_backtracks: int = 60,
) -> OptimResult:
    """Maximize `objective` over a box with projected limited-memory steps.

    Variables sitting on a bound whose gradient points outward are frozen
    for the step; the remaining ones follow the L-BFGS direction. Steps
    are accepted by a projected Armijo backtracking search, so accepted
    iterates never decrease the objective.

    A failed line search ends the run with ``converged=False`` and the
    best point seen.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != bounds.lo.shape:
        raise DimensionMismatch("x0 does not match the bounds")
    if not bounds.contains(x):
        raise InfeasibleStart("x0 lies outside the bounds")

    f = float(objective(x))
    if not np.isfinite(f):
        raise InfeasibleStart("objective is not finite at x0")
    g = np.asarray(gradient(x), dtype=float)
    evals = 1
    pairs: list = []
    trace = [(0, f)]
    converged = False
    message = "iteration budget exhausted"

    for it in range(1, max_iters + 1):
        pg = _projected_gradient(x, g, bounds)
        if np.max(np.abs(pg)) <= pg_tol:
            converged = True
            message = "projected gradient below tolerance"
            break

        at_lo = (x <= bounds.lo) & (g < 0)
        at_hi = (x >= bounds.hi) & (g > 0)
        free = ~(at_lo | at_hi)
        gf = np.where(free, g, 0.0)
        d = _two_loop(gf, pairs)
        d[~free] = 0.0
        if np.dot(d, gf) <= 0:
            pairs.clear()
            d = gf

        t = 1.0
        if not pairs:
            # first step: cap the move to the box width
            t = min(1.0, float(np.min((bounds.hi - bounds.lo) / np.maximum(np.abs(d), 1e-300))))
        accepted = False
        for _ in range(max_backtracks):
            x_new = bounds.project(x + t * d)
            step = x_new - x
            if not np.any(step):
                break
            f_new = float(objective(x_new))
            evals += 1
            if np.isfinite(f_new) and f_new >= f + armijo * np.dot(g, step):
                accepted = True
                break
            t *= shrink
        if not accepted:
            message = "line search failed"
            break

        g_new = np.asarray(gradient(x_new), dtype=float)
        s = x_new - x
        y = -(g_new - g)
        sy = np.dot(s, y)
        if sy > 1e-12 * np.dot(y, y):
            pairs.append((s, y, 1.0 / sy))
            if len(pairs) > memory:
                pairs.pop(0)
        x, f, g = x_new, f_new, g_new
        trace.append((it, f))

    return OptimResult(x_best=x, f_best=f, evaluations=evals, converged=converged, trace=trace, message=message)
