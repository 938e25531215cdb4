"""Coordinate-wise weight adjustment for semi-discrete transport.

Starting from weights that leave every cell but the first empty, each sweep
visits targets 2..K in order and, for any cell whose mass is at least delta
below its prescribed value, lowers that single weight until the cell mass
lands in ``(f_i, f_i + delta)``.  The first weight stays 1.  The run stops
after the first sweep that changes nothing.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import compute_bounds
from .partition import CellMass, assign_cells

log = logging.getLogger(__name__)


class SchemeError(RuntimeError):
    pass


class ResolutionError(ValueError):
    def __init__(self, message, recommended_resolution):
        super().__init__(message)
        self.recommended_resolution = recommended_resolution


class SchemeAbort(SchemeError):
    """Raised when the run cannot finish; carries the partial trace for post-mortem."""

    def __init__(self, message, trace=None, bounds=None):
        super().__init__(message)
        self.trace = trace
        self.bounds = bounds


@dataclass
class SchemeConfig:
    epsilon: float
    bisection_tolerance: float = 0.1
    max_outer_iterations: int | None = None
    resolution_factor: float = 0.25
    max_halvings: int = 200
    max_bisections: int = 200

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 <= self.bisection_tolerance < 0.5:
            raise ValueError("bisection_tolerance is a fraction of delta in [0, 0.5)")


@dataclass
class TraceStep:
    outer: int
    inner: int
    target_index: int
    d_old: float
    d_new: float
    G_before: float
    G_after: float
    evaluations: int
    masses_after: np.ndarray


@dataclass
class SchemeTrace:
    K: int
    delta: float = math.nan
    steps: list = field(default_factory=list)
    outer_iterations: int = 0
    sweeps: int = 0
    initial_weights: np.ndarray | None = None
    initial_masses: np.ndarray | None = None
    monotonicity_flags: int = 0

    @property
    def decrease_counts(self):
        counts = np.zeros(self.K, dtype=int)
        for s in self.steps:
            counts[s.target_index] += 1
        return counts

    @property
    def mass_evaluations(self):
        return sum(s.evaluations for s in self.steps)

    def weight_history(self, i):
        """Values taken by ``d_i`` over the run, starting from the initial weight."""
        hist = [float(self.initial_weights[i])] if self.initial_weights is not None else []
        hist += [s.d_new for s in self.steps if s.target_index == i]
        return hist

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["outer", "inner", "target_index", "d_old", "d_new", "G_before", "G_after"])
            for s in self.steps:
                w.writerow([s.outer, s.inner, s.target_index + 1, repr(s.d_old), repr(s.d_new),
                            repr(s.G_before), repr(s.G_after)])


@dataclass
class SchemeResult:
    weights: np.ndarray
    masses: np.ndarray
    trace: SchemeTrace
    bounds: object
    partition: object

    @property
    def log_weights(self):
        return np.log(self.weights)


def compute_delta(epsilon, K, f1):
    if K < 2:
        raise ValueError("delta is only defined for K >= 2")
    if not epsilon > 0 or not 0 < f1 < 1:
        raise ValueError("need epsilon > 0 and f_1 in (0, 1)")
    return min(epsilon / (K - 1), f1 / K)


def recommended_resolution(problem, delta, factor):
    grid = problem.measure.grid
    n = grid.resolution
    return int(math.ceil(n * grid.h / (factor * delta)))


def check_resolution(problem, delta, factor):
    h = problem.measure.grid.h
    if h > factor * delta:
        n = recommended_resolution(problem, delta, factor)
        raise ResolutionError(
            f"grid spacing h={h:.4g} exceeds {factor:g}*delta={factor * delta:.4g}; "
            f"use resolution >= {n}", n)


def initial_weights(problem, m_hat=None):
    """``d = (1, M, ..., M)``; verifies that cells 2..K start empty."""
    K = problem.K
    if K < 2:
        raise ValueError("initial weights need K >= 2")
    if m_hat is None:
        from .bounds import constants_M_Lambda

        m_hat, _ = constants_M_Lambda(problem.cost, problem.targets, problem.measure.grid)
    d = np.full(K, float(m_hat))
    d[0] = 1.0
    masses = assign_cells(problem, d).masses
    if np.any(masses[1:] > 0):
        raise SchemeError("M underestimated; refine sup sampling")
    return d


def adjust_weight(problem, d, i, f_i, delta, tolerance=0.1, max_halvings=200, max_bisections=200):
    """Lower ``d[i]`` until the mass of cell ``i`` lies in ``(f_i, f_i + delta)``.

    Bisection runs on ``log d_i``.  The first iterate inside the window shrunk
    by ``tolerance * delta`` on each side is accepted; if none is found before
    the bracket collapses, the iterate in the open window closest to its
    midpoint is used.  Returns ``(new_d_i, new_mass, evaluations, flags)``
    where ``flags`` counts observations contradicting monotonicity.
    """
    mass = CellMass(problem, d, i)
    hi = math.log(d[i])
    g_hi = mass(d[i])
    if g_hi > f_i - delta:
        raise SchemeError(f"adjust_weight called for cell {i + 1} with mass {g_hi} > f - delta")
    target = f_i + 0.5 * delta
    inner_lo, inner_hi = f_i + tolerance * delta, f_i + delta - tolerance * delta
    flags = 0
    best = None

    def consider(logd, g):
        nonlocal best
        if f_i < g < f_i + delta and (best is None or abs(g - target) < abs(best[1] - target)):
            best = (math.exp(logd), g)

    lo = hi
    for _ in range(max_halvings):
        lo -= math.log(2.0)
        g_lo = mass(math.exp(lo))
        if g_lo > f_i:
            break
    else:
        raise SchemeError(f"target mass {f_i} unreachable for cell {i + 1} (no bracket after "
                          f"{max_halvings} halvings)")
    consider(lo, g_lo)
    if inner_lo < g_lo < inner_hi:
        return math.exp(lo), g_lo, mass.evaluations, flags
    for _ in range(max_bisections):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        g = mass(math.exp(mid))
        if g > g_lo or g < g_hi:
            flags += 1
        consider(mid, g)
        if inner_lo < g < inner_hi:
            return math.exp(mid), g, mass.evaluations, flags
        if g > target:
            lo, g_lo = mid, g
        else:
            hi, g_hi = mid, g
    if best is None:
        raise SchemeError(
            f"no weight puts cell {i + 1} inside ({f_i:.6g}, {f_i + delta:.6g}); "
            f"the cell mass jumps by more than delta at this grid resolution")
    return best[0], best[1], mass.evaluations, flags


def verify_error_bound(alpha, f, epsilon):
    return bool(np.all(np.abs(np.asarray(alpha) - np.asarray(f)) < epsilon))


def run_scheme(problem, config: SchemeConfig, check_resolution_rule=True) -> SchemeResult:
    K = problem.K
    f = problem.targets.masses
    trace = SchemeTrace(K)
    if K == 1:
        part = assign_cells(problem, np.ones(1))
        trace.initial_weights, trace.initial_masses = np.ones(1), part.masses
        bounds = compute_bounds(problem, config.epsilon)
        bounds.observed_outer_iterations = 0
        # the single cell is the whole domain; report its mass exactly
        return SchemeResult(np.ones(1), np.ones(1), trace, bounds, part)

    delta = compute_delta(config.epsilon, K, f[0])
    trace.delta = delta
    if config.epsilon >= f.min():
        raise ValueError(f"epsilon must be below min f_i = {f.min():g}")
    if check_resolution_rule:
        check_resolution(problem, delta, config.resolution_factor)
    bounds = compute_bounds(problem, config.epsilon)
    cap = config.max_outer_iterations
    if cap is None:
        cap = int(math.ceil(bounds.n_eps_bound)) if math.isfinite(bounds.n_eps_bound) else 100_000

    d = initial_weights(problem, bounds.M)
    part = assign_cells(problem, d)
    trace.initial_weights, trace.initial_masses = d.copy(), part.masses.copy()
    n = 0
    while True:
        changed = False
        for i in range(1, K):
            g = part.masses[i]
            if abs(g - f[i]) < delta:
                continue
            new_di, g_new, evals, flags = adjust_weight(
                problem, d, i, f[i], delta, config.bisection_tolerance,
                config.max_halvings, config.max_bisections)
            trace.monotonicity_flags += flags
            old_di = d[i]
            d = d.copy()
            d[i] = new_di
            part = assign_cells(problem, d)
            if part.masses[i] != g_new:
                log.warning("cell %d mass %r differs from bisection value %r", i + 1, part.masses[i], g_new)
            trace.steps.append(TraceStep(n, i, i, float(old_di), float(new_di), float(g),
                                         float(part.masses[i]), evals, part.masses.copy()))
            if np.any(part.masses[1:] > f[1:] + delta):
                raise SchemeAbort("left the admissible family: some cell exceeds f_i + delta",
                                  trace, bounds)
            changed = True
            if K == 2:
                break
        trace.sweeps += 1
        if not changed:
            break
        n += 1
        if K == 2:
            break
        if n > cap:
            trace.outer_iterations = n
            bounds.observed_outer_iterations = n
            raise SchemeAbort(f"exceeded {cap} outer iterations; quadrature too coarse for epsilon "
                              f"{config.epsilon}?", trace, bounds)
    trace.outer_iterations = n
    bounds.observed_outer_iterations = n
    if not verify_error_bound(part.masses, f, config.epsilon):
        raise SchemeAbort("terminated without meeting the error bound", trace, bounds)
    return SchemeResult(d, part.masses, trace, bounds, part)


def write_results_csv(result: SchemeResult, targets, path):
    dim = targets.points.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + [f"xbar_{j + 1}" for j in range(dim)] + ["f", "alpha", "d", "log_d"])
        for i in range(len(targets)):
            w.writerow([i + 1] + [repr(float(v)) for v in targets.points[i]]
                       + [repr(float(targets.masses[i])), repr(float(result.masses[i])),
                          repr(float(result.weights[i])), repr(float(np.log(result.weights[i])))])
