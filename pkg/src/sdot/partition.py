"""Potentials built from weights, their cells on the grid, and cell masses.

Indices are 0-based throughout the Python API; exported files label cells
1..K.  For weights ``d`` the potential is ``max_i [-c(x, xb_i) - log d_i]``
and grid cell ``a`` belongs to the smallest index attaining the maximum.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .cost import CExpError, cotangent_coords


class PartitionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TargetSpec:
    """K distinct target points with prescribed masses.

    ``points`` are as given (ambient), ``coords`` are target-chart coordinates.
    """

    points: np.ndarray
    coords: np.ndarray
    masses: np.ndarray

    def __len__(self):
        return len(self.masses)

    @property
    def min_distance(self):
        if len(self) < 2:
            return math.inf
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        dist = np.linalg.norm(diff, axis=-1)
        return float(dist[np.triu_indices(len(self), 1)].min())


def make_targets(points, masses, chart=None, mass_tol=1e-12) -> TargetSpec:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    f = np.asarray(masses, dtype=float).ravel()
    problems = []
    if len(pts) != len(f):
        problems.append(f"{len(pts)} points but {len(f)} masses")
    if len(f) == 0:
        problems.append("need at least one target")
    if len(f) > 1 and np.any((f <= 0) | (f >= 1)):
        problems.append("every mass must lie in (0, 1)")
    if abs(math.fsum(f) - 1.0) > mass_tol:
        problems.append(f"masses sum to {math.fsum(f)!r}, not 1 (tolerance {mass_tol})")
    if problems:
        raise PartitionError("; ".join(problems))
    coords = pts if chart is None else np.asarray(chart.to_chart(pts), dtype=float)
    spec = TargetSpec(pts, coords, f)
    if spec.min_distance <= 0:
        raise PartitionError("target points must be pairwise distinct")
    return spec


@dataclass(frozen=True, eq=False)
class Problem:
    """Cost, discretized source measure and targets; caches the cost table."""

    cost: object
    measure: object
    targets: TargetSpec

    @cached_property
    def table(self):
        """``table[a, k] = c(center_a, xb_k)``."""
        x = self.measure.grid.coords[:, None, :]
        return np.ascontiguousarray(self.cost.cost(x, self.targets.coords[None, :, :]))

    @property
    def K(self):
        return len(self.targets)

    @property
    def h(self):
        return self.measure.grid.h


@dataclass(frozen=True, eq=False)
class PartitionResult:
    assignment: np.ndarray
    masses: np.ndarray
    margin: np.ndarray
    weights: np.ndarray


def _check_weights(d, K):
    d = np.asarray(d, dtype=float)
    if d.shape != (K,):
        raise PartitionError(f"expected {K} weights, got shape {d.shape}")
    if not np.all(np.isfinite(d) & (d > 0)):
        raise PartitionError("weights must be finite and positive")
    return d


# Scores this close to the maximum count as tied; ties go to the smallest index.
# Keeps assignments stable under d -> lambda*d, which shifts scores by rounding.
TIE_RTOL = 1e-12


def _tie_threshold(m):
    return m - TIE_RTOL * np.maximum(1.0, np.abs(m))


def _winners(s):
    thr = _tie_threshold(s.max(axis=-1))
    return np.argmax(s >= thr[..., None], axis=-1)


def potential_at(cost, targets: TargetSpec, d, x):
    """Value of the potential at chart point ``x`` and the winning index."""
    d = _check_weights(d, len(targets))
    scores = np.ravel(-cost.cost(np.asarray(x, dtype=float)[None, :], targets.coords) - np.log(d))
    i = int(_winners(scores))
    return float(scores.max()), i


def scores(problem: Problem, d):
    return -problem.table - np.log(_check_weights(d, problem.K))


def assign_cells(problem: Problem, d) -> PartitionResult:
    s = scores(problem, d)
    assignment = _winners(s)
    if problem.K > 1:
        top2 = np.partition(s, -2, axis=1)[:, -2:]
        margin = top2[:, 1] - top2[:, 0]
    else:
        margin = np.full(len(s), np.inf)
    masses = np.bincount(assignment, weights=problem.measure.masses, minlength=problem.K)
    return PartitionResult(assignment, masses, margin, np.array(d, dtype=float))


class CellMass:
    """``G^i`` as a function of ``d_i`` alone, other weights frozen.

    Uses the same score arithmetic and tie-breaking as :func:`assign_cells`,
    so ``CellMass(problem, d, i)(d[i]) == assign_cells(problem, d).masses[i]``.
    """

    def __init__(self, problem: Problem, d, i):
        d = _check_weights(d, problem.K)
        s = scores(problem, d)
        lower = s[:, :i].max(axis=1) if i > 0 else np.full(len(s), -np.inf)
        upper = s[:, i + 1:].max(axis=1) if i + 1 < problem.K else np.full(len(s), -np.inf)
        self._neg_cost = -problem.table[:, i]
        self._lower, self._upper = lower, upper
        self._weights = problem.measure.masses
        self.evaluations = 0

    def __call__(self, di):
        self.evaluations += 1
        si = self._neg_cost - np.log(np.float64(di))
        thr = _tie_threshold(np.maximum(si, np.maximum(self._lower, self._upper)))
        inside = (si >= thr) & (self._lower < thr)
        return float(np.bincount(inside.astype(np.intp), weights=self._weights, minlength=2)[1])


def masses_limit_probe(problem: Problem, i, lam_hat=None, m_hat=None):
    """Masses with ``d_i`` tiny and huge, all other weights 1."""
    if problem.K < 2:
        raise PartitionError("limit probe needs at least two targets")
    if lam_hat is None or m_hat is None:
        from .bounds import constants_M_Lambda

        m_hat, lam_hat = constants_M_Lambda(problem.cost, problem.targets, problem.measure.grid)
    d = np.ones(problem.K)
    d[i] = 1e-8 * lam_hat
    small = assign_cells(problem, d).masses
    d[i] = 1e8 * m_hat
    large = assign_cells(problem, d).masses
    return small, large


@dataclass
class ConvexityReport:
    index: int
    pairs: int
    points_checked: int
    violations: int
    unreliable: int
    empty: bool = False

    @property
    def violation_fraction(self):
        return self.violations / self.points_checked if self.points_checked else 0.0


def check_cell_c_convexity(problem: Problem, partition: PartitionResult, i, pair_samples=500,
                           rng=None, steps=8, tol=None):
    """Walk c-segments between sampled points of cell ``i`` and count exits.

    Endpoints are mapped to ``-D̄c(., xb_i)``, joined by a straight segment,
    and ``steps`` interior points are mapped back by the c-exponential at
    ``xb_i``.  A point violates when its margin for cell ``i`` is below
    ``-tol`` (default: the grid spacing).
    """
    rng = np.random.default_rng(rng)
    tol = problem.h if tol is None else tol
    members = np.flatnonzero(partition.assignment == i)
    if len(members) == 0:
        return ConvexityReport(i, 0, 0, 0, 0, empty=True)
    cost, xb = problem.cost, problem.targets.coords[i]
    xs = problem.measure.grid.coords
    a = xs[rng.choice(members, pair_samples)]
    b = xs[rng.choice(members, pair_samples)]
    t = (np.arange(1, steps + 1) / (steps + 1))[None, :, None]
    pa, pb = cotangent_coords(cost, a, xb), cotangent_coords(cost, b, xb)
    p = (1 - t) * pa[:, None, :] + t * pb[:, None, :]
    guess = (1 - t) * a[:, None, :] + t * b[:, None, :]
    p, guess = p.reshape(-1, 2), guess.reshape(-1, 2)
    unreliable = 0
    try:
        pts = cost.c_exp_target(xb, p, guess=guess)
    except CExpError:
        good = []
        for pk, gk in zip(p, guess):
            try:
                good.append(cost.c_exp_target(xb, pk[None], guess=gk[None])[0])
            except CExpError:
                unreliable += 1
        pts = np.array(good).reshape(-1, 2)
    log_d = np.log(partition.weights)
    s = -cost.cost(pts[:, None, :], problem.targets.coords[None, :, :]) - log_d
    others = np.delete(s, i, axis=1)
    margin = s[:, i] - (others.max(axis=1) if others.shape[1] else -np.inf)
    return ConvexityReport(i, pair_samples, len(pts), int(np.sum(margin < -tol)), unreliable)


def lipschitz_constant(problem: Problem):
    """Bound on the slope of ``x -> c(x, xb_i)`` over the grid, all targets."""
    x = problem.measure.grid.coords[:, None, :]
    g = problem.cost.grad_x(x, problem.targets.coords[None, :, :])
    return float(np.linalg.norm(g, axis=-1).max())


def write_assignment_csv(problem: Problem, partition: PartitionResult, path):
    centers = problem.measure.grid.centers
    names = ["cx", "cy", "cz"][: centers.shape[1]]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["index", "margin"])
        for c, k, m in zip(centers, partition.assignment, partition.margin):
            w.writerow([repr(float(v)) for v in c] + [int(k) + 1, repr(float(m))])


def raster(problem: Problem, partition: PartitionResult):
    """Label image (1..K, 0 for unused slots of ragged grids)."""
    grid = problem.measure.grid
    img = np.zeros(grid.raster_shape, dtype=int)
    img[grid.raster_index[:, 0], grid.raster_index[:, 1]] = partition.assignment + 1
    return img


def write_pgm(problem: Problem, partition: PartitionResult, path):
    img = raster(problem, partition)
    rows, cols = img.shape
    with open(path, "w", newline="\n") as fh:
        fh.write(f"P2\n{cols} {rows}\n{max(problem.K, 1)}\n")
        for row in img:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")
