"""Constants of the iteration bound and the run certificate.

Suprema and infima over the source domain are taken over grid centers plus a
dense boundary sampling, since for the built-in costs the extremes of the
exponential ratios sit on the boundary.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from .cost import image_polygon, polygon_is_convex


class BoundsError(ValueError):
    pass


def sup_points(grid, boundary_samples=None):
    """Grid centers plus boundary samples, in source-chart coordinates."""
    count = boundary_samples or 8 * grid.resolution
    b = grid.domain.boundary_samples(count)
    if grid.domain.ambient_dim == 3:
        b = grid.domain.chart.to_chart(b)
    return np.concatenate([grid.coords, b])


def constant_C(cost, targets, grid, boundary_samples=None):
    K = len(targets)
    if K < 2:
        raise BoundsError("C needs at least two targets")
    x = sup_points(grid, boundary_samples)
    best = 0.0
    for i in range(K):
        xi = targets.coords[i]
        A = cost.neg_cross(x, xi)
        det = np.abs(np.linalg.det(A))
        gi = cost.grad_x(x, xi)
        for k in range(K):
            if k == i:
                continue
            diff = -gi + cost.grad_x(x, targets.coords[k])
            v = np.linalg.solve(A, diff[..., None])[..., 0]
            den = np.linalg.norm(v, axis=-1)
            if den.min() < 1e-12:
                raise BoundsError(
                    f"near-zero denominator in C for targets {i + 1},{k + 1}; "
                    f"min pairwise target distance {targets.min_distance:.3g}"
                )
            best = max(best, float(np.max(det / den)))
    return best


def constants_M_Lambda(cost, targets, grid, boundary_samples=None):
    """``(M, Lambda)``: extremes of ``exp(c(x, xb_1) - c(x, xb_k))`` over k > 1."""
    if len(targets) < 2:
        raise BoundsError("M and Lambda need at least two targets")
    x = sup_points(grid, boundary_samples)
    c1 = cost.cost(x, targets.coords[0])
    M, lam = -math.inf, math.inf
    for k in range(1, len(targets)):
        r = np.exp(-cost.cost(x, targets.coords[k]) + c1)
        M, lam = max(M, float(r.max())), min(lam, float(r.min()))
    return M + 1.0, lam


def hull_perimeter(points):
    pts = np.asarray(points, dtype=float)
    hull = ConvexHull(pts)
    v = pts[hull.vertices]
    return math.fsum(np.linalg.norm(v - np.roll(v, -1, axis=0), axis=-1))


def surface_measure(cost, domain, xb, boundary_samples=400, strict=True):
    """Perimeter of the image of ``domain`` in cotangent coordinates at ``xb``."""
    poly = image_polygon(cost, domain, xb, boundary_samples)
    if strict and not polygon_is_convex(poly):
        raise BoundsError(
            "image of the domain is not convex for this target; "
            "the domain is not c-convex with respect to it (see check_c_convexity_of_domain)"
        )
    return hull_perimeter(poly)


def iteration_bound(C, M, Lambda, delta, sup_I, sigma_max, K):
    for name, v in dict(C=C, M=M, Lambda=Lambda, delta=delta, sup_I=sup_I, sigma_max=sigma_max).items():
        if not v > 0:
            raise BoundsError(f"{name} must be positive, got {v}")
    return K * (K * C * M * sup_I * sigma_max / (delta * Lambda) + 1.0)


def _in_hull(points, hull, tol):
    eq = hull.equations
    return np.all(points @ eq[:, :-1].T + eq[:, -1] <= tol, axis=1)


def convex_perimeter_monotonicity(A, B, tol=1e-12):
    """``perimeter(hull A) <= perimeter(hull B)`` for point sets with hull A inside hull B."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    hb = ConvexHull(B)
    if not np.all(_in_hull(A, hb, tol)):
        raise BoundsError("containment precondition failed: A is not inside B")
    return hull_perimeter(A) <= hull_perimeter(B) + tol


@dataclass
class BoundReport:
    K: int
    C: float = math.nan
    M: float = math.nan
    Lambda: float = math.nan
    delta: float = math.nan
    sup_I: float = math.nan
    sigma: list = field(default_factory=list)
    n_eps_bound: float = math.nan
    observed_outer_iterations: int | None = None
    methods: dict = field(default_factory=dict)

    @property
    def sigma_max(self):
        return max(self.sigma) if self.sigma else math.nan

    @property
    def passed(self):
        if self.observed_outer_iterations is None:
            return None
        if self.K < 2:
            return True
        return self.observed_outer_iterations <= self.n_eps_bound

    @property
    def decrease_floor(self):
        """Lower bound on any single accepted decrease of a weight (before grid slack)."""
        return self.delta * self.Lambda / (self.K * self.C * self.sup_I * self.sigma_max)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["constant", "value", "method"])
            for name in ("C", "M", "Lambda", "delta", "sup_I"):
                w.writerow([name, repr(float(getattr(self, name))), self.methods.get(name, "")])
            for i, s in enumerate(self.sigma, start=1):
                w.writerow([f"sigma_{i}", repr(float(s)), self.methods.get("sigma", "")])
            w.writerow(["n_eps_bound", "observed", "pass"])
            observed = "" if self.observed_outer_iterations is None else self.observed_outer_iterations
            passed = "" if self.passed is None else ("PASS" if self.passed else "FAIL")
            w.writerow([repr(float(self.n_eps_bound)), observed, passed])


def compute_bounds(problem, epsilon, boundary_samples=None) -> BoundReport:
    """All constants of the bound for ``problem`` at tolerance ``epsilon``."""
    from .scheme import compute_delta

    K = problem.K
    report = BoundReport(K)
    if K < 2:
        report.methods["note"] = "K=1: bound not applicable"
        return report
    cost, targets, grid = problem.cost, problem.targets, problem.measure.grid
    report.delta = compute_delta(epsilon, K, targets.masses[0])
    report.C = constant_C(cost, targets, grid, boundary_samples)
    report.M, report.Lambda = constants_M_Lambda(cost, targets, grid, boundary_samples)
    report.sup_I = problem.measure.sup_density
    n_b = max(400, boundary_samples or 0)
    sigma, convex = [], True
    for xb in targets.coords:
        poly = image_polygon(cost, grid.domain, xb, n_b)
        convex &= polygon_is_convex(poly)
        sigma.append(hull_perimeter(poly))
    report.sigma = sigma
    norm = "euclidean norm in chart coordinates" + (
        " (gnomonic chart)" if grid.domain.ambient_dim == 3 else "")
    report.methods = {
        "C": f"sup over grid centers + boundary samples; {norm}",
        "M": "sup over grid centers + boundary samples",
        "Lambda": "inf over grid centers + boundary samples",
        "delta": "min(eps/(K-1), f_1/K)",
        "sup_I": "max normalized density at grid centers",
        "sigma": "perimeter of convex hull of mapped boundary"
                 + ("" if convex else " (image NOT convex: hull perimeter only)"),
    }
    report.n_eps_bound = iteration_bound(report.C, report.M, report.Lambda, report.delta,
                                         report.sup_I, report.sigma_max, K)
    return report
