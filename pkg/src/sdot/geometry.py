"""Source domains, their midpoint-rule grids and the source measure.

Planar domains use their own coordinates as the chart. Spherical caps are
charted by the gnomonic (central) projection about the cap center, which is
smooth on any cap of angular radius below pi/2; all derivative work in
:mod:`sdot.cost` happens in chart coordinates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .expr import Expression


class GeometryError(ValueError):
    pass


class IdentityChart:
    dim = 2

    def to_chart(self, points):
        return np.asarray(points, dtype=float)

    def from_chart(self, coords):
        return np.asarray(coords, dtype=float)


class GnomonicChart:
    """Central projection of the unit sphere onto the tangent plane at ``center``."""

    dim = 2

    def __init__(self, center):
        c = np.asarray(center, dtype=float)
        c = c / np.linalg.norm(c)
        helper = np.array([0.0, 0.0, 1.0]) if abs(c[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        e1 = np.cross(helper, c)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(c, e1)
        self.center, self.e1, self.e2 = c, e1, e2

    def to_chart(self, points):
        p = np.asarray(points, dtype=float)
        z = p @ self.center
        if np.any(z <= 0):
            raise GeometryError("point outside the chart hemisphere")
        return np.stack([p @ self.e1 / z, p @ self.e2 / z], axis=-1)

    def from_chart(self, coords):
        return self.lift(coords)[0]

    def lift(self, coords):
        """Return the sphere point and its Jacobian ``dX/du`` (shape ``(..., 3, 2)``)."""
        u = np.asarray(coords, dtype=float)
        y = self.center + u[..., :1] * self.e1 + u[..., 1:2] * self.e2
        r = np.sqrt(1.0 + np.sum(u * u, axis=-1))[..., None]
        x = y / r
        # dX/du_a = (e_a - X u_a / r) / r
        basis = np.stack([self.e1, self.e2], axis=-1)
        jac = (basis - x[..., :, None] * (u[..., None, :] / r[..., None])) / r[..., None]
        return x, jac


@dataclass(frozen=True)
class Rectangle:
    lower: tuple
    upper: tuple
    kind: str = field(default="rectangle", init=False)

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != 2 or len(hi) != 2:
            raise GeometryError("rectangle corners must be 2-vectors")
        if not all(math.isfinite(v) for v in lo + hi):
            raise GeometryError("rectangle corners must be finite")
        if not (hi[0] > lo[0] and hi[1] > lo[1]):
            raise GeometryError(f"degenerate rectangle {lo} .. {hi}: side lengths must be positive")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    ambient_dim = 2
    chart = IdentityChart()

    @property
    def sides(self):
        return (self.upper[0] - self.lower[0], self.upper[1] - self.lower[1])

    @property
    def area(self):
        a, b = self.sides
        return a * b

    def contains(self, points, tol=1e-12):
        p = np.asarray(points, dtype=float)
        lo, hi = np.array(self.lower) - tol, np.array(self.upper) + tol
        return np.all((p >= lo) & (p <= hi), axis=-1)

    def boundary_samples(self, count):
        """At least ``count`` counterclockwise points on the boundary, corners included."""
        per_side = max(1, math.ceil(count / 4))
        (x0, y0), (x1, y1) = self.lower, self.upper
        corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]
        t = np.arange(per_side) / per_side
        pts = []
        for a, b in zip(corners[:-1], corners[1:]):
            a, b = np.array(a), np.array(b)
            pts.append(a + t[:, None] * (b - a))
        return np.concatenate(pts)


@dataclass(frozen=True)
class Polygon:
    """Simple planar polygon given by counterclockwise vertices.

    Only boundary sampling and membership are provided; polygons are used to
    probe c-convexity of non-rectangular domains, not as scheme sources.
    """

    vertices: tuple
    kind: str = field(default="polygon", init=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("polygon needs at least three 2-d vertices")
        object.__setattr__(self, "vertices", tuple(map(tuple, v)))
        if self.area <= 0:
            raise GeometryError("polygon must have positive (counterclockwise) area")

    ambient_dim = 2
    chart = IdentityChart()

    @property
    def area(self):
        v = np.asarray(self.vertices)
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def contains(self, points, tol=0.0):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        v = np.asarray(self.vertices)
        inside = np.zeros(len(p), dtype=bool)
        for (xa, ya), (xb, yb) in zip(v, np.roll(v, -1, axis=0)):
            crosses = (ya > p[:, 1]) != (yb > p[:, 1])
            with np.errstate(divide="ignore", invalid="ignore"):
                xi = xa + (p[:, 1] - ya) * (xb - xa) / (yb - ya)
            inside ^= crosses & (p[:, 0] < xi)
        return inside

    def boundary_samples(self, count):
        v = np.asarray(self.vertices)
        per_side = max(1, math.ceil(count / len(v)))
        t = np.arange(per_side) / per_side
        return np.concatenate([a + t[:, None] * (b - a) for a, b in zip(v, np.roll(v, -1, axis=0))])


@dataclass(frozen=True)
class SphericalCap:
    center: tuple
    radius: float
    kind: str = field(default="cap", init=False)

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.shape != (3,) or not np.all(np.isfinite(c)) or np.linalg.norm(c) == 0:
            raise GeometryError("cap center must be a nonzero 3-vector")
        if not (0.0 < float(self.radius) < math.pi / 2):
            raise GeometryError(f"cap radius {self.radius} outside (0, pi/2)")
        object.__setattr__(self, "center", tuple(c / np.linalg.norm(c)))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "chart", GnomonicChart(self.center))

    ambient_dim = 3

    @property
    def area(self):
        return 2.0 * math.pi * (1.0 - math.cos(self.radius))

    def contains(self, points, tol=1e-12):
        p = np.asarray(points, dtype=float)
        return p @ np.asarray(self.center) >= math.cos(self.radius) - tol

    def _embed(self, theta, phi):
        ch = self.chart
        st = np.sin(theta)[..., None]
        return (st * np.cos(phi)[..., None] * ch.e1 + st * np.sin(phi)[..., None] * ch.e2
                + np.cos(theta)[..., None] * ch.center)

    def boundary_samples(self, count):
        phi = 2.0 * math.pi * np.arange(max(count, 3)) / max(count, 3)
        return self._embed(np.full_like(phi, self.radius), phi)


@dataclass(frozen=True, eq=False)
class Grid:
    """Midpoint-rule discretization of a domain.

    ``centers`` are ambient points, ``coords`` their chart coordinates.
    ``raster`` maps each cell to a (row, col) slot of a rectangular image
    used for exports; unused slots of ragged rasters stay empty.
    """

    domain: object
    resolution: int
    centers: np.ndarray
    coords: np.ndarray
    volumes: np.ndarray
    h: float
    raster_shape: tuple
    raster_index: np.ndarray

    def __len__(self):
        return len(self.volumes)

    @property
    def total_volume(self):
        return math.fsum(self.volumes)


def build_grid(domain, resolution: int) -> Grid:
    if int(resolution) != resolution or resolution < 2:
        raise GeometryError(f"grid resolution must be an integer >= 2, got {resolution}")
    n = int(resolution)
    if isinstance(domain, Rectangle):
        (x0, y0), (x1, y1) = domain.lower, domain.upper
        dx, dy = (x1 - x0) / n, (y1 - y0) / n
        xs = x0 + (np.arange(n) + 0.5) * dx
        ys = y0 + (np.arange(n) + 0.5) * dy
        gx, gy = np.meshgrid(xs, ys)  # row j <-> y index
        centers = np.stack([gx.ravel(), gy.ravel()], axis=-1)
        volumes = np.full(n * n, dx * dy)
        rows, cols = np.divmod(np.arange(n * n), n)
        # image row 0 is the top edge
        raster_index = np.stack([n - 1 - rows, cols], axis=-1)
        return Grid(domain, n, centers, centers.copy(), volumes, max(dx, dy), (n, n), raster_index)
    if isinstance(domain, SphericalCap):
        return _cap_grid(domain, n)
    raise GeometryError(f"no grid construction for domain kind {getattr(domain, 'kind', domain)!r}")


def _cap_grid(cap: SphericalCap, n: int) -> Grid:
    # Band k holds 3(2k-1) cells; band edges cos(theta_k) = 1 - (k/n)^2 (1 - cos r)
    # make every cell the same area and avoid pole clustering.
    one_minus = 1.0 - math.cos(cap.radius)
    cos_edges = 1.0 - (np.arange(n + 1) / n) ** 2 * one_minus
    theta_edges = np.arccos(np.clip(cos_edges, -1.0, 1.0))
    cell_area = 2.0 * math.pi * one_minus / (3 * n * n)
    theta, phi, vols, rows, cols, hs = [], [], [], [], [], []
    width = 3 * (2 * n - 1)
    for k in range(1, n + 1):
        m = 3 * (2 * k - 1)
        dphi = 2.0 * math.pi / m
        t_mid = math.acos(0.5 * (cos_edges[k - 1] + cos_edges[k]))
        theta.append(np.full(m, t_mid))
        phi.append((np.arange(m) + 0.5) * dphi)
        vols.append(np.full(m, cell_area))
        rows.append(np.full(m, k - 1))
        cols.append(np.arange(m))
        hs.append(max(theta_edges[k] - theta_edges[k - 1], math.sin(theta_edges[k]) * dphi))
    theta, phi = np.concatenate(theta), np.concatenate(phi)
    centers = cap._embed(theta, phi)
    centers /= np.linalg.norm(centers, axis=-1, keepdims=True)
    raster_index = np.stack([np.concatenate(rows), np.concatenate(cols)], axis=-1)
    return Grid(cap, n, centers, cap.chart.to_chart(centers), np.concatenate(vols),
                float(max(hs)), (n, width), raster_index)


def coordinate_env(domain, points):
    """Variable bindings for density expressions: x, y (and z on the sphere), plus x1.. aliases."""
    p = np.asarray(points, dtype=float)
    names = ("x", "y", "z")[: p.shape[-1]]
    env = {name: p[..., i] for i, name in enumerate(names)}
    env.update({f"x{i + 1}": p[..., i] for i in range(p.shape[-1])})
    return env


def density_variables(domain):
    dim = domain.ambient_dim
    return ("x", "y", "z")[:dim] + tuple(f"x{i + 1}" for i in range(dim))


@dataclass(frozen=True, eq=False)
class SourceMeasure:
    """Normalized density on a grid; ``raw_total`` is the integral before scaling."""

    grid: Grid
    density: np.ndarray
    raw_total: float

    @property
    def scale(self):
        return 1.0 / self.raw_total

    @property
    def masses(self):
        return self.density * self.grid.volumes

    @property
    def total(self):
        return math.fsum(self.masses)

    @property
    def sup_density(self):
        return float(np.max(self.density))


def normalize_measure(grid: Grid, density) -> SourceMeasure:
    """Evaluate ``density`` at the cell centers and rescale it to unit mass.

    ``density`` may be an expression string, an :class:`Expression`, a
    callable taking the ``(N, dim)`` center array, or per-cell values.
    """
    if isinstance(density, str):
        density = Expression(density, density_variables(grid.domain))
    if isinstance(density, Expression):
        values = density(coordinate_env(grid.domain, grid.centers))
    elif callable(density):
        values = density(grid.centers)
    else:
        values = density
    values = np.broadcast_to(np.asarray(values, dtype=float), grid.volumes.shape).copy()
    bad = ~np.isfinite(values) | (values <= 0)
    if np.any(bad):
        where = grid.centers[np.argmax(bad)]
        raise GeometryError(
            f"density must be strictly positive and finite at every cell center; "
            f"{int(bad.sum())} offending cells, first at {tuple(np.round(where, 6))}"
        )
    raw_total = math.fsum(values * grid.volumes)
    return SourceMeasure(grid, values / raw_total, raw_total)


def integrate_indicator(measure: SourceMeasure, indicator) -> float:
    ind = np.asarray(indicator, dtype=bool)
    if ind.shape != measure.density.shape:
        raise GeometryError("indicator must have one entry per grid cell")
    return math.fsum(measure.masses[ind])


def write_grid_csv(measure: SourceMeasure, path):
    grid = measure.grid
    names = ["cx", "cy", "cz"][: grid.centers.shape[1]]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["volume", "density"])
        for c, v, d in zip(grid.centers, grid.volumes, measure.density):
            w.writerow([repr(float(t)) for t in c] + [repr(float(v)), repr(float(d))])
