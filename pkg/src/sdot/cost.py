"""Transport costs, their derivatives, c-exponential maps and condition checks.

All derivative quantities are expressed in chart coordinates (the identity
chart for planar domains, gnomonic charts on the sphere).  ``cross(x, xb)``
returns the mixed second derivative ``d^2 c / dx_a dxb_b`` indexed ``[a, b]``;
the matrix appearing in the nondegeneracy condition is its negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import Expression
from .geometry import GnomonicChart, IdentityChart, Rectangle, SphericalCap


class CostError(ValueError):
    pass


class DomainSeparationError(CostError):
    """Raised when a log-type cost is evaluated where its log argument is not positive."""


class CExpError(CostError):
    pass


def _pair(x, xb):
    x = np.asarray(x, dtype=float)
    xb = np.asarray(xb, dtype=float)
    return x, xb


class CostModel:
    """Base class.  Subclasses provide ``cost``, ``grad_x``, ``grad_xb``, ``cross``."""

    name = "abstract"
    dim = 2
    fd_step = 1e-3

    def __init__(self, s_min=0.0, fd_step=None, source_chart=None, target_chart=None):
        self.s_min = float(s_min)
        if fd_step is not None:
            self.fd_step = float(fd_step)
        self.source_chart = source_chart or IdentityChart()
        self.target_chart = target_chart or IdentityChart()

    # -- evaluation -------------------------------------------------------
    def evaluate(self, x, xb):
        """Cost at chart coordinates (or ambient points for sphere models)."""
        x, xb = _pair(x, xb)
        return self.cost(x, xb)

    def admissible(self, x, xb):
        """Mask of pairs inside the model's domain of definition."""
        x, xb = _pair(x, xb)
        return np.ones(np.broadcast_shapes(x.shape[:-1], xb.shape[:-1]), dtype=bool)

    def neg_cross(self, x, xb):
        return -self.cross(x, xb)

    # -- c-exponential maps -----------------------------------------------
    def c_exp_source(self, x, pbar, guess=None):
        """Solve ``-Dc(x, xb) = pbar`` for ``xb``."""
        x, pbar = _pair(x, pbar)
        x = np.broadcast_to(x, np.broadcast_shapes(x.shape, pbar.shape))
        z0 = self._default_target_guess(x) if guess is None else guess

        def residual(z):
            return -self.grad_x(x, z) - pbar

        def jacobian(z):
            return -self.cross(x, z)

        return _newton(residual, jacobian, z0, "target")

    def c_exp_target(self, xb, p, guess=None):
        """Solve ``-D̄c(x, xb) = p`` for ``x``."""
        xb, p = _pair(xb, p)
        xb = np.broadcast_to(xb, np.broadcast_shapes(xb.shape, p.shape))
        z0 = self._default_source_guess(xb) if guess is None else guess

        def residual(z):
            return -self.grad_xb(z, xb) - p

        def jacobian(z):
            return -np.swapaxes(self.cross(z, xb), -1, -2)

        return _newton(residual, jacobian, z0, "source")

    def _default_target_guess(self, x):
        return np.zeros_like(x)

    def _default_source_guess(self, xb):
        return np.zeros_like(xb)

    def __repr__(self):
        return f"{type(self).__name__}(s_min={self.s_min})"


def _newton(residual, jacobian, z0, side, tol=1e-12, max_iter=50):
    z = np.array(np.broadcast_to(z0, np.shape(residual(np.asarray(z0, dtype=float)))), dtype=float)
    with np.errstate(all="ignore"):
        r = residual(z)
        norm = np.linalg.norm(r, axis=-1)
        for _ in range(max_iter):
            if np.all(norm <= tol):
                break
            step = np.linalg.solve(jacobian(z), r[..., None])[..., 0]
            t = np.ones(norm.shape)
            # damped step: halve until the residual decreases
            for _ in range(40):
                trial = z - t[..., None] * step
                r_trial = residual(trial)
                n_trial = np.linalg.norm(r_trial, axis=-1)
                ok = np.isfinite(n_trial) & (n_trial < norm)
                if np.all(ok | (norm <= tol)):
                    break
                t = np.where(ok | (norm <= tol), t, 0.5 * t)
            accept = ok & (norm > tol)
            z = np.where(accept[..., None], trial, z)
            r = np.where(accept[..., None], r_trial, r)
            norm = np.where(accept, n_trial, norm)
    if not np.all(norm <= 1e-9):
        worst = np.max(np.where(np.isfinite(norm), norm, np.inf))
        raise CExpError(
            f"Newton did not converge (max residual {worst:.3g}); "
            f"covector outside admissible cotangent image of the {side} domain"
        )
    return z


class QuadraticCost(CostModel):
    """``c = |x - xb|^2 / 2`` on the plane."""

    name = "quadratic"

    def cost(self, x, xb):
        d = x - xb
        return 0.5 * np.sum(d * d, axis=-1)

    def grad_x(self, x, xb):
        return x - xb

    def grad_xb(self, x, xb):
        return xb - x

    def cross(self, x, xb):
        shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(xb)[:-1])
        return np.broadcast_to(-np.eye(2), shape + (2, 2)).copy()

    def c_exp_source(self, x, pbar, guess=None):
        x, pbar = _pair(x, pbar)
        return x + pbar

    def c_exp_target(self, xb, p, guess=None):
        xb, p = _pair(xb, p)
        return xb + p


class LogDistanceCost(CostModel):
    """``c = -log|x - xb|`` on separated planar domains."""

    name = "log"

    def _diff(self, x, xb):
        w = x - xb
        r2 = np.sum(w * w, axis=-1)
        if np.any(r2 <= 0):
            raise DomainSeparationError("log cost evaluated at coincident points (log argument <= 0)")
        return w, r2

    def admissible(self, x, xb):
        x, xb = _pair(x, xb)
        return np.linalg.norm(x - xb, axis=-1) >= max(self.s_min, 1e-300)

    def cost(self, x, xb):
        _, r2 = self._diff(x, xb)
        return -0.5 * np.log(r2)

    def grad_x(self, x, xb):
        w, r2 = self._diff(x, xb)
        return -w / r2[..., None]

    def grad_xb(self, x, xb):
        w, r2 = self._diff(x, xb)
        return w / r2[..., None]

    def cross(self, x, xb):
        w, r2 = self._diff(x, xb)
        outer = w[..., :, None] * w[..., None, :]
        return np.eye(2) / r2[..., None, None] - 2.0 * outer / (r2 * r2)[..., None, None]

    def _default_target_guess(self, x):
        return x + 1.0

    def _default_source_guess(self, xb):
        return xb + 1.0


class ReflectorCost(CostModel):
    """``c = -log(1 - <x, xb>)`` between spherical caps (far-field reflector).

    ``source`` is the source :class:`SphericalCap`; ``target_center`` fixes the
    gnomonic chart used for target points.
    """

    name = "reflector"

    def __init__(self, source, target_center, s_min=0.0, fd_step=None):
        chart = source.chart if isinstance(source, SphericalCap) else GnomonicChart(source)
        super().__init__(s_min, fd_step, chart, GnomonicChart(target_center))

    def evaluate(self, x, xb):
        x, xb = _pair(x, xb)
        if x.shape[-1] == 3 and xb.shape[-1] == 3:
            g = 1.0 - np.sum(x * xb, axis=-1)
            if np.any(g <= 0):
                raise DomainSeparationError("reflector cost needs <x, xb> < 1 (log argument <= 0)")
            return -np.log(g)
        return self.cost(x, xb)

    def _parts(self, x, xb):
        X, JX = self.source_chart.lift(x)
        Y, JY = self.target_chart.lift(xb)
        g = 1.0 - np.sum(X * Y, axis=-1)
        if np.any(g <= 0):
            raise DomainSeparationError("reflector cost needs <x, xb> < 1 (log argument <= 0)")
        return X, JX, Y, JY, g

    def admissible(self, x, xb):
        x, xb = _pair(x, xb)
        X = self.source_chart.lift(x)[0]
        Y = self.target_chart.lift(xb)[0]
        return 1.0 - np.sum(X * Y, axis=-1) >= max(self.s_min, 1e-300)

    def cost(self, x, xb):
        *_, g = self._parts(x, xb)
        return -np.log(g)

    def grad_x(self, x, xb):
        X, JX, Y, JY, g = self._parts(x, xb)
        return np.einsum("...ka,...k->...a", JX, Y) / g[..., None]

    def grad_xb(self, x, xb):
        X, JX, Y, JY, g = self._parts(x, xb)
        return np.einsum("...k,...kb->...b", X, JY) / g[..., None]

    def cross(self, x, xb):
        X, JX, Y, JY, g = self._parts(x, xb)
        sa = np.einsum("...ka,...k->...a", JX, Y)
        sb = np.einsum("...k,...kb->...b", X, JY)
        sab = np.einsum("...ka,...kb->...ab", JX, JY)
        return sab / g[..., None, None] + sa[..., :, None] * sb[..., None, :] / (g * g)[..., None, None]


class ExpressionCost(CostModel):
    """User cost from the expression language, differentiated by central differences.

    Variables are ``x1, x2`` (source) and ``xb1, xb2`` (target) in planar
    coordinates.  Logs of nonpositive arguments are rejected like the
    built-in log costs.
    """

    name = "expression"
    variables = ("x1", "x2", "xb1", "xb2")

    def __init__(self, source, s_min=0.0, fd_step=None, grad_step=1e-6, cross_step=1e-4):
        super().__init__(s_min, fd_step)
        self.expression = source if isinstance(source, Expression) else Expression(source, self.variables)
        self.grad_step = grad_step
        self.cross_step = cross_step

    def cost(self, x, xb):
        x, xb = _pair(x, xb)
        x, xb = np.broadcast_arrays(x, xb)
        value = self.expression({"x1": x[..., 0], "x2": x[..., 1], "xb1": xb[..., 0], "xb2": xb[..., 1]})
        value = np.broadcast_to(value, x.shape[:-1]).astype(float)
        if not np.all(np.isfinite(value)):
            raise DomainSeparationError(f"cost {self.expression.source!r} is not finite at some arguments")
        return value

    def admissible(self, x, xb):
        x, xb = np.broadcast_arrays(*_pair(x, xb))
        try:
            self.cost(x, xb)
        except DomainSeparationError:
            with np.errstate(all="ignore"):
                v = self.expression({"x1": x[..., 0], "x2": x[..., 1], "xb1": xb[..., 0], "xb2": xb[..., 1]})
            return np.isfinite(np.broadcast_to(v, x.shape[:-1]))
        return np.ones(x.shape[:-1], dtype=bool)

    def _grad(self, x, xb, wrt):
        h = self.grad_step
        x, xb = np.broadcast_arrays(*_pair(x, xb))
        out = np.empty(x.shape)
        for a in range(2):
            e = np.zeros(2)
            e[a] = h
            if wrt == 0:
                out[..., a] = (self.cost(x + e, xb) - self.cost(x - e, xb)) / (2 * h)
            else:
                out[..., a] = (self.cost(x, xb + e) - self.cost(x, xb - e)) / (2 * h)
        return out

    def grad_x(self, x, xb):
        return self._grad(x, xb, 0)

    def grad_xb(self, x, xb):
        return self._grad(x, xb, 1)

    def cross(self, x, xb):
        h = self.cross_step
        x, xb = np.broadcast_arrays(*_pair(x, xb))
        out = np.empty(x.shape[:-1] + (2, 2))
        eye = np.eye(2) * h
        for a in range(2):
            for b in range(2):
                ea, eb = eye[a], eye[b]
                out[..., a, b] = (self.cost(x + ea, xb + eb) - self.cost(x + ea, xb - eb)
                                  - self.cost(x - ea, xb + eb) + self.cost(x - ea, xb - eb)) / (4 * h * h)
        return out

    def _default_target_guess(self, x):
        return x + 0.5

    def _default_source_guess(self, xb):
        return xb + 0.5


def cotangent_coords(cost: CostModel, points, xb):
    """Representation ``-D̄c(E, xb)`` of source points in the cotangent space at ``xb``."""
    return -cost.grad_xb(np.asarray(points, dtype=float), np.asarray(xb, dtype=float))


# -- sampling helpers -------------------------------------------------------

def sample_chart_points(domain, count, rng):
    """Uniform (by area) samples of ``domain`` in its chart coordinates."""
    if isinstance(domain, Rectangle):
        lo, hi = np.array(domain.lower), np.array(domain.upper)
        return lo + rng.random((count, 2)) * (hi - lo)
    if isinstance(domain, SphericalCap):
        cos_t = 1.0 - rng.random(count) * (1.0 - math.cos(domain.radius))
        theta = np.arccos(cos_t)
        phi = 2 * math.pi * rng.random(count)
        return domain.chart.to_chart(domain._embed(theta, phi))
    lo = np.min(np.asarray(domain.vertices), axis=0)
    hi = np.max(np.asarray(domain.vertices), axis=0)
    out = []
    while sum(len(o) for o in out) < count:
        p = lo + rng.random((2 * count, 2)) * (hi - lo)
        out.append(p[domain.contains(p)])
    return np.concatenate(out)[:count]


def sample_admissible_pairs(cost, source, target, count, rng, max_rounds=50):
    xs, xbs = [], []
    got = 0
    for _ in range(max_rounds):
        x = sample_chart_points(source, 2 * count, rng)
        xb = sample_chart_points(target, 2 * count, rng)
        ok = cost.admissible(x, xb)
        xs.append(x[ok])
        xbs.append(xb[ok])
        got += int(ok.sum())
        if got >= count:
            break
    if got < count:
        raise CostError("could not sample enough admissible (x, xb) pairs; check s_min and domains")
    return np.concatenate(xs)[:count], np.concatenate(xbs)[:count]


# -- condition checks -------------------------------------------------------

@dataclass
class ConditionReport:
    twist_ok: bool | None = None
    twist_min_ratio: float | None = None
    nondeg_min_det: float | None = None
    mtw_delta0_estimate: float | None = None
    mtw_unreliable: int = 0
    gradient_max_error: float | None = None
    samples_used: int = 0
    c_convex: list = field(default_factory=list)

    TWIST_THRESHOLD = 1e-8
    NONDEG_THRESHOLD = 1e-10
    GRADIENT_THRESHOLD = 1e-5

    @property
    def nondeg_ok(self):
        return self.nondeg_min_det is not None and self.nondeg_min_det > self.NONDEG_THRESHOLD

    @property
    def mtw_positive(self):
        return self.mtw_delta0_estimate is not None and self.mtw_delta0_estimate > 0

    def rows(self):
        """``(check, value, threshold, pass)`` rows for CSV export."""
        rows = [
            ("twist_min_ratio", self.twist_min_ratio, self.TWIST_THRESHOLD, self.twist_ok),
            ("nondeg_min_abs_det", self.nondeg_min_det, self.NONDEG_THRESHOLD, self.nondeg_ok),
            ("mtw_delta0_estimate", self.mtw_delta0_estimate, 0.0, self.mtw_positive),
            ("mtw_unreliable_samples", self.mtw_unreliable, 0, self.mtw_unreliable == 0),
            ("gradient_max_rel_error", self.gradient_max_error, self.GRADIENT_THRESHOLD,
             None if self.gradient_max_error is None else self.gradient_max_error <= self.GRADIENT_THRESHOLD),
        ]
        for i, ok in enumerate(self.c_convex, start=1):
            rows.append((f"c_convex_domain_target_{i}", int(ok), 1, ok))
        return rows


def check_twist(cost, sample_count, source, target, rng=None):
    """Minimum ratio ``|Dc(x, xb_a) - Dc(x, xb_b)| / |xb_a - xb_b|`` (and the mirrored one)."""
    if sample_count < 100:
        raise CostError("twist check needs at least 100 samples")
    rng = np.random.default_rng(rng)
    x, xa = sample_admissible_pairs(cost, source, target, sample_count, rng)
    _, xbb = sample_admissible_pairs(cost, source, target, sample_count, rng)
    keep = cost.admissible(x, xbb) & (np.linalg.norm(xa - xbb, axis=-1) > 1e-12)
    ratio_t = (np.linalg.norm(cost.grad_x(x[keep], xa[keep]) - cost.grad_x(x[keep], xbb[keep]), axis=-1)
               / np.linalg.norm(xa[keep] - xbb[keep], axis=-1))
    y, xb = sample_admissible_pairs(cost, source, target, sample_count, rng)
    y2, _ = sample_admissible_pairs(cost, source, target, sample_count, rng)
    keep = cost.admissible(y2, xb) & (np.linalg.norm(y - y2, axis=-1) > 1e-12)
    ratio_s = (np.linalg.norm(cost.grad_xb(y[keep], xb[keep]) - cost.grad_xb(y2[keep], xb[keep]), axis=-1)
               / np.linalg.norm(y[keep] - y2[keep], axis=-1))
    worst = float(min(ratio_t.min(), ratio_s.min()))
    return ConditionReport(twist_ok=worst >= ConditionReport.TWIST_THRESHOLD,
                           twist_min_ratio=worst, samples_used=len(ratio_t) + len(ratio_s))


def check_nondeg(cost, sample_count, source, target, rng=None):
    rng = np.random.default_rng(rng)
    x, xb = sample_admissible_pairs(cost, source, target, sample_count, rng)
    det = np.abs(np.linalg.det(cost.neg_cross(x, xb)))
    return ConditionReport(nondeg_min_det=float(det.min()), samples_used=sample_count)


def check_gradients(cost, sample_count, source, target, rng=None, step=1e-6, cross_step=1e-4):
    """Largest mismatch between analytic derivatives and central differences.

    Errors are relative to ``max(|finite difference|, 1)``.  The cross matrix
    is differenced from ``grad_x`` with the coarser ``cross_step`` so that
    models whose gradients are themselves finite differences stay above
    roundoff.
    """
    rng = np.random.default_rng(rng)
    x, xb = sample_admissible_pairs(cost, source, target, sample_count, rng)
    eye = np.eye(2) * step
    fd_x = np.stack([(cost.cost(x + e, xb) - cost.cost(x - e, xb)) / (2 * step) for e in eye], axis=-1)
    fd_xb = np.stack([(cost.cost(x, xb + e) - cost.cost(x, xb - e)) / (2 * step) for e in eye], axis=-1)
    fd_cross = np.stack([(cost.grad_x(x, xb + e) - cost.grad_x(x, xb - e)) / (2 * cross_step)
                         for e in np.eye(2) * cross_step], axis=-1)

    def rel(a, b, axes):
        return np.linalg.norm(a - b, axis=axes) / np.maximum(np.linalg.norm(b, axis=axes), 1.0)

    err = max(rel(cost.grad_x(x, xb), fd_x, -1).max(), rel(cost.grad_xb(x, xb), fd_xb, -1).max(),
              rel(cost.cross(x, xb), fd_cross, (-2, -1)).max())
    return ConditionReport(gradient_max_error=float(err), samples_used=sample_count)


def mtw_contraction(cost, x, xb, V, eta, step=None, max_condition=1e8):
    """MTW tensor contraction ``MTW_{ij,kl} V^i V^j eta_k eta_l`` at ``(x, xb)``.

    ``eta`` is projected onto the orthogonal complement of ``V`` and both are
    normalized.  Third and fourth mixed derivatives come from nested central
    differences of the analytic cross matrix with step ``step`` (default
    ``cost.fd_step``).  Returns ``nan`` when ``-DD̄c`` is too ill-conditioned
    for the finite differences to be trusted.  Arrays of tuples are
    evaluated elementwise.
    """
    h = cost.fd_step if step is None else float(step)
    x = np.asarray(x, dtype=float)
    xb = np.asarray(xb, dtype=float)
    V = np.asarray(V, dtype=float)
    eta = np.asarray(eta, dtype=float)
    x, xb, V, eta = np.broadcast_arrays(x, xb, V, eta)
    V = V / np.linalg.norm(V, axis=-1, keepdims=True)
    eta = eta - np.sum(eta * V, axis=-1, keepdims=True) * V
    eta = eta / np.linalg.norm(eta, axis=-1, keepdims=True)

    A = cost.cross(x, xb)
    eye = np.eye(2) * h
    c3x = np.stack([(cost.cross(x + e, xb) - cost.cross(x - e, xb)) / (2 * h) for e in eye], axis=-2)
    # c3x[..., i, j, p] = d/dx_j c_{i,p}
    c3xb = np.stack([(cost.cross(x, xb + e) - cost.cross(x, xb - e)) / (2 * h) for e in eye], axis=-1)
    # c3xb[..., s, p, q] = d/dxb_q c_{s,p}
    c4 = np.empty(x.shape[:-1] + (2, 2, 2, 2))
    for j, ej in enumerate(eye):
        for q, eq in enumerate(eye):
            c4[..., :, j, :, q] = (cost.cross(x + ej, xb + eq) - cost.cross(x + ej, xb - eq)
                                   - cost.cross(x - ej, xb + eq) + cost.cross(x - ej, xb - eq)) / (4 * h * h)
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(A)
    bad = ~(cond <= max_condition)
    # singular samples get a stand-in matrix and are masked to nan below
    Ainv = np.linalg.inv(np.where(bad[..., None, None], np.eye(2), A))  # Ainv[..., p, s]
    T = np.einsum("...ijr,...rs,...spq->...ijpq", c3x, Ainv, c3xb) - c4
    eta_up = np.einsum("...pk,...k->...p", Ainv, eta)
    value = np.einsum("...ijpq,...i,...j,...p,...q->...", T, V, V, eta_up, eta_up)
    return np.where(bad, np.nan, value)


def check_mtw(cost, sample_count, source, target, rng=None, step=None):
    rng = np.random.default_rng(rng)
    x, xb = sample_admissible_pairs(cost, source, target, sample_count, rng)
    ang = 2 * math.pi * rng.random(sample_count)
    V = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    eta = np.stack([-np.sin(ang), np.cos(ang)], axis=-1)
    vals = mtw_contraction(cost, x, xb, V, eta, step=step)
    bad = ~np.isfinite(vals)
    est = float(np.min(vals[~bad])) if np.any(~bad) else float("nan")
    return ConditionReport(mtw_delta0_estimate=est, mtw_unreliable=int(bad.sum()), samples_used=sample_count)


def image_polygon(cost, domain, xb, boundary_samples=400):
    """Ordered image ``-D̄c(∂Ω, xb)`` of boundary samples of ``domain``."""
    pts = domain.boundary_samples(boundary_samples)
    if domain.ambient_dim == 3:
        pts = domain.chart.to_chart(pts)
    return cotangent_coords(cost, pts, xb)


def polygon_is_convex(poly, rel_tol=1e-9):
    """True when the closed polygon turns one way only and winds exactly once."""
    p = np.asarray(poly, dtype=float)
    keep = np.ones(len(p), dtype=bool)
    keep[1:] = np.linalg.norm(np.diff(p, axis=0), axis=-1) > 0
    p = p[keep]
    if len(p) > 1 and np.allclose(p[0], p[-1], rtol=0, atol=0):
        p = p[:-1]
    if len(p) < 3:
        return False
    e = np.roll(p, -1, axis=0) - p
    f = np.roll(e, -1, axis=0)
    crosses = e[:, 0] * f[:, 1] - e[:, 1] * f[:, 0]
    scale = np.linalg.norm(e, axis=-1) * np.linalg.norm(f, axis=-1)
    tol = rel_tol * scale
    one_signed = np.all(crosses >= -tol) or np.all(crosses <= tol)
    turning = np.arctan2(crosses, np.sum(e * f, axis=-1)).sum()
    return bool(one_signed and abs(abs(turning) - 2 * math.pi) < 1e-6)


def check_c_convexity_of_domain(cost, domain, targets, boundary_samples=400):
    """Per-target flag: is the image of ``domain`` in cotangent coordinates convex?"""
    return [polygon_is_convex(image_polygon(cost, domain, xb, boundary_samples))
            for xb in np.atleast_2d(np.asarray(targets, dtype=float))]


def verify_conditions(cost, source, target, targets=None, sample_count=1000, rng=None):
    """Run every numerical condition check and merge the results."""
    rng = np.random.default_rng(rng)
    twist = check_twist(cost, max(sample_count, 100), source, target, rng)
    nondeg = check_nondeg(cost, sample_count, source, target, rng)
    mtw = check_mtw(cost, min(sample_count, 200), source, target, rng)
    grad = check_gradients(cost, sample_count, source, target, rng)
    report = ConditionReport(
        twist_ok=twist.twist_ok, twist_min_ratio=twist.twist_min_ratio,
        nondeg_min_det=nondeg.nondeg_min_det,
        mtw_delta0_estimate=mtw.mtw_delta0_estimate, mtw_unreliable=mtw.mtw_unreliable,
        gradient_max_error=grad.gradient_max_error,
        samples_used=twist.samples_used + nondeg.samples_used + mtw.samples_used + grad.samples_used,
    )
    if targets is not None:
        report.c_convex = check_c_convexity_of_domain(cost, source, targets)
    return report
