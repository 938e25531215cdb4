"""Run configuration files (TOML) and their validation.

Every problem found while parsing is collected, so a bad file reports all of
its faults at once.  See ``configs/SCHEMA.md`` for the key reference.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cost import LogDistanceCost, QuadraticCost, ReflectorCost, ExpressionCost
from .expr import Expression, ExpressionError
from .geometry import Rectangle, SphericalCap, build_grid, normalize_measure, GeometryError
from .partition import Problem, make_targets
from .scheme import SchemeConfig, compute_delta

COST_MODELS = ("quadratic", "log", "reflector", "expression")
DOMAIN_KINDS = ("rectangle", "cap")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass
class OracleSettings:
    enabled: bool = True
    resolution: int | None = None
    epsilon: float | None = None
    resolution_factor: float | None = None
    max_relative_gap: float = 0.02
    max_out_of_band: int = 0
    max_atoms: int = 10_000


@dataclass
class RunConfig:
    cost: dict
    domain: dict
    resolution: int
    density: str
    points: np.ndarray
    masses: np.ndarray
    epsilon: float
    scheme: SchemeConfig
    target_domain: dict | None = None
    oracle: OracleSettings = field(default_factory=OracleSettings)
    seed: int = 0
    output_dir: str = "out"
    check_samples: int = 1000
    source: str | None = None

    @property
    def K(self):
        return len(self.masses)

    def build_domain(self):
        return _make_domain(self.domain)

    def build_target_domain(self):
        if self.target_domain is not None:
            return _make_domain(self.target_domain)
        return default_target_domain(self)

    def build_cost(self, source_domain=None):
        spec = self.cost
        model = spec["model"]
        s_min = float(spec.get("s_min", 0.0))
        fd = spec.get("fd_step")
        if model == "quadratic":
            return QuadraticCost(fd_step=fd)
        if model == "log":
            return LogDistanceCost(s_min=s_min, fd_step=fd)
        if model == "expression":
            return ExpressionCost(spec["expression"], s_min=s_min, fd_step=fd)
        domain = source_domain or self.build_domain()
        return ReflectorCost(domain, reflector_target_center(self), s_min=s_min, fd_step=fd)

    def build_problem(self, resolution=None):
        domain = self.build_domain()
        cost = self.build_cost(domain)
        grid = build_grid(domain, resolution or self.resolution)
        measure = normalize_measure(grid, self.density)
        targets = make_targets(self.points, self.masses, cost.target_chart)
        return Problem(cost, measure, targets)


def reflector_target_center(cfg):
    c = cfg.cost.get("target_center")
    if c is None and cfg.target_domain is not None:
        c = cfg.target_domain.get("center")
    if c is None:
        c = np.mean(cfg.points, axis=0)
    c = np.asarray(c, dtype=float)
    return c / np.linalg.norm(c)


def default_target_domain(cfg):
    """Smallest padded box (or cap) around the targets, used by the condition checks."""
    pts = np.asarray(cfg.points, dtype=float)
    if cfg.domain["kind"] == "cap":
        c = reflector_target_center(cfg)
        ang = np.arccos(np.clip(pts @ c / np.linalg.norm(pts, axis=1), -1, 1)).max()
        return SphericalCap(tuple(c), min(max(1.25 * ang, 0.05), 0.45 * math.pi))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = np.maximum(0.05 * (hi - lo).max(), 1e-3)
    return Rectangle(tuple(lo - pad), tuple(hi + pad))


def _number(value, path, problems):
    """Numbers may be literals or constant expressions such as ``"pi/6"``."""
    if isinstance(value, bool):
        problems.append(f"{path}: expected a number, got a boolean")
        return math.nan
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Expression(value, ())({}))
        except ExpressionError as exc:
            problems.append(f"{path}: {exc}")
            return math.nan
    problems.append(f"{path}: expected a number, got {type(value).__name__}")
    return math.nan


def _vector(value, path, problems, dim=None):
    if not isinstance(value, (list, tuple)):
        problems.append(f"{path}: expected a list of numbers")
        return None
    out = [_number(v, f"{path}[{k}]", problems) for k, v in enumerate(value)]
    if dim is not None and len(out) != dim:
        problems.append(f"{path}: expected {dim} components, got {len(out)}")
        return None
    return out


def _parse_domain(table, path, problems):
    if not isinstance(table, dict):
        problems.append(f"{path}: missing table")
        return None
    kind = table.get("kind")
    if kind not in DOMAIN_KINDS:
        problems.append(f"{path}.kind: expected one of {DOMAIN_KINDS}, got {kind!r}")
        return None
    if kind == "rectangle":
        lo = _vector(table.get("lower"), f"{path}.lower", problems, 2)
        hi = _vector(table.get("upper"), f"{path}.upper", problems, 2)
        if lo is None or hi is None:
            return None
        spec = {"kind": kind, "lower": lo, "upper": hi}
    else:
        c = _vector(table.get("center"), f"{path}.center", problems, 3)
        r = _number(table.get("radius"), f"{path}.radius", problems)
        if c is None:
            return None
        spec = {"kind": kind, "center": c, "radius": r}
    try:
        _make_domain(spec)
    except GeometryError as exc:
        problems.append(f"{path}: {exc}")
        return None
    return spec


def _make_domain(spec):
    if spec["kind"] == "rectangle":
        return Rectangle(tuple(spec["lower"]), tuple(spec["upper"]))
    return SphericalCap(tuple(spec["center"]), spec["radius"])


def parse_config(path, overrides=None) -> RunConfig:
    """Read and validate a TOML run config; raises :class:`ConfigError` listing every fault."""
    text = Path(path).read_text()
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: not valid TOML ({exc})"]) from None
    if overrides:
        raw.update(overrides)
    cfg = config_from_dict(raw)
    cfg.source = str(path)
    return cfg


def config_from_dict(raw) -> RunConfig:
    problems = []
    known = {"seed", "epsilon", "cost", "domain", "density", "targets", "scheme", "oracle",
             "output", "target_domain", "checks"}
    for key in raw:
        if key not in known:
            problems.append(f"{key}: unknown key")

    cost = raw.get("cost")
    if not isinstance(cost, dict) or cost.get("model") not in COST_MODELS:
        problems.append(f"cost.model: expected one of {COST_MODELS}")
        cost = None
    elif cost["model"] == "expression" and not isinstance(cost.get("expression"), str):
        problems.append("cost.expression: required for the expression model")
    elif cost["model"] == "expression":
        try:
            Expression(cost["expression"], ExpressionCost.variables)
        except ExpressionError as exc:
            problems.append(f"cost.expression: {exc}")
    if cost is not None:
        cost = dict(cost)
        for key in ("s_min", "fd_step"):
            if key in cost:
                cost[key] = _number(cost[key], f"cost.{key}", problems)
        if "target_center" in cost:
            cost["target_center"] = _vector(cost["target_center"], "cost.target_center", problems, 3)

    domain_table = raw.get("domain")
    domain = _parse_domain(domain_table, "domain", problems)
    resolution = domain_table.get("resolution") if isinstance(domain_table, dict) else None
    if not isinstance(resolution, int) or isinstance(resolution, bool) or resolution < 1:
        problems.append("domain.resolution: expected a positive integer")
        resolution = None
    if domain and cost:
        planar = cost["model"] in ("quadratic", "log", "expression")
        if planar and domain["kind"] != "rectangle":
            problems.append(f"domain.kind: cost model {cost['model']!r} needs a rectangle")
        if not planar and domain["kind"] != "cap":
            problems.append("domain.kind: the reflector cost needs a cap")

    target_domain = None
    if "target_domain" in raw:
        target_domain = _parse_domain(raw["target_domain"], "target_domain", problems)

    density = raw.get("density", {"expression": "1"})
    density = density.get("expression", "1") if isinstance(density, dict) else density
    if not isinstance(density, str):
        problems.append("density.expression: expected a string")
        density = "1"

    targets = raw.get("targets")
    points, masses = [], []
    dim = 3 if domain and domain["kind"] == "cap" else 2
    if not isinstance(targets, list) or not targets:
        problems.append("targets: need at least one [[targets]] entry")
    else:
        for k, t in enumerate(targets):
            if isinstance(t, dict):
                problems.extend(f"targets[{k}].{key}: unknown key" for key in t if key not in ("point", "mass"))
            p = _vector(t.get("point"), f"targets[{k}].point", problems, dim) if isinstance(t, dict) else None
            m = _number(t.get("mass"), f"targets[{k}].mass", problems) if isinstance(t, dict) else math.nan
            if p is not None:
                points.append(p)
            masses.append(m)
    masses = np.array(masses, dtype=float)
    K = len(masses)
    if K > 1 and np.any(~(masses > 0) | ~(masses < 1)):
        problems.append("targets.mass: every mass must lie in (0, 1)")
    if K and abs(math.fsum(masses) - 1.0) > 1e-12:
        problems.append(f"targets.mass: masses must sum to 1 within 1e-12, got {math.fsum(masses)!r}")
    pts = np.array(points, dtype=float) if len(points) == K else None
    if pts is not None and K > 1:
        diff = np.linalg.norm(pts[:, None] - pts[None], axis=-1)[np.triu_indices(K, 1)]
        if np.any(diff <= 0):
            problems.append("targets.point: target points must be pairwise distinct")

    epsilon = _number(raw.get("epsilon"), "epsilon", problems)
    if not epsilon > 0:
        problems.append("epsilon: must be positive")
    elif K > 1 and np.all(masses > 0) and epsilon >= masses.min():
        problems.append(f"epsilon: must be below min f_i = {masses.min():g}; "
                        f"recommended range (0, {masses.min():g}), e.g. {masses.min() / 10:g}")

    s = raw.get("scheme", {})
    scheme = None
    try:
        scheme = SchemeConfig(
            epsilon if epsilon > 0 else 1.0,
            bisection_tolerance=_number(s.get("bisection_tolerance", 0.1), "scheme.bisection_tolerance", problems),
            max_outer_iterations=s.get("max_outer_iterations"),
            resolution_factor=_number(s.get("resolution_factor", 0.25), "scheme.resolution_factor", problems),
        )
    except ValueError as exc:
        problems.append(f"scheme: {exc}")

    o = raw.get("oracle", {})
    oracle = OracleSettings(
        enabled=bool(o.get("enabled", True)),
        resolution=o.get("resolution"),
        epsilon=_number(o["epsilon"], "oracle.epsilon", problems) if "epsilon" in o else None,
        resolution_factor=(_number(o["resolution_factor"], "oracle.resolution_factor", problems)
                           if "resolution_factor" in o else None),
        max_relative_gap=_number(o.get("max_relative_gap", 0.02), "oracle.max_relative_gap", problems),
        max_out_of_band=int(o.get("max_out_of_band", 0)),
        max_atoms=int(o.get("max_atoms", 10_000)),
    )

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        problems.append("seed: expected an integer")
    out = raw.get("output", {})
    checks = raw.get("checks", {})

    if problems:
        raise ConfigError(problems)
    cfg = RunConfig(cost, domain, resolution, density, pts, masses, epsilon, scheme,
                    target_domain, oracle, seed, out.get("dir", "out"),
                    int(checks.get("samples", 1000)))
    _check_resolution(cfg, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def grid_spacing(cfg, resolution=None):
    return build_grid(cfg.build_domain(), resolution or cfg.resolution).h


def _check_resolution(cfg, problems):
    if cfg.K < 2:
        return
    delta = compute_delta(cfg.epsilon, cfg.K, cfg.masses[0])
    factor = cfg.scheme.resolution_factor
    h = grid_spacing(cfg)
    if h > factor * delta:
        need = int(math.ceil(cfg.resolution * h / (factor * delta)))
        problems.append(f"domain.resolution: grid spacing h={h:.4g} exceeds "
                        f"{factor:g}*delta={factor * delta:.4g}; use resolution >= {need}")
