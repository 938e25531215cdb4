import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdot.expr import Expression, ExpressionError
from sdot.geometry import (GeometryError, GnomonicChart, Polygon, Rectangle, SphericalCap,
                           build_grid, integrate_indicator, normalize_measure, write_grid_csv)

UNIT = Rectangle((0.0, 0.0), (1.0, 1.0))


def test_two_by_two_grid():
    g = build_grid(UNIT, 2)
    assert len(g) == 4
    np.testing.assert_allclose(g.volumes, 0.25)
    assert sorted(map(tuple, g.centers)) == [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)]


def test_unit_square_volumes_sum_to_one():
    assert build_grid(UNIT, 100).total_volume == pytest.approx(1.0, abs=1e-14)


def test_cap_area():
    cap = SphericalCap((0, 0, 1), math.pi / 6)
    g = build_grid(cap, 32)
    assert abs(g.total_volume - 2 * math.pi * (1 - math.cos(math.pi / 6))) < 1e-6
    assert np.all(cap.contains(g.centers))
    assert len(g) == 3 * 32 * 32


def test_cap_area_error_does_not_grow_under_refinement():
    cap = SphericalCap((0, 1, 1), 0.7)
    errs = [abs(build_grid(cap, n).total_volume - cap.area) for n in (8, 16, 32, 64)]
    for a, b in zip(errs, errs[1:]):
        assert b <= 1.1 * a + 1e-14


@pytest.mark.parametrize("bad", [
    lambda: Rectangle((0, 0), (0, 1)),
    lambda: Rectangle((0, 0), (float("nan"), 1)),
    lambda: SphericalCap((0, 0, 1), 0.0),
    lambda: SphericalCap((0, 0, 1), 2.0),
    lambda: SphericalCap((0, 0, 0), 0.3),
    lambda: Polygon([(0, 0), (1, 0)]),
    lambda: build_grid(UNIT, 1),
])
def test_degenerate_domains_rejected(bad):
    with pytest.raises(GeometryError):
        bad()


def test_constant_density_normalizes():
    g = build_grid(UNIT, 10)
    m1 = normalize_measure(g, "1")
    m3 = normalize_measure(g, "3")
    np.testing.assert_allclose(m1.density, 1.0)
    assert m1.scale == pytest.approx(1.0)
    np.testing.assert_allclose(m3.density, 1.0)
    assert m3.raw_total == pytest.approx(3.0)


def test_linear_density_total():
    m = normalize_measure(build_grid(UNIT, 200), "1 + x")
    assert abs(m.raw_total - 1.5) < 1e-4
    assert m.total == pytest.approx(1.0, abs=1e-12)


def test_density_forms_agree():
    g = build_grid(UNIT, 12)
    a = normalize_measure(g, "1 + x1*y")
    b = normalize_measure(g, lambda c: 1 + c[:, 0] * c[:, 1])
    c = normalize_measure(g, 1 + g.centers[:, 0] * g.centers[:, 1])
    np.testing.assert_allclose(a.density, b.density)
    np.testing.assert_allclose(a.density, c.density)


def test_nonpositive_density_rejected():
    with pytest.raises(GeometryError, match="strictly positive"):
        normalize_measure(build_grid(UNIT, 10), "x - 0.5")


def test_indicator_integrals():
    m = normalize_measure(build_grid(UNIT, 40), "1")
    all_true = np.ones(len(m.density), dtype=bool)
    assert integrate_indicator(m, all_true) == pytest.approx(1.0, abs=1e-12)
    assert integrate_indicator(m, ~all_true) == 0.0


def test_half_slab_refinement():
    ratios = []
    for n in (50, 100, 200, 400):
        m = normalize_measure(build_grid(UNIT, n), "1")
        h = 1.0 / n
        err = abs(integrate_indicator(m, m.grid.centers[:, 0] <= 0.75) - 0.75)
        assert err <= h
        ratios.append(err / h)
    assert max(ratios) <= 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_partition_additivity(n, seed):
    m = normalize_measure(build_grid(UNIT, n), "1 + x*x + y")
    r = np.random.default_rng(seed)
    labels = r.integers(0, 3, size=len(m.density))
    a, b = labels == 0, labels == 1
    lhs = integrate_indicator(m, a | b)
    rhs = integrate_indicator(m, a) + integrate_indicator(m, b)
    assert abs(lhs - rhs) <= 1e-15


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_gnomonic_chart_roundtrip(u, v):
    chart = GnomonicChart((0.3, -0.2, 0.9))
    x = chart.from_chart(np.array([u, v]))
    assert np.linalg.norm(x) == pytest.approx(1.0)
    np.testing.assert_allclose(chart.to_chart(x), [u, v], atol=1e-12)


def test_gnomonic_lift_jacobian():
    chart = GnomonicChart((0, 0, 1))
    u = np.array([0.2, -0.4])
    x, jac = chart.lift(u)
    eps = 1e-6
    for a in range(2):
        e = np.zeros(2)
        e[a] = eps
        fd = (chart.from_chart(u + e) - chart.from_chart(u - e)) / (2 * eps)
        np.testing.assert_allclose(jac[:, a], fd, atol=1e-8)


def test_polygon_contains():
    L = Polygon([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])
    assert L.area == pytest.approx(3.0)
    assert L.contains(np.array([[0.5, 1.5], [1.5, 0.5]])).all()
    assert not L.contains(np.array([[1.5, 1.5]])).any()


def test_grid_csv(tmp_path):
    m = normalize_measure(build_grid(UNIT, 3), "1")
    write_grid_csv(m, tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "cx,cy,volume,density"
    assert len(lines) == 10


def test_expression_language():
    e = Expression("exp(-x^2) * sqrt(y) + pi", ("x", "y"))
    assert e({"x": 0.0, "y": 4.0}) == pytest.approx(2 + math.pi)
    for bad in ("__import__('os')", "x.real", "open(1)", "z + 1", "[1, 2]"):
        with pytest.raises(ExpressionError):
            Expression(bad, ("x", "y"))
