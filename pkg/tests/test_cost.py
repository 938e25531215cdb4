import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdot.cost import (CExpError, ExpressionCost, LogDistanceCost, QuadraticCost, ReflectorCost,
                       check_c_convexity_of_domain, check_gradients, check_mtw, check_nondeg,
                       check_twist, cotangent_coords, image_polygon, mtw_contraction,
                       polygon_is_convex, sample_admissible_pairs, verify_conditions)
from sdot.geometry import Polygon, Rectangle, SphericalCap

SQUARE = Rectangle((0.0, 0.0), (1.0, 1.0))
FAR_SQUARE = Rectangle((2.0, 0.0), (3.0, 1.0))
NORTH = SphericalCap((0, 0, 1), math.pi / 6)
SOUTH = SphericalCap((0, 0, -1), 0.5)
coord = st.floats(-2, 2, allow_nan=False)


def reflector():
    return ReflectorCost(NORTH, SOUTH.center, s_min=0.01)


def test_quadratic_values():
    c = QuadraticCost()
    assert c.evaluate([0, 0], [1, 0]) == pytest.approx(0.5)
    assert c.evaluate([0.3, 0.7], [0.3, 0.7]) == 0.0


def test_reflector_orthogonal_directions():
    assert reflector().evaluate([0, 0, 1], [1, 0, 0]) == pytest.approx(0.0, abs=1e-15)


def test_quadratic_cexp_closed_form():
    c = QuadraticCost()
    np.testing.assert_allclose(c.c_exp_source(np.array([0.2, 0.3]), np.array([0.1, -0.1])), [0.3, 0.2])
    np.testing.assert_allclose(c.c_exp_source(np.array([0.2, 0.3]), np.zeros(2)), [0.2, 0.3])
    np.testing.assert_array_equal(c.neg_cross(np.zeros(2), np.ones(2)), np.eye(2))


def test_log_cost_cexp():
    c = LogDistanceCost()
    xb = c.c_exp_source(np.zeros(2), np.array([1.0, 0.0]))
    np.testing.assert_allclose(xb, [-1.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(-c.grad_x(np.zeros(2), xb), [1.0, 0.0], atol=1e-9)


@pytest.mark.parametrize("make,src,tgt", [
    (QuadraticCost, SQUARE, SQUARE),
    (LogDistanceCost, SQUARE, FAR_SQUARE),
    (reflector, NORTH, SOUTH),
])
def test_cexp_roundtrip(make, src, tgt, rng):
    cost = make()
    x, xb = sample_admissible_pairs(cost, src, tgt, 200, rng)
    pbar = -cost.grad_x(x, xb)
    back = cost.c_exp_source(x, pbar, guess=xb + 0.01)
    assert np.max(np.linalg.norm(-cost.grad_x(x, back) - pbar, axis=-1)) <= 1e-9
    p = -cost.grad_xb(x, xb)
    fwd = cost.c_exp_target(xb, p, guess=x + 0.01)
    assert np.max(np.linalg.norm(-cost.grad_xb(fwd, xb) - p, axis=-1)) <= 1e-9


def test_cexp_failure_is_reported():
    c = LogDistanceCost()
    with pytest.raises(CExpError):
        c.c_exp_source(np.zeros(2), np.array([np.nan, 0.0]))


@pytest.mark.parametrize("make,src,tgt", [
    (QuadraticCost, SQUARE, SQUARE),
    (LogDistanceCost, SQUARE, FAR_SQUARE),
    (reflector, NORTH, SOUTH),
    (lambda: ExpressionCost("sqrt(1 + (x1-xb1)^2 + (x2-xb2)^2)"), SQUARE, SQUARE),
])
def test_gradient_consistency(make, src, tgt):
    assert check_gradients(make(), 1000, src, tgt, rng=1).gradient_max_error <= 1e-5


def test_quadratic_twist_and_nondeg():
    c = QuadraticCost()
    t = check_twist(c, 200, SQUARE, SQUARE, rng=0)
    assert t.twist_ok and t.twist_min_ratio == pytest.approx(1.0)
    assert check_nondeg(c, 200, SQUARE, SQUARE, rng=0).nondeg_min_det == pytest.approx(1.0)


def test_synthetic_costs_fail_checks():
    flat = ExpressionCost("0*x1 + 0*xb1")
    assert not check_twist(flat, 100, SQUARE, SQUARE, rng=0).twist_ok
    rank_one = ExpressionCost("x1*xb1")
    rep = check_nondeg(rank_one, 100, SQUARE, SQUARE, rng=0)
    assert not rep.nondeg_ok


def test_log_and_reflector_conditions():
    assert check_nondeg(LogDistanceCost(), 500, SQUARE, FAR_SQUARE, rng=0).nondeg_min_det > 0
    rep = verify_conditions(reflector(), NORTH, SOUTH, sample_count=300, rng=3)
    assert rep.twist_ok and rep.nondeg_ok and rep.mtw_positive


def test_quadratic_mtw_vanishes(rng):
    vals = mtw_contraction(QuadraticCost(), rng.random((100, 2)), rng.random((100, 2)),
                           rng.normal(size=(100, 2)), rng.normal(size=(100, 2)))
    assert np.max(np.abs(vals)) <= 1e-4


def test_reflector_mtw_positive():
    rep = check_mtw(reflector(), 100, NORTH, SOUTH, rng=7)
    assert rep.mtw_unreliable == 0 and rep.mtw_delta0_estimate > 0


@pytest.mark.parametrize("make,src,tgt", [
    (LogDistanceCost, SQUARE, FAR_SQUARE),
    (reflector, NORTH, SOUTH),
])
def test_mtw_step_halving(make, src, tgt, rng):
    cost = make()
    x, xb = sample_admissible_pairs(cost, src, tgt, 50, rng)
    V, eta = rng.normal(size=(50, 2)), rng.normal(size=(50, 2))
    a = mtw_contraction(cost, x, xb, V, eta, step=cost.fd_step)
    b = mtw_contraction(cost, x, xb, V, eta, step=cost.fd_step / 2)
    big = np.abs(b) > 1e-3
    assert np.all(np.abs(a[big] - b[big]) <= 0.1 * np.abs(b[big]))


def _mtw_by_cotangent_curvature(cost, x, xb, V, eta, t=1e-3, s=1e-4):
    """Second derivative along a straight cotangent line of ``-V.c_xx.V``; independent formula."""
    V = V / np.linalg.norm(V)
    eta = eta - (eta @ V) * V
    eta = eta / np.linalg.norm(eta)
    p0 = -cost.grad_x(x, xb)

    def g(tau):
        y = cost.c_exp_source(x, p0 + tau * eta, guess=xb)
        hess = (cost.grad_x(x + s * V, y) - cost.grad_x(x - s * V, y)) / (2 * s)
        return -(hess @ V)

    return (g(t) - 2 * g(0.0) + g(-t)) / (t * t)


@pytest.mark.parametrize("make,src,tgt", [
    (LogDistanceCost, SQUARE, FAR_SQUARE),
    (reflector, NORTH, SOUTH),
])
def test_mtw_matches_cotangent_formula(make, src, tgt, rng):
    cost = make()
    x, xb = sample_admissible_pairs(cost, src, tgt, 5, rng)
    for k in range(5):
        V, eta = rng.normal(size=2), rng.normal(size=2)
        ours = float(mtw_contraction(cost, x[k], xb[k], V, eta))
        ref = _mtw_by_cotangent_curvature(cost, x[k], xb[k], V, eta)
        assert ours == pytest.approx(ref, rel=0.02, abs=1e-3)


def test_cotangent_images():
    c = QuadraticCost()
    corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    np.testing.assert_allclose(cotangent_coords(c, corners, np.zeros(2)), corners)
    np.testing.assert_allclose(cotangent_coords(c, corners, np.array([0.5, 0.5])), corners - 0.5)
    line = np.array([[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]])
    img = cotangent_coords(LogDistanceCost(), line, np.array([2.0, 0.0]))
    e, f = img[1] - img[0], img[2] - img[1]
    assert abs(e[0] * f[1] - e[1] * f[0]) > 1e-3


def test_domain_convexity_flags():
    assert all(check_c_convexity_of_domain(QuadraticCost(), SQUARE, [[0.1, 0.2], [3.0, -1.0]]))
    L = Polygon([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])
    assert not any(check_c_convexity_of_domain(QuadraticCost(), L, [[0.0, 0.0]]))
    tg = reflector().target_chart.to_chart(np.array([[0.29552020666134, 0.0, -0.955336489125606]]))
    assert all(check_c_convexity_of_domain(reflector(), NORTH, tg))


@settings(max_examples=60, deadline=None)
@given(st.tuples(coord, coord), st.floats(0.1, 3), st.floats(0.1, 3))
def test_rectangle_images_convex_under_quadratic(xb, w, h):
    dom = Rectangle((0, 0), (w, h))
    poly = image_polygon(QuadraticCost(), dom, np.array(xb), 64)
    assert polygon_is_convex(poly)


@settings(max_examples=60, deadline=None)
@given(st.tuples(coord, coord), st.tuples(coord, coord))
def test_quadratic_gradients_antisymmetric(x, xb):
    c = QuadraticCost()
    x, xb = np.array(x), np.array(xb)
    np.testing.assert_allclose(c.grad_x(x, xb), -c.grad_xb(x, xb))
