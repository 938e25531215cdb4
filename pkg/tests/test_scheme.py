import csv
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from conftest import unit_square_problem
from sdot.partition import assign_cells
from sdot.scheme import (ResolutionError, SchemeAbort, SchemeConfig, SchemeError, adjust_weight,
                         compute_delta, initial_weights, run_scheme, verify_error_bound,
                         write_results_csv)

PAIR = [[0.25, 0.5], [0.75, 0.5]]
EDGE_PAIR = [[0.0, 0.5], [1.0, 0.5]]
QUAD4 = [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]]


@pytest.mark.parametrize("eps,K,f1,expected", [
    (0.1, 2, 0.5, 0.1), (0.01, 5, 0.2, 0.0025), (1.0, 3, 0.03, 0.01)])
def test_delta(eps, K, f1, expected):
    assert compute_delta(eps, K, f1) == pytest.approx(expected)


def test_delta_needs_two_targets():
    with pytest.raises(ValueError):
        compute_delta(0.1, 1, 1.0)


def test_initial_weights_empty_other_cells(pair_problem):
    d = initial_weights(pair_problem)
    assert d[0] == 1.0 and d[1] == pytest.approx(math.exp(0.25) + 1)
    np.testing.assert_allclose(assign_cells(pair_problem, d).masses, [1, 0], atol=pair_problem.h)


def test_initial_weights_detect_small_M(pair_problem):
    with pytest.raises(SchemeError, match="M underestimated"):
        initial_weights(pair_problem, m_hat=1.0)


def test_adjust_forced_boundary():
    p = unit_square_problem(EDGE_PAIR, [0.75, 0.25], 200)
    delta = 0.02
    d = initial_weights(p)
    di, g, evals, flags = adjust_weight(p, d, 1, 0.25, delta)
    assert 0.25 < g < 0.25 + delta and flags == 0
    # G^2 = 1 - (1/2 + log d_2) on this geometry
    assert abs(math.log(di) - 0.25) <= delta + p.h
    e = d.copy()
    e[1] = di
    assert assign_cells(p, e).masses[1] == g


def test_adjust_symmetric(pair_problem):
    d = initial_weights(pair_problem)
    di, g, _, _ = adjust_weight(pair_problem, d, 1, 0.5, 0.05)
    assert 0.5 < g < 0.55 and di == pytest.approx(1.0, abs=0.15)


def test_adjust_three_targets():
    p = unit_square_problem([[0.1, 0.2], [0.7, 0.3], [0.4, 0.9]], [0.2, 0.35, 0.45], 100)
    d = initial_weights(p)
    for i, f in ((1, 0.35), (2, 0.45)):
        di, g, _, _ = adjust_weight(p, d, i, f, 0.05)
        d[i] = di
        assert assign_cells(p, d).masses[i] == g and f < g < f + 0.05


def test_adjust_refuses_increase_case(pair_problem):
    with pytest.raises(SchemeError):
        adjust_weight(pair_problem, np.ones(2), 1, 0.3, 0.05)


def test_symmetric_run():
    p = unit_square_problem(PAIR, [0.5, 0.5], 200)
    r = run_scheme(p, SchemeConfig(0.02))
    assert verify_error_bound(r.masses, [0.5, 0.5], 0.02)
    assert r.weights[1] == pytest.approx(1.0, abs=0.05)
    assert r.trace.outer_iterations == 1


def test_single_target_run():
    r = run_scheme(unit_square_problem([[0.4, 0.4]], [1.0], 10), SchemeConfig(0.1))
    assert list(r.masses) == [1.0] and r.trace.outer_iterations == 0 and not r.trace.steps


def test_error_bound_flag():
    f = np.array([0.5, 0.5])
    assert verify_error_bound(f, f, 0.01)
    assert not verify_error_bound([0.75, 0.25], f, 0.25)


def test_resolution_rule():
    p = unit_square_problem(PAIR, [0.5, 0.5], 50)
    with pytest.raises(ResolutionError) as info:
        run_scheme(p, SchemeConfig(0.02))
    assert info.value.recommended_resolution == 200


def test_iteration_cap_aborts_with_trace():
    p = unit_square_problem(QUAD4, [0.1, 0.2, 0.3, 0.4], 100)
    with pytest.raises(SchemeAbort) as info:
        run_scheme(p, SchemeConfig(0.05, resolution_factor=1.0, max_outer_iterations=0))
    assert info.value.trace.steps and info.value.bounds is not None


@pytest.fixture(scope="module")
def k4_run():
    p = unit_square_problem(QUAD4, [0.1, 0.2, 0.3, 0.4], 200)
    return p, run_scheme(p, SchemeConfig(0.02, resolution_factor=1.0))


def test_trace_invariants(k4_run):
    p, r = k4_run
    f, delta, b = p.targets.masses, r.trace.delta, r.bounds
    floor = b.decrease_floor
    for s in r.trace.steps:
        assert np.all(s.masses_after[1:] <= f[1:] + delta)
        assert f[s.target_index] < s.G_after < f[s.target_index] + delta
        assert s.d_old - s.d_new >= floor - 2 * p.h
    for i in range(1, 4):
        hist = r.trace.weight_history(i)
        assert all(a >= b for a, b in zip(hist, hist[1:]))
        assert min(hist) >= b.Lambda
    assert all(s.target_index != 0 for s in r.trace.steps)
    assert r.weights[0] == 1.0
    assert r.trace.outer_iterations <= b.n_eps_bound
    assert r.trace.monotonicity_flags == 0


def test_exports(tmp_path, k4_run):
    p, r = k4_run
    r.trace.write_csv(tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["outer", "inner", "target_index", "d_old", "d_new", "G_before", "G_after"]
    assert len(rows) == len(r.trace.steps) + 1
    write_results_csv(r, p.targets, tmp_path / "r.csv")
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == ["index", "xbar_1", "xbar_2", "f", "alpha", "d", "log_d"]
    assert float(rows[1][5]) == 1.0 and float(rows[1][6]) == 0.0


masses3 = st.lists(st.floats(0.15, 1.0), min_size=3, max_size=3).map(lambda v: np.array(v) / sum(v))


@settings(max_examples=12, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(masses3, st.integers(0, 2**32 - 1))
def test_random_three_target_runs(f, seed):
    if f.min() <= 0.06:
        return
    r = np.random.default_rng(seed)
    pts = r.uniform(0.05, 0.95, size=(3, 2))
    if np.min([np.linalg.norm(pts[a] - pts[b]) for a, b in ((0, 1), (0, 2), (1, 2))]) < 0.1:
        return
    f = f / math.fsum(f)
    f[-1] = 1.0 - math.fsum(f[:-1])
    p = unit_square_problem(pts, f, 100)
    res = run_scheme(p, SchemeConfig(0.05, resolution_factor=1.0))
    assert verify_error_bound(res.masses, f, 0.05)
    assert res.bounds.passed
