import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from conftest import unit_square_problem
from sdot.geometry import Rectangle, build_grid, normalize_measure
from sdot.oracle import (OracleError, audit, brute_force_plan, check_c_monotonicity,
                         compare_with_scheme, discretize_source, solve_exact)
from sdot.partition import assign_cells
from sdot.scheme import SchemeConfig, run_scheme


def test_discretize_source():
    m = normalize_measure(build_grid(Rectangle((0, 0), (1, 1)), 2), "1")
    np.testing.assert_allclose(discretize_source(m).masses, 0.25)
    m = normalize_measure(build_grid(Rectangle((0, 0), (1, 1)), 20), "1 + x")
    a = discretize_source(m)
    assert len(a) == 400 and abs(a.masses.sum() - 1) < 1e-12
    ratio = a.masses / (1 + a.points[:, 0])
    np.testing.assert_allclose(ratio, ratio[0])


def test_trivial_plans():
    p = solve_exact([1.0], [1.0], [[3.5]])
    assert p.flow[0, 0] == 1.0 and p.total_cost == 3.5
    src = np.array([[0.0, 0.0], [1.0, 0.0]])
    tgt = np.array([[0.0, 0.1], [1.0, 0.1]])
    C = 0.5 * ((src[:, None] - tgt[None]) ** 2).sum(-1)
    p = solve_exact([0.5, 0.5], [0.5, 0.5], C)
    np.testing.assert_allclose(p.flow, np.diag([0.5, 0.5]))
    assert p.total_cost == pytest.approx(0.005)


def test_infeasible_rejected():
    with pytest.raises(OracleError, match="infeasible"):
        solve_exact([0.5, 0.5], [0.4, 0.5], np.ones((2, 2)))


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 5), st.integers(1, 3), st.integers(0, 2**32 - 1), st.booleans())
def test_simplex_matches_enumeration(N, K, seed, integral):
    while N * K > 16:
        N -= 1
    r = np.random.default_rng(seed)
    a = r.random(N) + 0.1
    b = r.random(K) + 0.1
    a, b = a / a.sum(), b / b.sum()
    C = r.integers(0, 3, (N, K)).astype(float) if integral else r.random((N, K))
    fast, slow = solve_exact(a, b, C), brute_force_plan(a, b, C)
    assert fast.total_cost == pytest.approx(slow.total_cost, abs=1e-12)
    fast.check()


@pytest.mark.parametrize("N,K,seed", [(200, 3, 0), (500, 4, 1), (300, 7, 2)])
def test_simplex_matches_scipy(N, K, seed):
    r = np.random.default_rng(seed)
    a, b = r.random(N), r.random(K)
    a, b = a / a.sum(), b / b.sum()
    C = r.random((N, K))
    A = np.zeros((N + K, N * K))
    for i in range(N):
        A[i, i * K:(i + 1) * K] = 1
    for j in range(K):
        A[N + j, j::K] = 1
    ref = linprog(C.ravel(), A_eq=A[:-1], b_eq=np.concatenate([a, b])[:-1], method="highs")
    assert solve_exact(a, b, C).total_cost == pytest.approx(ref.fun, abs=1e-12)


def test_single_target_comparison():
    p = unit_square_problem([[0.5, 0.5]], [1.0], 10)
    part = assign_cells(p, [1.0])
    rep = audit(p, part)
    assert rep.matched.gap == pytest.approx(0, abs=1e-15) and rep.matched.disagreements == 0


def test_symmetric_pair_comparison():
    p = unit_square_problem([[0.25, 0.5], [0.75, 0.5]], [0.5, 0.5], 40)
    part = assign_cells(p, [1.0, 1.0])
    plan = solve_exact(p.measure.masses, part.masses, p.table)
    cmp = compare_with_scheme(plan, part, p)
    assert abs(cmp.gap) <= 1e-9 and cmp.out_of_band == 0
    assert plan.total_cost <= cmp.scheme_cost + 1e-12


def test_k4_comparison_and_csv(tmp_path):
    p = unit_square_problem([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]],
                            [0.1, 0.2, 0.3, 0.4], 40)
    res = run_scheme(p, SchemeConfig(0.09, resolution_factor=1.0))
    rep = audit(p, res.partition)
    assert rep.matched.relative_gap <= 0.02 and rep.matched.out_of_band == 0
    assert rep.matched.lp_cost <= rep.matched.scheme_cost + 1e-12
    assert rep.prescribed.mass_discrepancy < 0.09
    rep.matched_plan.write_csv(tmp_path / "plan.csv")
    rows = list(csv.reader(open(tmp_path / "plan.csv")))
    assert rows[0] == ["source_idx", "target_idx", "mass"]
    assert sum(float(r[2]) for r in rows[1:]) == pytest.approx(1.0)
    rep.write_csv(tmp_path / "cmp.csv")
    assert len(list(csv.reader(open(tmp_path / "cmp.csv")))) == 17


def test_c_monotonicity():
    p = unit_square_problem([[0.2, 0.3], [0.8, 0.6], [0.4, 0.9]], [0.3, 0.3, 0.4], 20)
    plan = solve_exact(p.measure.masses, p.targets.masses, p.table)
    assert check_c_monotonicity(p.table, plan.flow, 2000, rng=0) == 0
    part = assign_cells(p, [1.0, 1.2, 0.9])
    assert check_c_monotonicity(p.table, part.assignment, 2000, rng=0) == 0
    bad = part.assignment.copy()
    a = int(np.argmin(p.table[:, 0]))  # deep inside cell 1
    b = int(np.argmin(p.table[:, 1]))  # deep inside cell 2
    bad[a], bad[b] = 1, 0
    assert check_c_monotonicity(p.table, bad, 20000, rng=0) >= 1
