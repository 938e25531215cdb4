"""Exact discrete transport for small instances, used to audit scheme output.

The source grid is collapsed to one atom per cell and the resulting
transportation problem is solved by a primal network simplex on the
bipartite row/column tree.  A brute-force basis enumeration is kept only to
test the simplex on tiny inputs.
"""

from __future__ import annotations

import csv
import itertools
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .partition import lipschitz_constant

MAX_CELLS = 10**6
BRUTE_FORCE_MAX_CELLS = 16


class OracleError(ValueError):
    pass


@dataclass
class Atoms:
    points: np.ndarray
    masses: np.ndarray

    def __len__(self):
        return len(self.masses)


@dataclass
class DiscretePlan:
    source_masses: np.ndarray
    target_masses: np.ndarray
    flow: np.ndarray
    cost_table: np.ndarray
    total_cost: float
    pivots: int = 0

    def check(self, tol=1e-10):
        if np.any(self.flow < -tol):
            raise OracleError("negative flow")
        if np.max(np.abs(self.flow.sum(axis=1) - self.source_masses)) > tol:
            raise OracleError("row sums do not match source masses")
        if np.max(np.abs(self.flow.sum(axis=0) - self.target_masses)) > tol:
            raise OracleError("column sums do not match target masses")
        return True

    def write_csv(self, path, threshold=0.0):
        rows, cols = np.nonzero(self.flow > threshold)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["source_idx", "target_idx", "mass"])
            for a, i in zip(rows, cols):
                w.writerow([int(a) + 1, int(i) + 1, repr(float(self.flow[a, i]))])


def discretize_source(measure) -> Atoms:
    return Atoms(measure.grid.coords.copy(), measure.masses.copy())


def _check_masses(a, b, tol):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise OracleError("masses must be nonnegative")
    if abs(math.fsum(a) - math.fsum(b)) > tol:
        raise OracleError(f"infeasible: supplies sum to {math.fsum(a)!r}, demands to {math.fsum(b)!r}")
    return a, b


def _northwest_corner(a, b, order):
    """Staircase basis along rows in ``order``; always N+K-1 cells forming a tree."""
    N, K = len(a), len(b)
    s, d = a[order].copy(), b.copy()
    basis, flows = [], []
    r = j = 0
    while True:
        x = max(0.0, min(s[r], d[j]))
        basis.append((int(order[r]), j))
        flows.append(x)
        s[r] -= x
        d[j] -= x
        if r == N - 1 and j == K - 1:
            break
        if j == K - 1 or (r < N - 1 and s[r] <= d[j]):
            r += 1
        else:
            j += 1
    return basis, flows


class _Tree:
    """Spanning tree on rows ``0..N-1`` and columns ``N..N+K-1``.

    Depths are only meaningful up to a common offset; the root moves as pivots
    rehang whichever side of the cut edge is smaller.
    """

    def __init__(self, N, K, basis, cost):
        self.N, self.K, self.cost = N, K, cost
        self.adj = [set() for _ in range(N + K)]
        for i, j in basis:
            self.adj[i].add(N + j)
            self.adj[N + j].add(i)
        self.parent = np.full(N + K, -1)
        self.depth = np.zeros(N + K, dtype=int)
        self.pot = np.zeros(N + K)
        root = N
        seen = self._relabel(root, -1, 0)
        if seen != N + K:
            raise OracleError("initial basis is not a spanning tree")

    def _edge_cost(self, p, q):
        i, j = (p, q - self.N) if p < self.N else (q, p - self.N)
        return self.cost[i, j]

    def _relabel(self, start, parent, depth, allowed=None):
        """Reset parent/depth/potential below ``start``; returns nodes visited."""
        self.parent[start] = parent
        self.depth[start] = depth
        if parent >= 0:
            self.pot[start] = self._edge_cost(start, parent) - self.pot[parent]
        queue, count = deque([start]), 1
        while queue:
            p = queue.popleft()
            for q in self.adj[p]:
                if q == self.parent[p] or (allowed is not None and q not in allowed):
                    continue
                self.parent[q] = p
                self.depth[q] = self.depth[p] + 1
                self.pot[q] = self._edge_cost(q, p) - self.pot[p]
                queue.append(q)
                count += 1
        return count

    def path(self, u, v):
        """Node path from ``u`` to ``v`` through the tree."""
        left, right = [u], [v]
        while u != v:
            if self.depth[u] >= self.depth[v]:
                u = self.parent[u]
                left.append(u)
            else:
                v = self.parent[v]
                right.append(v)
        return left + right[-2::-1]

    def _smaller_side(self, a, b):
        """Component of ``a`` or ``b`` (edge between them already removed), whichever is smaller."""
        sides = [({a}, [a]), ({b}, [b])]
        while True:
            for seen, stack in sides:
                if not stack:
                    return seen
                p = stack.pop()
                for q in self.adj[p]:
                    if q not in seen:
                        seen.add(q)
                        stack.append(q)

    def swap(self, enter, leave):
        N = self.N
        (ei, ej), (li, lj) = enter, leave
        e_row, e_col, l_row, l_col = ei, N + ej, li, N + lj
        child = l_row if self.parent[l_row] == l_col else l_col
        self.adj[l_row].discard(l_col)
        self.adj[l_col].discard(l_row)
        small = self._smaller_side(l_row, l_col)
        if child not in small:
            # the root's side gets rehung; the other side's top becomes the root
            self.parent[child] = -1
        self.adj[e_row].add(e_col)
        self.adj[e_col].add(e_row)
        inner, outer = (e_row, e_col) if e_row in small else (e_col, e_row)
        self._relabel(inner, outer, self.depth[outer] + 1, allowed=small)


def solve_exact(source_masses, target_masses, cost_table, tol=1e-12, max_pivots=None) -> DiscretePlan:
    """Optimal transport plan between two discrete measures by network simplex."""
    C = np.asarray(cost_table, dtype=float)
    a, b = _check_masses(source_masses, target_masses, 1e-10)
    N, K = C.shape
    if (N, K) != (len(a), len(b)):
        raise OracleError("cost table shape does not match the masses")
    if N * K > MAX_CELLS:
        raise OracleError(f"N*K = {N * K} exceeds the cap of {MAX_CELLS}")
    # Start from a staircase over rows sorted by their cheapest column; any order works.
    order = np.lexsort((np.arange(N), C.argmin(axis=1)))
    basis, flows = _northwest_corner(a, b, order)
    flow = dict(zip(basis, flows))
    tree = _Tree(N, K, basis, C)
    scale = max(1.0, float(np.abs(C).max()))
    max_pivots = max_pivots or 50 * (N + K) * K
    pivots = 0
    while True:
        reduced = C - tree.pot[:N, None] - tree.pot[None, N:]
        k = int(np.argmin(reduced))
        if reduced.flat[k] >= -tol * scale:
            break
        if pivots >= max_pivots:
            raise OracleError(f"no optimum after {max_pivots} pivots")
        i, j = divmod(k, K)
        nodes = tree.path(N + j, i)
        edges = []
        for p, q in zip(nodes[:-1], nodes[1:]):
            edges.append((p, q - N) if p < N else (q, p - N))
        minus = edges[0::2]
        plus = edges[1::2]
        theta, leave = min((flow[e], idx) for idx, e in enumerate(minus))
        leave = minus[leave]
        for e in minus:
            flow[e] -= theta
        for e in plus:
            flow[e] += theta
        del flow[leave]
        flow[(i, j)] = theta
        tree.swap((i, j), leave)
        pivots += 1
    F = np.zeros((N, K))
    for (r, c), x in flow.items():
        F[r, c] = max(x, 0.0)
    total = math.fsum((F * C).ravel())
    plan = DiscretePlan(a, b, F, C, total, pivots)
    plan.check()
    return plan


def brute_force_plan(source_masses, target_masses, cost_table, tol=1e-10) -> DiscretePlan:
    """Best basic feasible solution by enumerating every candidate basis."""
    C = np.asarray(cost_table, dtype=float)
    a, b = _check_masses(source_masses, target_masses, 1e-10)
    N, K = C.shape
    if N * K > BRUTE_FORCE_MAX_CELLS:
        raise OracleError(f"brute force limited to N*K <= {BRUTE_FORCE_MAX_CELLS}")
    A = np.zeros((N + K, N * K))
    for r in range(N):
        A[r, r * K:(r + 1) * K] = 1.0
    for c in range(K):
        A[N + c, c::K] = 1.0
    rhs = np.concatenate([a, b])
    best = None
    for cols in itertools.combinations(range(N * K), N + K - 1):
        sub = A[:, cols]
        if np.linalg.matrix_rank(sub) < N + K - 1:
            continue
        x, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
        if np.any(x < -tol) or np.max(np.abs(sub @ x - rhs)) > tol:
            continue
        F = np.zeros(N * K)
        F[list(cols)] = np.maximum(x, 0.0)
        value = float(F @ C.ravel())
        if best is None or value < best[0] - 1e-15:
            best = (value, F.reshape(N, K))
    if best is None:
        raise OracleError("no feasible basis found")
    return DiscretePlan(a, b, best[1], C, best[0])


def plan_cost(masses, table, assignment):
    return math.fsum(masses * table[np.arange(len(masses)), assignment])


@dataclass
class Comparison:
    lp_cost: float
    scheme_cost: float
    disagreements: int
    atoms: int
    out_of_band: int
    band: float
    mass_discrepancy: float

    @property
    def gap(self):
        return self.scheme_cost - self.lp_cost

    @property
    def relative_gap(self):
        return self.gap / abs(self.lp_cost) if self.lp_cost else abs(self.gap)

    @property
    def disagreement_fraction(self):
        return self.disagreements / self.atoms if self.atoms else 0.0

    def rows(self):
        return [
            ("lp_cost", self.lp_cost), ("scheme_cost", self.scheme_cost), ("gap", self.gap),
            ("relative_gap", self.relative_gap), ("disagreement_fraction", self.disagreement_fraction),
            ("out_of_band", self.out_of_band), ("band", self.band),
            ("mass_discrepancy", self.mass_discrepancy),
        ]


def compare_with_scheme(plan: DiscretePlan, partition, problem, flow_tol=1e-14) -> Comparison:
    """Cost gap, atom disagreement and mass discrepancy between a plan and a partition.

    An atom disagrees when the plan sends any of its mass (above ``flow_tol``)
    somewhere other than its assigned cell.  Disagreeing atoms whose score
    margin exceeds ``2 * Lip * h`` are counted as out of band.
    """
    table = problem.table
    masses = plan.source_masses
    assignment = partition.assignment
    scheme_cost = plan_cost(masses, table, assignment)
    off = plan.flow.copy()
    off[np.arange(len(masses)), assignment] = 0.0
    wrong = np.any(off > flow_tol, axis=1)
    band = 2.0 * lipschitz_constant(problem) * problem.h
    out = int(np.sum(wrong & (partition.margin > band)))
    discrepancy = float(np.max(np.abs(partition.masses - plan.flow.sum(axis=0))))
    return Comparison(plan.total_cost, scheme_cost, int(wrong.sum()), len(masses), out, band, discrepancy)


@dataclass
class OracleReport:
    matched: Comparison
    prescribed: Comparison
    matched_plan: DiscretePlan
    prescribed_plan: DiscretePlan

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["marginals", "quantity", "value"])
            for label, comp in (("cell_masses", self.matched), ("prescribed", self.prescribed)):
                for name, value in comp.rows():
                    w.writerow([label, name, repr(float(value))])


def audit(problem, partition) -> OracleReport:
    """Solve the LP twice: with the partition's own cell masses and with the prescribed ones.

    With the partition's masses as demands the partition itself is an optimal
    plan, so that comparison isolates the assignment logic.  The prescribed
    masses measure how far the approximate solution is from the true optimum.
    """
    atoms = discretize_source(problem.measure)
    table = problem.table
    g = partition.masses
    matched = solve_exact(atoms.masses, g, table)
    f = problem.targets.masses * math.fsum(atoms.masses)
    prescribed = solve_exact(atoms.masses, f, table)
    return OracleReport(compare_with_scheme(matched, partition, problem),
                        compare_with_scheme(prescribed, partition, problem), matched, prescribed)


def check_c_monotonicity(table, pairs_from, pair_samples=1000, rng=None, tol=1e-9):
    """Sampled cyclical-monotonicity test on the support of a plan or an assignment.

    ``pairs_from`` is either an N×K flow matrix or a length-N assignment
    vector.  Returns the number of violating sampled pairs.
    """
    table = np.asarray(table, dtype=float)
    src = np.asarray(pairs_from)
    if src.ndim == 2:
        rows, cols = np.nonzero(src > 0)
    else:
        rows, cols = np.arange(len(src)), src.astype(int)
    if len(rows) < 2:
        return 0
    rng = np.random.default_rng(rng)
    p = rng.integers(len(rows), size=pair_samples)
    q = rng.integers(len(rows), size=pair_samples)
    a, i, b, j = rows[p], cols[p], rows[q], cols[q]
    lhs = table[a, i] + table[b, j]
    rhs = table[a, j] + table[b, i]
    return int(np.sum(lhs > rhs + tol))
