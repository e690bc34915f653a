"""Exact solver for the discrete transportation problem.

Transportation simplex: northwest-corner start, MODI (u-v) duals, Bland's
entering rule (lowest row-major index) plus lowest-index leaving ties for
anti-cycling. Capped at small instances; this solver's job is to be an
exactly verifiable oracle, not to be fast.
"""

from __future__ import annotations

import numpy as np

from .errors import SizeLimitError
from .types import CostMatrix, DiscreteDistribution, TransportPlan

SIZE_CAP = 4096

_ENTER_TOL = 1e-12
_EXACT_MARGINAL_TOL = 1e-9


def _northwest_corner(a: np.ndarray, b: np.ndarray):
    """Initial basic feasible solution with exactly n + m - 1 basic cells."""
    n, m = a.size, b.size
    alloc = np.zeros((n, m))
    basis = []
    rem_a = a.copy()
    rem_b = b.copy()
    i = j = 0
    while True:
        x = min(rem_a[i], rem_b[j])
        alloc[i, j] = x
        basis.append((i, j))
        rem_a[i] -= x
        rem_b[j] -= x
        if i == n - 1 and j == m - 1:
            break
        # Advance along exactly one axis; a simultaneous exhaustion leaves a
        # degenerate zero cell behind, keeping the basis a spanning tree.
        if rem_a[i] <= rem_b[j] and i < n - 1:
            rem_a[i] = 0.0
            i += 1
        else:
            rem_b[j] = 0.0
            j += 1
    return alloc, basis


def _adjacency(n: int, m: int, basis):
    rows_adj = [[] for _ in range(n)]
    cols_adj = [[] for _ in range(m)]
    for i, j in basis:
        rows_adj[i].append(j)
        cols_adj[j].append(i)
    return rows_adj, cols_adj


def _duals(n, m, cost, rows_adj, cols_adj):
    u = np.full(n, np.nan)
    v = np.full(m, np.nan)
    u[0] = 0.0
    stack = [(True, 0)]
    while stack:
        is_row, k = stack.pop()
        if is_row:
            for j in rows_adj[k]:
                if np.isnan(v[j]):
                    v[j] = cost[k, j] - u[k]
                    stack.append((False, j))
        else:
            for i in cols_adj[k]:
                if np.isnan(u[i]):
                    u[i] = cost[i, k] - v[k]
                    stack.append((True, i))
    return u, v


def _cycle(entering, rows_adj, cols_adj):
    """Cells of the unique cycle closed by `entering`, alternating +,-,+,..."""
    r0, c0 = entering
    start = ("r", r0)
    goal = ("c", c0)
    parent = {start: None}
    queue = [start]
    head = 0
    while head < len(queue):
        node = queue[head]
        head += 1
        if node == goal:
            break
        kind, k = node
        neighbors = (
            (("c", j) for j in rows_adj[k]) if kind == "r" else (("r", i) for i in cols_adj[k])
        )
        for nxt in neighbors:
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    path = []
    node = goal
    while node is not None:
        path.append(node)
        node = parent[node]
    cells = [entering]
    for (kind_a, a), (kind_b, b) in zip(path, path[1:]):
        cells.append((a, b) if kind_a == "r" else (b, a))
    return cells


def exact_ot(
    p: DiscreteDistribution, q: DiscreteDistribution, cost: CostMatrix
) -> tuple[TransportPlan, float]:
    """Globally optimal coupling of `p` and `q` under `cost`, with its cost.

    The returned plan is vertex-optimal for the transportation LP and its
    marginals are exact to 1e-9. Instances above the cell cap are rejected.
    """
    n, m = cost.shape
    if (n, m) != (p.support_dim, q.support_dim):
        raise ValueError(
            f"cost shape {cost.shape} does not match marginals "
            f"({p.support_dim}, {q.support_dim})"
        )
    if n * m > SIZE_CAP:
        raise SizeLimitError(f"instance has {n * m} cells, cap is {SIZE_CAP}")

    c = cost.entries
    alloc, basis = _northwest_corner(p.weights, q.weights)
    in_basis = np.zeros((n, m), dtype=bool)
    for cell in basis:
        in_basis[cell] = True

    max_pivots = 50 * n * m + 200
    for _ in range(max_pivots):
        rows_adj, cols_adj = _adjacency(n, m, basis)
        u, v = _duals(n, m, c, rows_adj, cols_adj)
        reduced = c - u[:, None] - v[None, :]
        candidates = np.flatnonzero((reduced < -_ENTER_TOL).ravel() & ~in_basis.ravel())
        if candidates.size == 0:
            break
        entering = divmod(int(candidates[0]), m)  # Bland: lowest row-major index

        cells = _cycle(entering, rows_adj, cols_adj)
        minus = cells[1::2]
        theta = min(alloc[cell] for cell in minus)
        leaving = min(cell for cell in minus if alloc[cell] == theta)

        for idx, cell in enumerate(cells):
            if idx % 2 == 0:
                alloc[cell] += theta
            else:
                alloc[cell] -= theta
        alloc[leaving] = 0.0
        basis.remove(leaving)
        basis.append(entering)
        in_basis[leaving] = False
        in_basis[entering] = True
    else:
        raise RuntimeError("pivot budget exhausted; anti-cycling rule failed")

    plan = TransportPlan(alloc, p, q, tol=_EXACT_MARGINAL_TOL)
    return plan, float(np.sum(alloc * c))
