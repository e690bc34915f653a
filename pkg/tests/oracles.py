"""Independent oracles used to pin expected values.

Everything here is deliberately naive (enumeration, finite differences,
straight-line recomputation) and shares no code with the solvers it checks.
"""

from __future__ import annotations

import itertools

import numpy as np


def enumerate_transport_optimum(p: np.ndarray, q: np.ndarray, cost: np.ndarray) -> float:
    """Minimum transport cost by enumerating every basis of the transportation LP.

    Bases are spanning trees of the complete bipartite graph; each tree fixes
    a unique (possibly infeasible) basic solution, solved by peeling leaves.
    Exponential; keep instances tiny.
    """
    n, m = cost.shape
    edges = [(i, j) for i in range(n) for j in range(m)]
    need = n + m - 1
    best = np.inf
    for combo in itertools.combinations(range(len(edges)), need):
        # spanning-tree check via union-find over n + m nodes
        parent = list(range(n + m))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        acyclic = True
        for idx in combo:
            i, j = edges[idx]
            ri, rj = find(i), find(n + j)
            if ri == rj:
                acyclic = False
                break
            parent[ri] = rj
        if not acyclic:
            continue

        # peel leaves to solve the tree system exactly
        alloc = {}
        rem_p = p.copy()
        rem_q = q.copy()
        tree = [edges[idx] for idx in combo]
        row_deg = np.zeros(n, dtype=int)
        col_deg = np.zeros(m, dtype=int)
        for i, j in tree:
            row_deg[i] += 1
            col_deg[j] += 1
        remaining = set(tree)
        ok = True
        while remaining:
            leaf = None
            for i, j in remaining:
                if row_deg[i] == 1:
                    leaf = (i, j, "row")
                    break
                if col_deg[j] == 1:
                    leaf = (i, j, "col")
                    break
            i, j, kind = leaf
            value = rem_p[i] if kind == "row" else rem_q[j]
            alloc[(i, j)] = value
            rem_p[i] -= value
            rem_q[j] -= value
            row_deg[i] -= 1
            col_deg[j] -= 1
            remaining.remove((i, j))
            if value < -1e-12:
                ok = False
                break
        if not ok:
            continue
        best = min(best, sum(v * cost[i, j] for (i, j), v in alloc.items()))
    return float(best)


def random_feasible_plan(p: np.ndarray, q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """A random vertex of the transportation polytope.

    Northwest-corner rule under random row/column permutations; exact
    marginals by construction.
    """
    n, m = p.size, q.size
    rows = rng.permutation(n)
    cols = rng.permutation(m)
    alloc = np.zeros((n, m))
    rem_p = p[rows].copy()
    rem_q = q[cols].copy()
    i = j = 0
    while True:
        x = min(rem_p[i], rem_q[j])
        alloc[rows[i], cols[j]] = x
        rem_p[i] -= x
        rem_q[j] -= x
        if i == n - 1 and j == m - 1:
            break
        if rem_p[i] <= rem_q[j] and i < n - 1:
            i += 1
        else:
            j += 1
    return alloc


def central_difference(func, x: np.ndarray, step: float) -> np.ndarray:
    """Central finite differences of a scalar function, one entry at a time."""
    grad = np.zeros_like(x)
    flat = x.ravel()
    out = grad.ravel()
    for idx in range(flat.size):
        keep = flat[idx]
        flat[idx] = keep + step
        up = func()
        flat[idx] = keep - step
        down = func()
        flat[idx] = keep
        out[idx] = (up - down) / (2.0 * step)
    return grad


def divergence_by_composition(xa, wa, xb, wb) -> float:
    """Sinkhorn divergence rebuilt from three independent exact solves."""
    from otkt import CostMatrix, DiscreteDistribution, cosine_cost, exact_ot

    def cost_of(x1, w1, x2, w2):
        _, value = exact_ot(
            DiscreteDistribution(w1), DiscreteDistribution(w2), cosine_cost(x1, x2)
        )
        return value

    return (
        cost_of(xa, wa, xb, wb)
        - 0.5 * cost_of(xa, wa, xa, wa)
        - 0.5 * cost_of(xb, wb, xb, wb)
    )
