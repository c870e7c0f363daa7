"""Exact assignment and bipartite matching primitives.

A hand-rolled O(n^3) Hungarian method (potentials plus shortest augmenting
paths) so tie-breaking stays deterministic, and an augmenting-path maximum
bipartite matcher. Both are pure functions of their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DUMMY_COST = 0.0


@dataclass(frozen=True)
class CostMatrix:
    """Square cost matrix with the original rectangular shape remembered.

    Rows/cols at index >= n_real_rows / n_real_cols are padding with
    DUMMY_COST entries; assignments touching them are discarded by callers.
    """

    costs: np.ndarray
    n_real_rows: int
    n_real_cols: int

    def is_real(self, row: int, col: int) -> bool:
        return row < self.n_real_rows and col < self.n_real_cols


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]
    total_cost: float


def pad_square(costs) -> CostMatrix:
    """Embed an r x c cost matrix into a square one with zero-cost padding."""
    arr = np.asarray(costs, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError("cost matrix must be 2-D and non-empty")
    r, c = arr.shape
    m = max(r, c)
    padded = np.full((m, m), DUMMY_COST)
    padded[:r, :c] = arr
    return CostMatrix(padded, r, c)


def _solve_square(cost: np.ndarray) -> np.ndarray:
    """Hungarian method on a square matrix; returns col -> row (0-indexed).

    Classic potentials formulation, 1-indexed internally with column 0 as the
    virtual root. Scans columns in ascending order, so equal-cost choices
    resolve to the lowest index and the result is deterministic.
    """
    n = cost.shape[0]
    a = np.zeros((n + 1, n + 1))
    a[1:, 1:] = cost
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)  # p[j]: row matched to column j
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = a[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, np.inf)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    return p[1:] - 1


def min_cost_assignment(matrix: CostMatrix) -> Assignment:
    """Minimum-total-cost perfect assignment on a padded square matrix."""
    costs = matrix.costs
    if costs.size == 0:
        raise ValueError("empty cost matrix")
    if np.isnan(costs).any():
        raise ValueError("cost matrix contains NaN")
    if not np.isfinite(costs).all():
        raise ValueError("cost matrix entries must be finite")
    col_to_row = _solve_square(costs)
    pairs = sorted((int(col_to_row[j]), j) for j in range(costs.shape[0]))
    total = float(sum(costs[r, c] for r, c in pairs))
    return Assignment(tuple(pairs), total)


def real_pairs(matrix: CostMatrix, assignment: Assignment) -> list[tuple[int, int]]:
    """Assignment pairs that fall inside the original rectangular matrix."""
    return [(r, c) for r, c in assignment.pairs if matrix.is_real(r, c)]


def max_bipartite_matching(adjacency) -> tuple[tuple[int, int], ...]:
    """Maximum bipartite matching via augmenting paths (iterative Kuhn).

    `adjacency[i][j]` marks that left vertex i may be matched to right
    vertex j; the diagonal must be False (vertices model the same trip set
    on both sides and a trip cannot follow itself). Left vertices are
    processed in ascending order and neighbours scanned in ascending order,
    so the result is deterministic.
    """
    adj = np.asarray(adjacency, dtype=bool)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError("adjacency must be square")
    n = adj.shape[0]
    if n and adj.diagonal().any():
        raise ValueError("adjacency diagonal must be False")
    matched = np.full(n, -1, dtype=np.int64)  # right j -> left i
    succ = np.full(n, -1, dtype=np.int64)  # left i -> right j
    neighbours = [np.flatnonzero(adj[i]) for i in range(n)]

    for start in range(n):
        visited = np.zeros(n, dtype=bool)
        prev = np.full(n, -1, dtype=np.int64)  # right j -> left that reached it
        stack = [start]
        iters = {start: iter(neighbours[start])}
        found = -1
        while stack and found < 0:
            i = stack[-1]
            for j in iters[i]:
                if visited[j]:
                    continue
                visited[j] = True
                prev[j] = i
                if matched[j] < 0:
                    found = j
                    break
                nxt = int(matched[j])
                stack.append(nxt)
                iters[nxt] = iter(neighbours[nxt])
                break
            else:
                stack.pop()
        if found >= 0:
            j = found
            while j >= 0:
                i = int(prev[j])
                nxt = int(succ[i])
                matched[j] = i
                succ[i] = j
                j = nxt
    return tuple(sorted((i, int(succ[i])) for i in range(n) if succ[i] >= 0))
