"""Exact minimum-cost assignment (Hungarian algorithm) with deterministic ties.

The solver is an O(n^3) shortest-augmenting-path Hungarian method that also
returns the dual potentials. Ties between minimum-cost permutations are
broken deterministically: among all optimal permutations the lexicographically
smallest one (read as the tuple perm[0..n-1]) is returned. The tie-break pass
works on the zero-reduced-cost graph, where by complementary slackness every
optimal assignment must live.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


class AssignmentError(ValueError):
    """Invalid input to the assignment solver."""


@dataclass(frozen=True)
class MatchResult:
    """Optimal assignment of prediction slots to target slots.

    ``permutation[i]`` is the target slot matched to prediction slot ``i``;
    ``total_cost`` is the (minimal) sum of matched costs.
    """

    permutation: np.ndarray
    total_cost: float


@njit(cache=True)
def _solve_with_duals(cost):
    """Shortest augmenting path assignment; returns (row->col, u, v)."""
    n = cost.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=np.bool_)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    row_to_col = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        row_to_col[p[j] - 1] = j - 1
    return row_to_col, u[1:], v[1:]


def _perfect_matching_exists(adj: np.ndarray, rows: list[int], cols: list[int]) -> bool:
    """Kuhn's algorithm: can `rows` be perfectly matched into `cols` of adj?"""
    col_owner: dict[int, int] = {}

    def try_row(r: int, visited: set[int]) -> bool:
        for c in cols:
            if adj[r, c] and c not in visited:
                visited.add(c)
                if c not in col_owner or try_row(col_owner[c], visited):
                    col_owner[c] = r
                    return True
        return False

    for r in rows:
        if not try_row(r, set()):
            return False
    return True


def _lexicographic_refine(cost: np.ndarray, base: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Pick the lexicographically smallest optimal permutation.

    All optimal assignments use only edges with zero reduced cost under the
    optimal duals; the smallest one is built greedily row by row, keeping the
    remainder matchable at every step.
    """
    n = cost.shape[0]
    scale = max(1.0, float(np.abs(cost).max()))
    zero = (cost - u[:, None] - v[None, :]) <= 1e-9 * scale
    # Generic case: exactly one zero per row/column means the optimum is
    # unique and already lexicographic.
    if zero.sum() == n:
        return base
    perm = np.full(n, -1, dtype=np.int64)
    free_cols = list(range(n))
    for i in range(n):
        rest_rows = list(range(i + 1, n))
        for c in free_cols:
            if not zero[i, c]:
                continue
            remaining = [col for col in free_cols if col != c]
            if _perfect_matching_exists(zero, rest_rows, remaining):
                perm[i] = c
                free_cols.remove(c)
                break
        if perm[i] < 0:
            # Numerical corner: the tolerance cut an optimal edge. The base
            # assignment is still optimal, just not tie-broken.
            return base
    return perm


def match_bipartite(cost_matrix: np.ndarray) -> MatchResult:
    """Exact minimum-cost perfect matching of a square cost matrix.

    Raises AssignmentError on non-square or non-finite input. Deterministic:
    among equal-cost optima the lexicographically smallest permutation wins.
    """
    cost = np.asarray(cost_matrix, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise AssignmentError(f"cost matrix must be square, got shape {cost.shape}")
    if cost.size == 0:
        return MatchResult(np.empty(0, dtype=np.int64), 0.0)
    if not np.isfinite(cost).all():
        raise AssignmentError("cost matrix contains NaN or infinite entries")
    base, u, v = _solve_with_duals(cost)
    perm = _lexicographic_refine(cost, base, u, v)
    total = float(cost[np.arange(cost.shape[0]), perm].sum())
    return MatchResult(perm, total)
