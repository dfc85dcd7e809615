"""Rectangular linear assignment (Hungarian algorithm), maximizing total score.

One core solver: shortest-augmenting-path minimization with row/column
potentials, O(n^2 m) for n rows <= m columns. Maximization negates scores;
matrices with more rows than columns are solved transposed. Scan order is
fixed (rows ascending, columns ascending, strict-improvement updates), so
identical inputs always produce identical assignments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError


@dataclass
class Assignment:
    pairs: list[tuple[int, int]]  # (row, column), sorted by row; |pairs| = min(dims)
    total: float  # sum of matrix entries at pairs


def _solve_min(cost: list[list[float]]) -> list[int]:
    """Min-cost assignment for n <= m. Returns col -> row (1-based, 0 = free)."""
    n = len(cost)
    m = len(cost[0])
    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)  # p[j] = row matched to column j
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            ui = u[i0]
            row = cost[i0 - 1]
            delta = inf
            j1 = 0
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - ui - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    return p


def solve_max(matrix) -> Assignment:
    """Assignment maximizing total score over all injective row->column
    mappings of size min(n_rows, n_cols)."""
    mat = np.asarray(matrix, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
        raise DimensionError(f"matrix must be 2-D and non-empty, got shape {mat.shape}")
    if not np.isfinite(mat).all():
        raise DataError("matrix entries must be finite")

    transposed = mat.shape[0] > mat.shape[1]
    work = mat.T if transposed else mat
    p = _solve_min((-work).tolist())

    pairs = []
    for j in range(1, work.shape[1] + 1):
        if p[j] > 0:
            r, c = p[j] - 1, j - 1
            pairs.append((c, r) if transposed else (r, c))
    pairs.sort()
    total = float(sum(mat[r, c] for r, c in pairs))
    return Assignment(pairs=pairs, total=total)
