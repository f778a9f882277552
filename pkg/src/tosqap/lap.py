"""Exact linear assignment via the Hungarian method.

O(n^3) shortest-augmenting-path variant with dual potentials.  Costs are
arbitrary finite reals; the final potentials certify optimality through
nonnegative reduced costs, which the test suite checks explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix


@dataclass(frozen=True)
class Permutation:
    """Assignment row -> column as a 0-based bijection."""

    n: int
    mapping: tuple[int, ...]

    def __post_init__(self):
        if len(self.mapping) != self.n or sorted(self.mapping) != list(range(self.n)):
            raise ValueError(f"mapping is not a bijection on 0..{self.n - 1}: {self.mapping}")

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, j in enumerate(self.mapping):
            inv[j] = i
        return Permutation(self.n, tuple(inv))


@dataclass(frozen=True)
class LapSolution:
    permutation: Permutation
    value: float
    dual_row: np.ndarray
    dual_col: np.ndarray


def solve_lap_min(cost: np.ndarray) -> LapSolution:
    """Minimize sum_i cost[i, pi(i)] over permutations pi.

    Rows are assigned in index order, which fixes the tie-breaking among
    equally optimal assignments deterministically.
    """
    c = as_matrix(cost, "cost")
    n, m = c.shape
    if n != m:
        raise ValueError(f"cost matrix must be square, got {c.shape}")

    inf = np.inf
    # 1-based arrays; index 0 is the virtual unmatched column.
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)  # p[j]: row matched to column j
    way = np.zeros(n + 1, dtype=np.int64)

    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            cur_row = c[i0 - 1] - u[i0] - v[1:]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cur_row[j - 1]
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

    mapping = [0] * n
    for j in range(1, n + 1):
        mapping[p[j] - 1] = j - 1
    perm = Permutation(n, tuple(mapping))
    value = float(sum(c[i, perm.mapping[i]] for i in range(n)))
    return LapSolution(
        permutation=perm,
        value=value,
        dual_row=u[1:].copy(),
        dual_col=v[1:].copy(),
    )


def solve_lap_max(profit: np.ndarray) -> LapSolution:
    """Maximize sum_i profit[i, pi(i)]; solved as minimization on -profit."""
    sol = solve_lap_min(-as_matrix(profit, "profit"))
    return LapSolution(
        permutation=sol.permutation,
        value=-sol.value,
        dual_row=-sol.dual_row,
        dual_col=-sol.dual_col,
    )


def permutation_to_matrix(perm: Permutation) -> np.ndarray:
    """0/1 matrix with a one at (i, mapping[i]) for each row i."""
    out = np.zeros((perm.n, perm.n))
    out[np.arange(perm.n), list(perm.mapping)] = 1.0
    return out


def matrix_to_permutation(x: np.ndarray) -> Permutation:
    """Inverse of permutation_to_matrix on exact permutation matrices."""
    x = as_matrix(x)
    n = x.shape[0]
    mapping = tuple(int(np.argmax(x[i])) for i in range(n))
    perm = Permutation(n, mapping)
    if not np.array_equal(x, permutation_to_matrix(perm)):
        raise ValueError("input is not a permutation matrix")
    return perm
