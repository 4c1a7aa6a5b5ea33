"""Exact rectangular linear assignment with deterministic tie-breaking.

``solve_assignment`` minimizes total cost over injective row-column matchings
of size ``min(R, C)``. Among equal-cost optima it returns the assignment whose
row-sorted pair list is lexicographically smallest, so golden tests see one
canonical answer. ``brute_force_assignment`` is the independent enumeration
oracle used to verify the solver.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

BRUTE_FORCE_LIMIT = 8


@dataclass(frozen=True)
class Assignment:
    """Row-sorted matched pairs plus their left-to-right cost sum."""

    pairs: tuple[tuple[int, int], ...]
    total_cost: float


def _validate_cost(cost) -> np.ndarray:
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError("cost matrix must be 2-d")
    if c.shape[0] < 1:
        raise ValueError("cost matrix needs at least one row")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix has non-finite entries")
    return c


def _pair_total(cost: np.ndarray, pairs) -> float:
    total = 0.0
    for r, c in pairs:
        total += float(cost[r, c])
    return total


def _tol(cost: np.ndarray) -> float:
    scale = max(1.0, float(np.abs(cost).max(initial=0.0)))
    return 4e-12 * scale * (min(cost.shape) + 1)


def solve_assignment(cost) -> Assignment:
    """Minimum-cost assignment of size ``min(R, C)``.

    Deterministic under ties: the row-sorted pair list is the
    lexicographically smallest one attaining the optimal total.
    """
    c = _validate_cost(cost)
    R, C = c.shape
    m = min(R, C)
    if m == 0:
        return Assignment(pairs=(), total_cost=0.0)

    rows, cols = linear_sum_assignment(c)
    best_total = float(c[rows, cols].sum())
    tol = _tol(c)

    # Greedy prefix extension: at each slot take the lexicographically
    # smallest (row, col) that still extends to an optimal completion.
    pairs: list[tuple[int, int]] = []
    used = np.zeros(C, dtype=bool)
    prefix = 0.0
    row_lo = 0
    for t in range(m):
        remaining = m - t
        placed = False
        for r in range(row_lo, R - remaining + 1):
            for col in np.flatnonzero(~used):
                col = int(col)
                cand = prefix + float(c[r, col])
                need = remaining - 1
                if need == 0:
                    ok = abs(cand - best_total) <= tol
                else:
                    free = ~used
                    free[col] = False
                    sub = c[r + 1 :, free]
                    # A completion uses `need` distinct rows and cols, so the
                    # sum of the `need` smallest row (or col) minima bounds it
                    # from below; reject cheaply before the exact sub-solve.
                    lb_rows = np.sort(sub.min(axis=1))[:need].sum()
                    lb_cols = np.sort(sub.min(axis=0))[:need].sum()
                    if cand + max(lb_rows, lb_cols) > best_total + tol:
                        continue
                    srows, scols = linear_sum_assignment(sub)
                    sub_total = float(sub[srows, scols].sum())
                    ok = abs(cand + sub_total - best_total) <= tol
                if ok:
                    pairs.append((r, col))
                    used[col] = True
                    prefix = cand
                    row_lo = r + 1
                    placed = True
                    break
            if placed:
                break
        if not placed:
            raise RuntimeError("assignment refinement failed to extend prefix")
    return Assignment(pairs=tuple(pairs), total_cost=_pair_total(c, pairs))


@lru_cache(maxsize=None)
def _perm_array(n: int, k: int) -> np.ndarray:
    perms = list(itertools.permutations(range(n), k))
    return np.asarray(perms, dtype=np.intp).reshape(len(perms), k)


def brute_force_assignment(cost) -> Assignment:
    """Globally optimal assignment by exhaustive enumeration.

    Verification oracle only: requires ``min(R, C) <= 8``. Applies the same
    lexicographic tie rule as the solver.
    """
    c = _validate_cost(cost)
    R, C = c.shape
    m = min(R, C)
    if m > BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"min(R,C)={m} exceeds enumeration bound {BRUTE_FORCE_LIMIT}"
        )
    if m == 0:
        return Assignment(pairs=(), total_cost=0.0)
    tol = _tol(c)

    if R <= C:
        perms = _perm_array(C, R)
        totals = c[np.arange(R)[None, :], perms].sum(axis=1)
        best = totals.min()
        # permutations() is lexicographic, so the first near-optimal index
        # is the lexicographically smallest pair list.
        idx = int(np.flatnonzero(totals <= best + tol)[0])
        pairs = tuple((r, int(perms[idx, r])) for r in range(R))
        return Assignment(pairs=pairs, total_cost=_pair_total(c, pairs))

    combos = np.asarray(list(itertools.combinations(range(R), C)), dtype=np.intp)
    perms = _perm_array(C, C)
    totals = c[combos[:, None, :], perms[None, :, :]].sum(axis=2)
    best = totals.min()
    cand_pairs = []
    for i, j in zip(*np.nonzero(totals <= best + tol)):
        cand_pairs.append(tuple(zip(combos[i].tolist(), perms[j].tolist())))
    pairs = min(cand_pairs)
    return Assignment(pairs=tuple(pairs), total_cost=_pair_total(c, pairs))
