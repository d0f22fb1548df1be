"""Classic dynamic-programming DTW and barycenter averaging baselines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .data import ClassGroup, Series
from .errors import ContractViolation
from .warp import WarpPath

__all__ = ["DtwResult", "BarycenterState", "dtw", "dba_average", "dtw_distance_to_set"]


@dataclass(frozen=True)
class DtwResult:
    distance: float
    path: WarpPath


@dataclass(frozen=True)
class BarycenterState:
    barycenter: Series
    iteration: int
    objective: float
    objective_history: tuple[float, ...] = ()


@njit(cache=True)
def _accumulated_cost(x: np.ndarray, y: np.ndarray, squared: bool, band: int) -> np.ndarray:
    n = x.shape[0]
    m = y.shape[0]
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        lo = 1
        hi = m
        if band >= 0:
            lo = max(1, i - band)
            hi = min(m, i + band)
        for j in range(lo, hi + 1):
            diff = x[i - 1] - y[j - 1]
            cost = diff * diff if squared else abs(diff)
            prev = acc[i - 1, j - 1]
            if acc[i - 1, j] < prev:
                prev = acc[i - 1, j]
            if acc[i, j - 1] < prev:
                prev = acc[i, j - 1]
            acc[i, j] = cost + prev
    return acc


def _backtrack(acc: np.ndarray) -> list[tuple[int, int]]:
    """Walk the table back from the corner, preferring diagonal, then
    vertical, then horizontal on ties."""
    i, j = acc.shape[0] - 1, acc.shape[1] - 1
    pairs = [(i, j)]
    while i > 1 or j > 1:
        candidates = (acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
        best = int(np.argmin(candidates))
        if best == 0:
            i, j = i - 1, j - 1
        elif best == 1:
            i -= 1
        else:
            j -= 1
        pairs.append((i, j))
    pairs.reverse()
    return pairs


def dtw(
    x: Series,
    y: Series,
    cost: str = "squared",
    band: int | None = None,
) -> DtwResult:
    """Optimal alignment of two univariate series under the usual step set.

    ``cost`` selects squared or absolute local differences; ``band``
    optionally restricts the path to a diagonal corridor of that width.
    Distance is the plain sum of local costs along the returned path.
    """
    if x.dims != 1 or y.dims != 1:
        raise ContractViolation("dtw baseline handles univariate series only")
    if cost not in ("squared", "abs"):
        raise ContractViolation(f"unknown local cost {cost!r}")
    xv = np.ascontiguousarray(x.values[0], dtype=np.float64)
    yv = np.ascontiguousarray(y.values[0], dtype=np.float64)
    acc = _accumulated_cost(xv, yv, cost == "squared", -1 if band is None else int(band))
    distance = float(acc[-1, -1])
    if not np.isfinite(distance):
        raise ContractViolation(f"band {band} leaves no feasible path")
    path = WarpPath(tuple(_backtrack(acc)))
    path.check(x.length, y.length)
    return DtwResult(distance=distance, path=path)


def _medoid_index(members: list[Series]) -> int:
    """Member minimizing summed DTW distance to the rest (lowest index on ties)."""
    totals = np.zeros(len(members))
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            d = dtw(members[i], members[j]).distance
            totals[i] += d
            totals[j] += d
    return int(np.argmin(totals))


def dba_average(
    group: ClassGroup,
    init: Series | None = None,
    max_iter: int = 30,
    tol: float = 1e-6,
) -> BarycenterState:
    """Barycenter averaging: realign members to the running average via DTW,
    then replace each average sample with the mean of everything mapped to it.

    Starts from the group medoid unless ``init`` is given. Stops when the
    summed-distance objective stalls (relative improvement below ``tol``),
    the barycenter stops changing, or ``max_iter`` is reached.
    """
    members = list(group.series)
    if not members:
        raise ContractViolation("cannot average an empty group")
    if group.dims != 1:
        raise ContractViolation("dba baseline handles univariate series only")
    if init is None:
        init = members[_medoid_index(members)]
    bary = init.values[0].copy()
    t = bary.shape[0]
    history: list[float] = []
    prev_obj = np.inf
    iteration = 0
    for iteration in range(1, max_iter + 1):
        sums = np.zeros(t)
        counts = np.zeros(t)
        objective = 0.0
        for member in members:
            result = dtw(Series(bary[np.newaxis, :]), member)
            objective += result.distance
            for bary_idx, member_idx in result.path.pairs:
                sums[bary_idx - 1] += member.values[0, member_idx - 1]
                counts[bary_idx - 1] += 1.0
        history.append(objective)
        new_bary = sums / counts
        unchanged = np.array_equal(new_bary, bary)
        converged = np.isfinite(prev_obj) and (
            prev_obj - objective <= tol * max(abs(prev_obj), 1.0)
        )
        prev_obj = objective
        bary = new_bary
        if unchanged or converged:
            break
    return BarycenterState(
        barycenter=Series(bary[np.newaxis, :]),
        iteration=iteration,
        objective=history[-1],
        objective_history=tuple(history),
    )


def dtw_distance_to_set(x: Series, group: ClassGroup) -> tuple[float, int]:
    """Minimum DTW distance from x to any group member (lowest index wins ties)."""
    if len(group) == 0:
        raise ContractViolation("empty group")
    best = np.inf
    best_idx = 0
    for idx, member in enumerate(group.series):
        d = dtw(x, member).distance
        if d < best:
            best = d
            best_idx = idx
    return float(best), best_idx
