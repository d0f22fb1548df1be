"""Piecewise-linear time warping and differentiable soft-warp matrices.

A warp is a monotone time reparameterization built from K linear segments
with nonnegative slopes and durations. Durations are normalized to sum to
the warped length, which together with nonnegative slopes guarantees the
boundary, monotonicity, and continuity constraints of a valid warping.

Realizing the warp on a discrete series uses *soft* indexing: fractional
source coordinates become two-point interpolation weights, collected into
a row-stochastic matrix so downstream losses stay differentiable in the
warp parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Series
from .errors import ContractViolation

__all__ = [
    "PiecewiseLinearWarp",
    "SoftWarpMatrix",
    "WarpPath",
    "ConstraintReport",
    "normalize_durations",
    "eval_tau",
    "check_constraints",
    "build_soft_matrix",
    "apply_warp",
    "hard_warp_path",
]

_DEGENERATE_SUM = 1e-8


@dataclass(frozen=True)
class PiecewiseLinearWarp:
    """K-segment warping function: slope ``slopes[k]`` over ``durations[k]`` steps."""

    slopes: np.ndarray
    durations: np.ndarray
    out_len: int

    def __post_init__(self) -> None:
        slopes = np.asarray(self.slopes, dtype=np.float64).reshape(-1)
        durations = np.asarray(self.durations, dtype=np.float64).reshape(-1)
        if slopes.size < 1 or slopes.size != durations.size:
            raise ContractViolation(
                f"need matching slope/duration vectors of size >= 1, "
                f"got {slopes.size} and {durations.size}"
            )
        if self.out_len < 1:
            raise ContractViolation(f"warped length must be >= 1, got {self.out_len}")
        slopes = slopes.copy()
        durations = durations.copy()
        slopes.setflags(write=False)
        durations.setflags(write=False)
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "durations", durations)

    @property
    def segments(self) -> int:
        return int(self.slopes.size)

    @classmethod
    def identity(cls, out_len: int, segments: int = 4) -> "PiecewiseLinearWarp":
        ones = np.ones(segments)
        return cls(ones, normalize_durations(ones, out_len), out_len)


@dataclass(frozen=True)
class SoftWarpMatrix:
    """Row-stochastic interpolation matrix of shape (out_len, src_len).

    Each row holds at most two adjacent nonzero weights in [0, 1] summing
    to one.
    """

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ContractViolation("soft warp matrix must be 2-D")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def out_len(self) -> int:
        return self.matrix.shape[0]

    @property
    def src_len(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class WarpPath:
    """Sequence of 1-indexed (output step, source step) correspondences."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "pairs", tuple((int(n), int(m)) for n, m in self.pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def check(self, n_len: int, m_len: int) -> None:
        """Raise unless the path satisfies boundary/monotonicity/continuity."""
        if not self.pairs:
            raise ContractViolation("empty warp path")
        if self.pairs[0] != (1, 1):
            raise ContractViolation(f"path must start at (1, 1), got {self.pairs[0]}")
        if self.pairs[-1] != (n_len, m_len):
            raise ContractViolation(
                f"path must end at ({n_len}, {m_len}), got {self.pairs[-1]}"
            )
        for prev, cur in zip(self.pairs, self.pairs[1:]):
            step = (cur[0] - prev[0], cur[1] - prev[1])
            if step not in ((1, 0), (0, 1), (1, 1)):
                raise ContractViolation(f"illegal step {step} from {prev} to {cur}")


@dataclass(frozen=True)
class ConstraintReport:
    boundary: bool
    monotonicity: bool
    continuity: bool

    @property
    def all_satisfied(self) -> bool:
        return self.boundary and self.monotonicity and self.continuity


def normalize_durations(raw_durations: np.ndarray, out_len: int) -> np.ndarray:
    """Rescale nonnegative raw durations so they sum to ``out_len``.

    A (near-)zero raw sum falls back to uniform segment durations.
    """
    raw = np.asarray(raw_durations, dtype=np.float64).reshape(-1)
    total = float(raw.sum())
    if total < _DEGENERATE_SUM:
        return np.full(raw.size, out_len / raw.size)
    return out_len * raw / total


def _segment_tables(warp: PiecewiseLinearWarp) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative duration and cumulative slope*duration tables, length K+1."""
    cum_t = np.concatenate(([0.0], np.cumsum(warp.durations)))
    cum_at = np.concatenate(([0.0], np.cumsum(warp.slopes * warp.durations)))
    return cum_t, cum_at


def segment_index(warp: PiecewiseLinearWarp, t: np.ndarray) -> np.ndarray:
    """Active segment for each time t: boundaries belong to the later segment."""
    cum_t, _ = _segment_tables(warp)
    idx = np.searchsorted(cum_t[1:], t, side="right")
    return np.minimum(idx, warp.segments - 1)


def eval_tau(warp: PiecewiseLinearWarp, t: float | np.ndarray) -> float | np.ndarray:
    """Evaluate the warping function at time(s) t in [0, out_len]."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0) or np.any(t_arr > warp.out_len):
        raise ContractViolation(f"t must lie in [0, {warp.out_len}]")
    cum_t, cum_at = _segment_tables(warp)
    seg = segment_index(warp, t_arr)
    out = cum_at[seg] + warp.slopes[seg] * (t_arr - cum_t[seg])
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def check_constraints(warp: PiecewiseLinearWarp, tol: float = 1e-6) -> ConstraintReport:
    """Audit the three warping constraints for this parameterization.

    Continuity holds by construction for piecewise-linear warps and is
    reported for completeness.
    """
    boundary = abs(float(warp.durations.sum()) - warp.out_len) <= tol
    monotonicity = bool(np.min(warp.slopes) >= 0.0)
    return ConstraintReport(boundary=boundary, monotonicity=monotonicity, continuity=True)


def interpolation_weights(
    u: np.ndarray, src_len: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Two-point linear interpolation stencil for clamped source coordinates.

    Returns (lo, hi, frac): value = (1 - frac) * x[lo] + frac * x[hi].
    """
    lo = np.floor(u).astype(np.int64)
    lo = np.clip(lo, 0, src_len - 1)
    hi = np.minimum(lo + 1, src_len - 1)
    frac = u - lo
    return lo, hi, frac


def tau_grid(warp: PiecewiseLinearWarp, src_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Clamped source coordinates for output grid 0..out_len-1.

    Returns (u, saturated): ``u`` clipped to [0, src_len - 1] and a mask of
    grid points whose raw coordinate fell outside that range (these carry
    zero gradient).
    """
    grid = np.arange(warp.out_len, dtype=np.float64)
    tau = np.asarray(eval_tau(warp, grid))
    saturated = (tau < 0.0) | (tau > src_len - 1.0)
    u = np.clip(tau, 0.0, float(src_len - 1))
    return u, saturated


def build_soft_matrix(warp: PiecewiseLinearWarp, src_len: int) -> SoftWarpMatrix:
    """Materialize the warp as a dense row-stochastic matrix.

    Output row i interpolates the source at coordinate tau(i), clamped to
    the valid index range.
    """
    if src_len < 2:
        raise ContractViolation(f"source length must be >= 2, got {src_len}")
    u, _ = tau_grid(warp, src_len)
    lo, hi, frac = interpolation_weights(u, src_len)
    w = np.zeros((warp.out_len, src_len))
    rows = np.arange(warp.out_len)
    w[rows, lo] += 1.0 - frac
    w[rows, hi] += frac
    return SoftWarpMatrix(w)


def apply_warp(w: SoftWarpMatrix, series: Series) -> Series:
    """Warp a series row-wise: each output sample mixes two adjacent inputs."""
    if w.src_len != series.length:
        raise ContractViolation(
            f"matrix expects source length {w.src_len}, series has {series.length}"
        )
    return Series(series.values @ w.matrix.T)


def hard_warp_path(warp: PiecewiseLinearWarp, src_len: int) -> WarpPath:
    """Round the warp to integer indices and emit a constraint-valid path.

    Skipped source indices are padded with repeated output steps so every
    source sample keeps at least one correspondence.
    """
    u, _ = tau_grid(warp, src_len)
    m = np.rint(u).astype(np.int64)
    pairs: list[tuple[int, int]] = [(1, int(m[0]) + 1)]
    for i in range(1, warp.out_len):
        prev_m, cur_m = int(m[i - 1]), int(m[i])
        for skipped in range(prev_m + 1, cur_m):
            pairs.append((i, skipped + 1))
        pairs.append((i + 1, cur_m + 1))
    for trailing in range(int(m[-1]) + 2, src_len + 1):
        pairs.append((warp.out_len, trailing))
    path = WarpPath(tuple(pairs))
    path.check(warp.out_len, src_len)
    return path
