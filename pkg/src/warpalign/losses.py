"""Scale-invariant alignment losses with slope penalization.

The core quantity is a signed-square cosine similarity: codirectional
vectors score 0, orthogonal 1, contradirectional 2. Warping a signal
before the comparison makes the loss a differentiable function of the
warp parameters; the companion ``*_grad`` functions return the analytic
derivatives used by the trainer and verified against finite differences
in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .data import ClassGroup, Series
from .errors import ContractViolation
from .warp import (
    PiecewiseLinearWarp,
    SoftWarpMatrix,
    apply_warp,
    interpolation_weights,
    normalize_durations,
    segment_index,
    tau_grid,
)

__all__ = [
    "LossConfig",
    "cosine_similarity",
    "signed_square_loss",
    "main_loss",
    "penalization",
    "final_loss",
    "mean_pairwise_loss",
    "signed_square_loss_grad",
    "penalization_grad",
    "alignment_loss_and_grad",
]

_DEGENERATE_SUM = 1e-8
_PEN_FLOOR = 0.1  # fixed additive constant in the penalization denominator


@dataclass(frozen=True)
class LossConfig:
    """Penalization strengths and the norm-guard epsilon."""

    lambda1: float = 0.5
    lambda2: float = 0.5
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ContractViolation("penalization weights must be nonnegative")
        if self.epsilon <= 0:
            raise ContractViolation("epsilon must be positive")


def cosine_similarity(x: np.ndarray, y: np.ndarray, epsilon: float = 1e-8) -> float:
    """Inner-product similarity in [-1, 1] with an epsilon-guarded denominator."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.size != y.size:
        raise ContractViolation(f"vector lengths differ: {x.size} vs {y.size}")
    denom = max(float(np.linalg.norm(x) * np.linalg.norm(y)), epsilon)
    return float(np.dot(x, y) / denom)


def signed_square_loss(x: np.ndarray, y: np.ndarray, epsilon: float = 1e-8) -> float:
    """1 - S^2 * sign(S) for cosine similarity S; in [0, 2], 0 iff codirectional."""
    s = cosine_similarity(x, y, epsilon)
    return 1.0 - s * s * np.sign(s)


def _row_mean_loss(warped: np.ndarray, target: np.ndarray, epsilon: float) -> float:
    losses = [signed_square_loss(warped[r], target[r], epsilon) for r in range(warped.shape[0])]
    return float(np.mean(losses))


def main_loss(x: Series, y: Series, w: SoftWarpMatrix, epsilon: float = 1e-8) -> float:
    """Signed-square loss between warped x and y, averaged over rows."""
    if x.dims != y.dims:
        raise ContractViolation(f"dimension mismatch: {x.dims} vs {y.dims}")
    warped = apply_warp(w, x)
    if warped.length != y.length:
        raise ContractViolation(
            f"warp output length {warped.length} does not match target {y.length}"
        )
    return _row_mean_loss(warped.values, y.values, epsilon)


def penalization(slopes: np.ndarray, lambda1: float) -> float:
    """Keep slopes near one and bounded away from zero.

    Quadratic pull toward 1 plus a barrier that blows up as the mean
    squared slope approaches zero.
    """
    a = np.asarray(slopes, dtype=np.float64).reshape(-1)
    return float(np.sum((a - 1.0) ** 2) + lambda1 / (np.mean(a * a) + _PEN_FLOOR))


def final_loss(
    x: Series,
    y: Series,
    w: SoftWarpMatrix,
    slopes: np.ndarray,
    cfg: LossConfig,
) -> float:
    """Alignment loss plus weighted slope penalization."""
    return main_loss(x, y, w, cfg.epsilon) + cfg.lambda2 * penalization(slopes, cfg.lambda1)


def mean_pairwise_loss(group: ClassGroup | Sequence[Series], epsilon: float = 1e-8) -> float:
    """Mean signed-square loss over all unordered member pairs, no warping.

    Measures how aligned a set of signals already is; multi-row series
    average the per-row losses first.
    """
    members = list(group.series) if isinstance(group, ClassGroup) else list(group)
    if len(members) < 2:
        raise ContractViolation("pairwise loss needs at least 2 series")
    total = 0.0
    count = 0
    for a, b in combinations(members, 2):
        total += _row_mean_loss(a.values, b.values, epsilon)
        count += 1
    return total / count


def signed_square_loss_grad(
    x: np.ndarray, y: np.ndarray, epsilon: float = 1e-8
) -> tuple[float, np.ndarray]:
    """Loss and its gradient with respect to the first vector.

    The sign factor is piecewise constant, so d(loss)/dS = -2|S|; when the
    epsilon guard is active the denominator is treated as locked.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    dot = float(np.dot(x, y))
    if nx * ny > epsilon:
        denom = nx * ny
        s = dot / denom
        ds_dx = y / denom - s * x / (nx * nx)
    else:
        s = dot / epsilon
        ds_dx = y / epsilon
    loss = 1.0 - s * s * np.sign(s)
    grad = -2.0 * abs(s) * ds_dx
    return float(loss), grad


def penalization_grad(slopes: np.ndarray, lambda1: float) -> tuple[float, np.ndarray]:
    """Penalization value and gradient with respect to the slopes."""
    a = np.asarray(slopes, dtype=np.float64).reshape(-1)
    k = a.size
    q = float(np.mean(a * a)) + _PEN_FLOOR
    value = float(np.sum((a - 1.0) ** 2) + lambda1 / q)
    grad = 2.0 * (a - 1.0) - lambda1 * (2.0 * a / k) / (q * q)
    return value, grad


def alignment_loss_and_grad(
    x_values: np.ndarray,
    targets: Sequence[np.ndarray],
    slopes: np.ndarray,
    raw_durations: np.ndarray,
    out_len: int,
    cfg: LossConfig,
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Penalized alignment loss and gradients w.r.t. slopes and raw durations.

    Warps ``x_values`` (dims, src_len) to ``out_len`` samples, averages the
    row-wise signed-square loss against every target, and adds the slope
    penalization. Returns (loss, d_slopes, d_raw_durations, warped_values).

    Gradients flow through the duration normalization (quotient rule), the
    piecewise-linear coordinate map, and the interpolation weights; clamped
    coordinates and integer crossings use the locked-stencil subgradient.
    """
    x_values = np.asarray(x_values, dtype=np.float64)
    slopes = np.asarray(slopes, dtype=np.float64).reshape(-1)
    raw = np.asarray(raw_durations, dtype=np.float64).reshape(-1)
    if not targets:
        raise ContractViolation("need at least one target signal")
    dims, src_len = x_values.shape
    k = slopes.size

    raw_sum = float(raw.sum())
    degenerate = raw_sum < _DEGENERATE_SUM
    durations = normalize_durations(raw, out_len)
    warp = PiecewiseLinearWarp(slopes, durations, out_len)

    u, saturated = tau_grid(warp, src_len)
    lo, hi, frac = interpolation_weights(u, src_len)
    warped = (1.0 - frac) * x_values[:, lo] + frac * x_values[:, hi]

    weight = 1.0 / (dims * len(targets))
    main = 0.0
    g_warped = np.zeros_like(warped)
    for target in targets:
        target = np.asarray(target, dtype=np.float64)
        if target.shape != warped.shape:
            raise ContractViolation(
                f"target shape {target.shape} does not match warped {warped.shape}"
            )
        for r in range(dims):
            row_loss, row_grad = signed_square_loss_grad(warped[r], target[r], cfg.epsilon)
            main += weight * row_loss
            g_warped[r] += weight * row_grad

    # d(warped)/d(u) with the stencil held fixed; zero where the clamp saturates
    g_u = np.sum(g_warped * (x_values[:, hi] - x_values[:, lo]), axis=0)
    g_tau = np.where(saturated, 0.0, g_u)

    grid = np.arange(out_len, dtype=np.float64)
    seg = segment_index(warp, grid)
    cum_t = np.concatenate(([0.0], np.cumsum(durations)))
    g_seg = np.bincount(seg, weights=g_tau, minlength=k)
    g_seg_t = np.bincount(seg, weights=g_tau * grid, minlength=k)
    g_seg_a = np.bincount(seg, weights=g_tau * slopes[seg], minlength=k)
    # suffix[k] = sum over segments strictly after k
    suffix_g = np.concatenate((np.cumsum(g_seg[::-1])[::-1], [0.0]))[1:]
    suffix_ga = np.concatenate((np.cumsum(g_seg_a[::-1])[::-1], [0.0]))[1:]

    g_slopes = g_seg_t - cum_t[:k] * g_seg + durations * suffix_g
    g_durations = slopes * suffix_g - suffix_ga

    if degenerate:
        g_raw = np.zeros(k)
    else:
        g_raw = (out_len * g_durations - float(np.dot(g_durations, durations))) / raw_sum

    pen, g_pen = penalization_grad(slopes, cfg.lambda1)
    loss = main + cfg.lambda2 * pen
    g_slopes = g_slopes + cfg.lambda2 * g_pen
    return loss, g_slopes, g_raw, warped
