"""Streaming one-shot pruning with an EWMA contribution tracker.

Weights of a row are visited left to right. Each weight's contribution score
L is compared against a smoothed estimate of the scores seen so far (est)
minus a tolerance of la mean absolute deviations (dev), in the style of the
classic RTT estimator: prune when

    L < est - la * dev

On a prune the activation energy S is reduced by the pruned weight's energy
w^2, so later scores in the row see the shrunken denominator; est/dev are
then updated with the observed score regardless of the decision (est first,
dev with the updated est). The first well-posed score initializes est, which
makes position 0 unprunable (L0 < L0 is false) and keeps constant rows
untouched: with the incremental update form est += alpha * (L - est) a
constant stream is an exact floating-point fixed point (est == L, dev == 0).

Guards:
  * denominator 1 - x_i^2/S <= EPS_DEN: the score is the +inf sentinel,
    the weight is kept and est/dev are not updated;
  * S would fall to/below EPS_S_REL * s0 on a prune: S clamps to the floor
    and the row is flagged;
  * a non-finite score (weight overflow, NaN input) aborts the row.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from swiftprune import _kernels
from swiftprune.errors import ConfigError, DimensionError, NumericalError
from swiftprune.io import TraceRecord
from swiftprune.metrics import (
    EPS_DEN,
    EPS_S_REL,
    RowContext,
    contribution,
    score_matrix,
)
from swiftprune.reports import PruneReport

ALPHA = 0.125  # smoothing gain for est, 1/8
BETA = 0.125   # smoothing gain for dev, 1/8
LA = 4.0       # deviation tolerance; negative values prune above the mean


@dataclass(frozen=True)
class EwmaParams:
    alpha: float = ALPHA
    beta: float = BETA
    la: float = LA

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie strictly inside (0, 1), got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise ConfigError(f"beta must lie strictly inside (0, 1), got {self.beta}")
        if not math.isfinite(self.la):
            raise ConfigError(f"la must be finite, got {self.la}")


@dataclass
class TensorState:
    """Mutable per-row tracker state (reference implementation)."""

    S: float
    est: float = 0.0
    dev: float = 0.0
    started: bool = False
    s_floor: float = 0.0


@dataclass
class RowResult:
    kept: np.ndarray
    mask: np.ndarray
    pruned_count: int
    den_guards: int
    s_clamped: bool
    trace: list[TraceRecord] | None = field(default=None)


def init_state(ctx: RowContext) -> TensorState:
    return TensorState(S=ctx.s0, s_floor=EPS_S_REL * ctx.s0)


def ewma_step(state: TensorState, w_i: float, x_i: float, params: EwmaParams,
              freeze_s: bool = False) -> tuple[bool, TensorState, float]:
    """Advance the tracker by one weight. Returns (pruned, state, score);
    the state is mutated in place and returned for convenience.

    Pure-Python reference for the kernel inner loop; a guard step (score
    +inf) keeps the weight and leaves the tracker untouched.
    """
    score = contribution(w_i, x_i, state.S)
    if not score.well_posed:
        return False, state, score.value
    l_i = score.value
    if not math.isfinite(l_i):
        raise NumericalError(f"non-finite contribution score for w={w_i}")
    if not state.started:
        state.est = l_i
        state.started = True
    pruned = l_i < state.est - params.la * state.dev
    if pruned and not freeze_s:
        s_next = state.S - w_i * w_i
        state.S = state.s_floor if s_next <= state.s_floor else s_next
    state.est = state.est + params.alpha * (l_i - state.est)
    state.dev = state.dev + params.beta * (abs(state.est - l_i) - state.dev)
    return pruned, state, l_i


def _integrated(metric: str, freeze_s: bool) -> bool:
    # The live-S kernel only exists for the native metric; every other
    # combination streams a precomputed score matrix (S fixed at s0).
    return metric == "swiftprune" and not freeze_s


def prune_row(w_row: np.ndarray, ctx: RowContext, params: EwmaParams, *,
              trace: bool = False, metric: str = "swiftprune",
              freeze_s: bool = False, backend: str | None = None,
              row_index: int = 0) -> RowResult:
    """Prune a single row; optionally collect the full per-step trace."""
    kern = _kernels.get_backend(backend)
    w = np.asarray(w_row)
    if w.ndim != 1 or w.shape[0] != ctx.n:
        raise DimensionError(f"row of length {w.shape} against context n={ctx.n}")
    w64 = np.ascontiguousarray(w, dtype=np.float64)
    n = ctx.n
    mask_u8 = np.empty(n, dtype=np.uint8)
    records = None
    if _integrated(metric, freeze_s):
        if trace:
            l_arr = np.empty(n)
            est_arr = np.empty(n)
            dev_arr = np.empty(n)
            pruned, guards, clamped, err = kern.ewma_trace_row(
                w64, ctx.x_sq, ctx.s0, params.alpha, params.beta, params.la,
                EPS_DEN, EPS_S_REL * ctx.s0, mask_u8, l_arr, est_arr, dev_arr)
        else:
            stats = np.zeros((1, 3), dtype=np.int64)
            _, err = kern.ewma_prune_block(
                w64.reshape(1, n), ctx.x_sq, ctx.s0, params.alpha, params.beta,
                params.la, EPS_DEN, EPS_S_REL * ctx.s0,
                mask_u8.reshape(1, n), stats)
            pruned, guards, clamped = (int(v) for v in stats[0])
    else:
        scores = score_matrix(w64, ctx, metric)[0]
        clamped = 0
        if trace:
            l_arr = scores
            est_arr = np.empty(n)
            dev_arr = np.empty(n)
            pruned, guards, err = kern.ewma_select_trace_row(
                scores, params.alpha, params.beta, params.la,
                mask_u8, est_arr, dev_arr)
        else:
            stats = np.zeros((1, 3), dtype=np.int64)
            _, err = kern.ewma_select_block(
                scores.reshape(1, n), params.alpha, params.beta, params.la,
                mask_u8.reshape(1, n), stats)
            pruned, guards = int(stats[0, 0]), int(stats[0, 1])
    if err:
        raise NumericalError(f"row {row_index}: non-finite score at step {err - 1}")
    mask = mask_u8.view(bool)
    if trace:
        records = [
            TraceRecord(row_index, i, float(l_arr[i]), float(est_arr[i]),
                        float(dev_arr[i]), not mask[i])
            for i in range(n)
        ]
    kept = np.where(mask, w, w.dtype.type(0))
    return RowResult(kept=kept, mask=mask, pruned_count=int(pruned),
                     den_guards=int(guards), s_clamped=bool(clamped), trace=records)


def _chunk_bounds(rows: int, workers: int) -> list[tuple[int, int]]:
    parts = max(1, min(workers, rows))
    edges = [rows * k // parts for k in range(parts + 1)]
    return [(edges[k], edges[k + 1]) for k in range(parts) if edges[k] < edges[k + 1]]


def prune_matrix(w: np.ndarray, ctx: RowContext, params: EwmaParams,
                 workers: int = 1, *, metric: str = "swiftprune",
                 freeze_s: bool = False, backend: str | None = None
                 ) -> tuple[np.ndarray, np.ndarray, PruneReport]:
    """Prune every row of a weight matrix independently.

    Returns (pruned, mask, report). Rows are partitioned into contiguous
    chunks across worker threads; each row's stream is fully sequential, so
    worker count cannot change any output bit. Kept values are the original
    weights (original dtype), pruned positions are exactly zero.
    """
    kern = _kernels.get_backend(backend)
    w2 = np.atleast_2d(np.asarray(w))
    if w2.ndim != 2:
        raise DimensionError(f"weights must be 2-D, got {w2.ndim}-D")
    if w2.shape[1] != ctx.n:
        raise DimensionError(
            f"weights have {w2.shape[1]} columns, context has {ctx.n}")
    rows, n = w2.shape
    w64 = np.ascontiguousarray(w2, dtype=np.float64)
    mask_u8 = np.empty((rows, n), dtype=np.uint8)
    stats = np.zeros((rows, 3), dtype=np.int64)
    integrated = _integrated(metric, freeze_s)

    t0 = time.perf_counter()
    scores = None if integrated else score_matrix(w64, ctx, metric)

    def run_chunk(lo: int, hi: int) -> tuple[int, int]:
        if integrated:
            bad, step = kern.ewma_prune_block(
                w64[lo:hi], ctx.x_sq, ctx.s0, params.alpha, params.beta,
                params.la, EPS_DEN, EPS_S_REL * ctx.s0,
                mask_u8[lo:hi], stats[lo:hi])
        else:
            bad, step = kern.ewma_select_block(
                scores[lo:hi], params.alpha, params.beta, params.la,
                mask_u8[lo:hi], stats[lo:hi])
        return (-1, 0) if bad < 0 else (lo + bad, step)

    bounds = _chunk_bounds(rows, workers)
    if len(bounds) == 1:
        results = [run_chunk(*bounds[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
            results = list(pool.map(lambda b: run_chunk(*b), bounds))
    wall = time.perf_counter() - t0

    failures = [(r, step) for r, step in results if r >= 0]
    if failures:
        bad_row, step = min(failures)
        raise NumericalError(f"row {bad_row}: non-finite score at step {step - 1}")

    mask = mask_u8.view(bool)
    pruned = np.where(mask, w2, w2.dtype.type(0))
    per_row = stats[:, 0] / n
    report = PruneReport(
        mode="ewma", metric=metric, rows=rows, cols=n,
        global_sparsity=float(stats[:, 0].sum()) / (rows * n),
        row_sparsity_min=float(per_row.min()),
        row_sparsity_mean=float(per_row.mean()),
        row_sparsity_max=float(per_row.max()),
        den_guard_count=int(stats[:, 1].sum()),
        s_underflow_rows=int(stats[:, 2].sum()),
        partial_nm_groups=0,
        wall_time_s=wall,
        backend=kern.BACKEND,
        workers=len(bounds),
        alpha=params.alpha, beta=params.beta, la=params.la,
        per_row_sparsity=per_row,
    )
    return pruned, mask, report


# Sparsity -> la anchors measured on Gaussian weight/activation fixtures;
# intermediate targets are piecewise-linear.
LA_TABLE = ((0.5, 0.5), (0.6, 0.2), (0.7, -0.2), (0.8, -0.9), (0.9, -1.5))


def la_for_sparsity(target: float) -> float:
    """Interpolated la reaching a target sparsity on Gaussian-like layers."""
    lo, hi = LA_TABLE[0][0], LA_TABLE[-1][0]
    if not lo <= target <= hi:
        raise ConfigError(
            f"target sparsity {target} outside calibrated range [{lo}, {hi}]")
    xs = [t for t, _ in LA_TABLE]
    ys = [v for _, v in LA_TABLE]
    return float(np.interp(target, xs, ys))
