"""Rank-based selection: per-row top-k pruning, a global magnitude
threshold, the exact-score oracle pruner, and the RunConfig dispatcher.

Tie handling is deterministic everywhere: stable ascending sort order, so
equal scores prune the lower column index first.
"""

from __future__ import annotations

import time

import numpy as np

from swiftprune import _kernels
from swiftprune.errors import ConfigError, DimensionError, DomainError, NumericalError
from swiftprune.io import RunConfig
from swiftprune.metrics import ORACLE_SIZE_CAP, RowContext, score_matrix
from swiftprune.reports import PruneReport


def _finish(w2: np.ndarray, mask: np.ndarray, report: PruneReport):
    pruned = np.where(mask, w2, w2.dtype.type(0))
    return pruned, mask, report


def _row_stats(mask: np.ndarray) -> dict:
    rows, n = mask.shape
    pruned_per_row = n - mask.sum(axis=1)
    per_row = pruned_per_row / n
    return dict(
        global_sparsity=float(pruned_per_row.sum()) / (rows * n),
        row_sparsity_min=float(per_row.min()),
        row_sparsity_mean=float(per_row.mean()),
        row_sparsity_max=float(per_row.max()),
        per_row_sparsity=per_row,
    )


def topk_prune(w: np.ndarray, ctx: RowContext, target: float, *,
               metric: str = "swiftprune"
               ) -> tuple[np.ndarray, np.ndarray, PruneReport]:
    """Prune the k = round(target * n) lowest-scoring weights of every row."""
    if not 0.0 <= target <= 1.0:
        raise ConfigError(f"target sparsity must lie in [0, 1], got {target}")
    w2 = np.atleast_2d(np.asarray(w))
    rows, n = w2.shape
    k = int(round(target * n))
    t0 = time.perf_counter()
    scores = score_matrix(w2, ctx, metric)
    order = np.argsort(scores, axis=1, kind="stable")
    mask = np.ones((rows, n), dtype=bool)
    if k:
        np.put_along_axis(mask, order[:, :k], False, axis=1)
    wall = time.perf_counter() - t0
    report = PruneReport(
        mode="topk", metric=metric, rows=rows, cols=n,
        **_row_stats(mask), wall_time_s=wall, backend="numpy",
        target_sparsity=target)
    return _finish(w2, mask, report)


def magnitude_threshold_prune(w: np.ndarray, target: float
                              ) -> tuple[np.ndarray, np.ndarray, PruneReport]:
    """Prune weights whose |w| falls strictly below the global target
    quantile. Ties at the threshold are kept, so the achieved sparsity can
    land slightly under the target on discrete data."""
    if not 0.0 <= target <= 1.0:
        raise ConfigError(f"target sparsity must lie in [0, 1], got {target}")
    w2 = np.atleast_2d(np.asarray(w))
    rows, n = w2.shape
    t0 = time.perf_counter()
    mag = np.abs(w2.astype(np.float64, copy=False)).ravel()
    k = int(round(target * mag.size))
    if k >= mag.size:
        thresh = np.inf
    else:
        thresh = np.partition(mag, k)[k]
    mask = (np.abs(w2.astype(np.float64, copy=False)) >= thresh)
    wall = time.perf_counter() - t0
    report = PruneReport(
        mode="magnitude-threshold", metric="magnitude", rows=rows, cols=n,
        **_row_stats(mask), wall_time_s=wall, backend="numpy",
        target_sparsity=target)
    return _finish(w2, mask, report)


def oracle_prune(w: np.ndarray, ctx: RowContext, target: float, *,
                 backend: str | None = None, size_cap: int = ORACLE_SIZE_CAP
                 ) -> tuple[np.ndarray, np.ndarray, PruneReport]:
    """Per-row top-k on exact scores 0.5 w^2 / (H^-1)_qq, with the Hessian
    re-factorized for every row (the cost model this oracle exists to
    measure). O(rows * n^3); capped like the other brute oracles."""
    if not 0.0 <= target <= 1.0:
        raise ConfigError(f"target sparsity must lie in [0, 1], got {target}")
    w2 = np.atleast_2d(np.asarray(w))
    rows, n = w2.shape
    if n != ctx.n:
        raise DimensionError(f"weights have {n} columns, context has {ctx.n}")
    if n > size_cap:
        raise DomainError(f"oracle pruner capped at n={size_cap}, got {n}")
    kern = _kernels.get_backend(backend)
    w64 = np.ascontiguousarray(w2, dtype=np.float64)
    k = int(round(target * n))
    mask_u8 = np.empty((rows, n), dtype=np.uint8)
    h_scratch = np.empty((n, n))
    y_scratch = np.empty(n)
    diag_scratch = np.empty(n)
    score_scratch = np.empty(n)
    t0 = time.perf_counter()
    bad, err = kern.oracle_prune_block(w64, ctx.x, ctx.s0, k, h_scratch,
                                       y_scratch, diag_scratch, score_scratch,
                                       mask_u8)
    wall = time.perf_counter() - t0
    if bad >= 0:
        raise NumericalError(f"row {bad}: Hessian factorization failed (pivot {err})")
    mask = mask_u8.view(bool)
    report = PruneReport(
        mode="oracle", metric="exact", rows=rows, cols=n,
        **_row_stats(mask), wall_time_s=wall, backend=kern.BACKEND,
        target_sparsity=target)
    return _finish(w2, mask, report)


def prune_with_config(w: np.ndarray, ctx: RowContext, cfg: RunConfig, *,
                      backend: str | None = None
                      ) -> tuple[np.ndarray, np.ndarray, PruneReport]:
    """Dispatch a validated RunConfig to the matching pruner."""
    from swiftprune.ewma import EwmaParams, prune_matrix
    from swiftprune.nm import NMPattern, prune_matrix_nm

    cfg.validate()
    if cfg.mode == "ewma":
        params = EwmaParams(alpha=cfg.alpha, beta=cfg.beta, la=cfg.la)
        return prune_matrix(w, ctx, params, workers=cfg.workers,
                            metric=cfg.metric, freeze_s=cfg.freeze_s,
                            backend=backend)
    if cfg.mode == "topk":
        return topk_prune(w, ctx, cfg.target_sparsity, metric=cfg.metric)
    if cfg.mode == "nm":
        return prune_matrix_nm(w, ctx, NMPattern(cfg.nm_n, cfg.nm_m),
                               workers=cfg.workers, metric=cfg.metric,
                               streaming=cfg.nm_streaming, backend=backend)
    if cfg.mode == "magnitude-threshold":
        return magnitude_threshold_prune(w, cfg.target_sparsity)
    raise ConfigError(f"unknown mode: {cfg.mode!r}")
