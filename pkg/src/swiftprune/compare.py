"""Head-to-head comparison of two pruning configurations on one matrix:
mask agreement, score rank correlation, and layerwise loss difference."""

from __future__ import annotations

import numpy as np
from scipy.stats import kendalltau

from swiftprune.io import RunConfig
from swiftprune.metrics import RowContext, layer_loss, score_matrix
from swiftprune.reports import CompareReport
from swiftprune.select import prune_with_config

# Kendall tau is O(n log n) per row but still costly across thousands of
# rows; sample deterministically beyond these caps and record the sample.
ROW_CAP = 16
COL_CAP = 4096


def _method_label(cfg: RunConfig) -> str:
    return f"{cfg.mode}:{cfg.metric}"


def _row_tau(sa: np.ndarray, sb: np.ndarray) -> float:
    tau = kendalltau(sa, sb).statistic
    if np.isnan(tau):  # a constant score vector has no rank order
        return 1.0 if np.array_equal(sa, sb) else 0.0
    return float(tau)


def run_compare(w: np.ndarray, ctx: RowContext, cfg_a: RunConfig,
                cfg_b: RunConfig, sample_seed: int = 0,
                backend: str | None = None) -> CompareReport:
    w2 = np.atleast_2d(np.asarray(w))
    rows, n = w2.shape
    pruned_a, mask_a, _ = prune_with_config(w2, ctx, cfg_a, backend=backend)
    pruned_b, mask_b, _ = prune_with_config(w2, ctx, cfg_b, backend=backend)
    overlap = float(np.mean(mask_a == mask_b))

    scores_a = score_matrix(w2, ctx, cfg_a.metric)
    scores_b = score_matrix(w2, ctx, cfg_b.metric)
    rng = np.random.default_rng(sample_seed)
    rows_sampled = min(rows, ROW_CAP)
    cols_sampled = min(n, COL_CAP)
    row_idx = np.sort(rng.choice(rows, size=rows_sampled, replace=False))
    taus = []
    for r in row_idx:
        if cols_sampled < n:
            col_idx = np.sort(rng.choice(n, size=cols_sampled, replace=False))
            taus.append(_row_tau(scores_a[r, col_idx], scores_b[r, col_idx]))
        else:
            taus.append(_row_tau(scores_a[r], scores_b[r]))
    loss_a = layer_loss(w2, pruned_a, ctx.x)
    loss_b = layer_loss(w2, pruned_b, ctx.x)
    return CompareReport(
        method_a=_method_label(cfg_a), method_b=_method_label(cfg_b),
        mask_overlap=overlap, rank_correlation=float(np.mean(taus)),
        loss_a=loss_a, loss_b=loss_b, loss_delta=loss_a - loss_b,
        rows_sampled=rows_sampled, cols_sampled=cols_sampled,
        sample_seed=sample_seed)
