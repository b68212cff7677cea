"""Pure-Python kernel fallback.

Mirrors swiftprune._kernels._core function-for-function. Both backends must
produce bit-identical outputs: same operation order, plain IEEE multiply /
divide / add (the compiled extension is built with -ffp-contract=off so no
fused multiply-adds sneak in). Keep the scalar loops here in lockstep with
the .pyx file when editing either.

Conventions shared by both backends:
  * masks are uint8 buffers, 1 = kept, 0 = pruned
  * stats rows are int64 [pruned, den_guards, s_clamped]
  * block kernels return (bad_row, bad_step); (-1, 0) means success, else
    the row index and 1-based step where a non-finite score aborted
  * a score equal to +inf is the denominator-guard sentinel: the weight is
    kept and the est/dev tracker is not updated; NaN or -inf aborts
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

BACKEND = "python"

_INF = float("inf")


def _ewma_row(w, x_sq, n, s0, alpha, beta, la, eps_den, eps_floor, mask, l_out, est_out, dev_out):
    """Stream one row left to right with live S update. Returns
    (pruned, guards, clamped, err_step)."""
    s = s0
    est = 0.0
    dev = 0.0
    started = False
    pruned = 0
    guards = 0
    clamped = 0
    for i in range(n):
        wi = w[i]
        den = 1.0 - x_sq[i] / s
        if den > eps_den:
            score = 0.5 * wi * wi / den
            if not math.isfinite(score):
                return pruned, guards, clamped, i + 1
            if not started:
                est = score
                started = True
            if score < est - la * dev:
                mask[i] = 0
                pruned += 1
                s_next = s - wi * wi
                if s_next <= eps_floor:
                    s = eps_floor
                    clamped = 1
                else:
                    s = s_next
            else:
                mask[i] = 1
            est = est + alpha * (score - est)
            dev = dev + beta * (abs(est - score) - dev)
        else:
            guards += 1
            mask[i] = 1
            score = _INF
        if l_out is not None:
            l_out[i] = score
            est_out[i] = est
            dev_out[i] = dev
    return pruned, guards, clamped, 0


def ewma_prune_block(w, x_sq, s0, alpha, beta, la, eps_den, eps_floor, mask_out, stats_out):
    rows, n = w.shape
    x_list = x_sq.tolist()
    for r in range(rows):
        row_mask = bytearray(n)
        pruned, guards, clamped, err = _ewma_row(
            w[r].tolist(), x_list, n, s0, alpha, beta, la, eps_den, eps_floor,
            row_mask, None, None, None,
        )
        mask_out[r] = np.frombuffer(bytes(row_mask), dtype=np.uint8)
        stats_out[r, 0] = pruned
        stats_out[r, 1] = guards
        stats_out[r, 2] = clamped
        if err:
            return r, err
    return -1, 0


def ewma_trace_row(w_row, x_sq, s0, alpha, beta, la, eps_den, eps_floor,
                   mask_out, l_out, est_out, dev_out):
    n = w_row.shape[0]
    row_mask = bytearray(n)
    l_l = [0.0] * n
    e_l = [0.0] * n
    d_l = [0.0] * n
    pruned, guards, clamped, err = _ewma_row(
        w_row.tolist(), x_sq.tolist(), n, s0, alpha, beta, la, eps_den, eps_floor,
        row_mask, l_l, e_l, d_l,
    )
    mask_out[:] = np.frombuffer(bytes(row_mask), dtype=np.uint8)
    l_out[:] = l_l
    est_out[:] = e_l
    dev_out[:] = d_l
    return pruned, guards, clamped, err


def _select_row(scores, n, alpha, beta, la, mask, est_out, dev_out):
    """Stream one row of precomputed scores (no S feedback). Returns
    (pruned, guards, err_step)."""
    est = 0.0
    dev = 0.0
    started = False
    pruned = 0
    guards = 0
    for i in range(n):
        score = scores[i]
        if score == _INF:
            guards += 1
            mask[i] = 1
        elif not math.isfinite(score):
            return pruned, guards, i + 1
        else:
            if not started:
                est = score
                started = True
            if score < est - la * dev:
                mask[i] = 0
                pruned += 1
            else:
                mask[i] = 1
            est = est + alpha * (score - est)
            dev = dev + beta * (abs(est - score) - dev)
        if est_out is not None:
            est_out[i] = est
            dev_out[i] = dev
    return pruned, guards, 0


def ewma_select_block(scores, alpha, beta, la, mask_out, stats_out):
    rows, n = scores.shape
    for r in range(rows):
        row_mask = bytearray(n)
        pruned, guards, err = _select_row(scores[r].tolist(), n, alpha, beta, la,
                                          row_mask, None, None)
        mask_out[r] = np.frombuffer(bytes(row_mask), dtype=np.uint8)
        stats_out[r, 0] = pruned
        stats_out[r, 1] = guards
        stats_out[r, 2] = 0
        if err:
            return r, err
    return -1, 0


def ewma_select_trace_row(scores, alpha, beta, la, mask_out, est_out, dev_out):
    n = scores.shape[0]
    row_mask = bytearray(n)
    e_l = [0.0] * n
    d_l = [0.0] * n
    pruned, guards, err = _select_row(scores.tolist(), n, alpha, beta, la, row_mask, e_l, d_l)
    mask_out[:] = np.frombuffer(bytes(row_mask), dtype=np.uint8)
    est_out[:] = e_l
    dev_out[:] = d_l
    return pruned, guards, err


def nm_select_block(scores, n_keep, m_group, mask_out):
    """Keep the n_keep largest scores in every aligned group of m_group.

    Ties prune the lower index first, which is exactly the order a stable
    ascending argsort yields, so the vectorized form below matches the
    compiled backend's repeated first-minimum extraction bit for bit.
    """
    rows, n = scores.shape
    groups = n // m_group
    s3 = scores.reshape(rows, groups, m_group)
    order = np.argsort(s3, axis=2, kind="stable")
    drop = order[:, :, : m_group - n_keep]
    m3 = np.ones((rows, groups, m_group), dtype=np.uint8)
    np.put_along_axis(m3, drop, 0, axis=2)
    mask_out[:] = m3.reshape(rows, n)


def hessian_inv_diag(x, s0, h_scratch, y_scratch, diag_out):
    """diag(H^-1) for H = 2 x x^T + (2 s0 / n) I via Cholesky. Returns 0,
    or the 1-based pivot index if the factorization loses positivity."""
    n = x.shape[0]
    h = 2.0 * np.outer(x, x)
    h[np.diag_indices(n)] += 2.0 * s0 / n
    try:
        lower = np.linalg.cholesky(h)
    except np.linalg.LinAlgError:
        return 1
    inv_l = scipy.linalg.solve_triangular(lower, np.eye(n), lower=True)
    diag_out[:] = np.einsum("ij,ij->j", inv_l, inv_l)
    return 0


def oracle_prune_block(w, x, s0, k_prune, h_scratch, y_scratch, diag_scratch,
                       score_scratch, mask_out):
    """Exact-score pruner: drop the k_prune smallest 0.5 w^2 / (H^-1)_qq per
    row. The Hessian is re-factorized for every row on purpose - the point
    of this kernel is to model the per-row cost of exact scoring."""
    rows, n = w.shape
    for r in range(rows):
        err = hessian_inv_diag(x, s0, h_scratch, y_scratch, diag_scratch)
        if err:
            return r, err
        scores = 0.5 * w[r] * w[r] / diag_scratch
        order = np.argsort(scores, kind="stable")
        mask_out[r] = 1
        mask_out[r, order[:k_prune]] = 0
    return -1, 0
