"""Saliency metrics for one-shot weight pruning.

The central quantity is the contribution score of a single weight w_q under
a row of calibration activations x:

    L_q = 0.5 * w_q^2 / (1 - x_q^2 / S),        S = sum_i x_i^2

which is a Hessian-free approximation of the exact leave-one-out loss
0.5 * w_q^2 / (H^-1)_qq for the dampened curvature H = 2 x x^T + (2 S / n) I.
Because H is a rank-one update of a scaled identity, (H^-1)_qq also has a
closed form; both the closed form and a brute-force solve are provided as
oracles so the cheap approximation can be audited, along with the classical
magnitude and activation-weighted (|w| * |x_j|) baselines.

Everything here is computed in float64 regardless of the storage dtype of
the weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from swiftprune.errors import DataError, DimensionError, DomainError

# A scoring denominator at or below this is treated as ill-posed: the score
# becomes +inf ("never prune") instead of exploding or flipping sign.
EPS_DEN = 1e-12

# Relative floor for the running activation energy S when weight energy is
# subtracted during streaming pruning (see swiftprune.ewma).
EPS_S_REL = 1e-12

# Largest n accepted by the brute-force Hessian oracles.
ORACLE_SIZE_CAP = 256

METRICS = ("swiftprune", "exact", "magnitude", "wanda")


class ContributionScore(NamedTuple):
    value: float
    well_posed: bool


@dataclass(frozen=True, eq=False)
class RowContext:
    """Per-layer calibration summary shared by every row of a weight matrix.

    x is the pooled activation vector (one value per input feature), s0 the
    total activation energy sum(x**2) at initialization.
    """

    x: np.ndarray
    x_sq: np.ndarray = field(repr=False)
    s0: float
    n: int

    @classmethod
    def from_calibration(cls, calib: np.ndarray) -> "RowContext":
        """Build a context from a single activation vector (n,) or a batch
        (B, n). A batch is pooled per column by root mean square, so the
        resulting S matches the pooled second moment of the batch."""
        a = np.asarray(calib, dtype=np.float64)
        if a.ndim == 2:
            x = np.sqrt(np.mean(a * a, axis=0))
        elif a.ndim == 1:
            x = a.copy()
        else:
            raise DimensionError(f"calibration must be 1-D or 2-D, got {a.ndim}-D")
        if x.size == 0:
            raise DimensionError("calibration vector is empty")
        if not np.all(np.isfinite(x)):
            raise DataError("calibration contains non-finite values")
        x_sq = x * x
        s0 = float(np.sum(x_sq))
        if not s0 > 0.0:
            raise DomainError("calibration energy S must be positive")
        x.setflags(write=False)
        x_sq.setflags(write=False)
        return cls(x=x, x_sq=x_sq, s0=s0, n=int(x.size))


def contribution(w: float, x: float, s: float, eps_den: float = EPS_DEN) -> ContributionScore:
    """Hessian-free contribution score of a single weight.

    Returns (+inf, False) when the denominator 1 - x^2/s falls to eps_den or
    below; such a weight is never pruned and trackers skip the sample.
    """
    if not s > 0.0:
        raise DomainError(f"S must be positive, got {s}")
    den = 1.0 - (x * x) / s
    if den > eps_den:
        return ContributionScore(0.5 * w * w / den, True)
    return ContributionScore(float("inf"), False)


def hessian_matrix(ctx: RowContext) -> np.ndarray:
    """Dampened curvature H = 2 x x^T + (2 S / n) I, materialized densely."""
    h = 2.0 * np.outer(ctx.x, ctx.x)
    h[np.diag_indices(ctx.n)] += 2.0 * ctx.s0 / ctx.n
    return h


def hqq_inv_brute(ctx: RowContext, q: int, size_cap: int = ORACLE_SIZE_CAP) -> float:
    """(H^-1)_qq by dense linear solve. Oracle; O(n^3)."""
    if not 0 <= q < ctx.n:
        raise DimensionError(f"q={q} out of range for n={ctx.n}")
    if ctx.n > size_cap:
        raise DomainError(f"brute oracle capped at n={size_cap}, got {ctx.n}")
    e_q = np.zeros(ctx.n)
    e_q[q] = 1.0
    return float(np.linalg.solve(hessian_matrix(ctx), e_q)[q])


def hqq_inv_closed(ctx: RowContext, q: int) -> float:
    """(H^-1)_qq in closed form.

    H is a rank-one update of (2 S / n) I, so with gamma = S / n:

        (H^-1)_qq = (gamma + S - x_q^2) / ((2 S / n) * (gamma + S))

    Exact up to rounding; O(1).
    """
    if not 0 <= q < ctx.n:
        raise DimensionError(f"q={q} out of range for n={ctx.n}")
    s = ctx.s0
    gamma = s / ctx.n
    return (gamma + s - ctx.x_sq[q]) / ((2.0 * s / ctx.n) * (gamma + s))


def exact_contribution(w: float, ctx: RowContext, q: int) -> float:
    """Exact leave-one-out score 0.5 * w^2 / (H^-1)_qq."""
    return 0.5 * w * w / hqq_inv_closed(ctx, q)


def approximation_deviation(ctx: RowContext, q: int) -> float:
    """|r - 1| where r compares the closed-form (H^-1)_qq against the
    separable approximation (1 - x_q^2/S) * n / (2 S) that the streaming
    score relies on.

    The ratio collapses algebraically to 1 + x_q^2 / ((n+1) (S - x_q^2)),
    which is what gets evaluated here: forming the two near-equal terms and
    subtracting would wipe out the small deviations this function exists to
    report."""
    if not 0 <= q < ctx.n:
        raise DimensionError(f"q={q} out of range for n={ctx.n}")
    s = ctx.s0
    xq2 = float(ctx.x_sq[q])
    if not s > xq2:
        raise DomainError("deviation undefined when x_q^2 >= S")
    return xq2 / ((ctx.n + 1) * (s - xq2))


def magnitude_score(w: float) -> float:
    """|w|: the classical magnitude saliency of one weight."""
    return abs(float(w))


def wanda_score(w: float, x_col_norm: float) -> float:
    """|w| * ||X_j||_2: magnitude weighted by the column activation norm."""
    if x_col_norm < 0.0:
        raise DomainError(f"column norm must be non-negative, got {x_col_norm}")
    return abs(float(w)) * float(x_col_norm)


def magnitude_scores(w: np.ndarray) -> np.ndarray:
    """|w| elementwise, float64."""
    return np.abs(np.asarray(w, dtype=np.float64))


def wanda_scores(w: np.ndarray, ctx: RowContext) -> np.ndarray:
    """|w_ij| * |x_j|: magnitude weighted by per-column activation norm."""
    w64 = np.asarray(w, dtype=np.float64)
    if w64.shape[-1] != ctx.n:
        raise DimensionError(
            f"weights have {w64.shape[-1]} columns, context has {ctx.n}")
    return np.abs(w64) * np.abs(ctx.x)


def score_matrix(w: np.ndarray, ctx: RowContext, metric: str = "swiftprune") -> np.ndarray:
    """Dense (rows, n) float64 score array for a whole weight matrix.

    swiftprune scores use the initial energy S = s0 (no streaming update);
    ill-posed entries carry the +inf sentinel.
    """
    w64 = np.atleast_2d(np.asarray(w, dtype=np.float64))
    if w64.shape[1] != ctx.n:
        raise DimensionError(
            f"weights have {w64.shape[1]} columns, context has {ctx.n}")
    if metric == "swiftprune":
        den = 1.0 - ctx.x_sq / ctx.s0
        with np.errstate(divide="ignore", invalid="ignore"):
            scores = 0.5 * w64 * w64 / den
        return np.where(den > EPS_DEN, scores, np.inf)
    if metric == "exact":
        gamma = ctx.s0 / ctx.n
        inv_diag = (gamma + ctx.s0 - ctx.x_sq) / ((2.0 * ctx.s0 / ctx.n) * (gamma + ctx.s0))
        return 0.5 * w64 * w64 / inv_diag
    if metric == "magnitude":
        return magnitude_scores(w64)
    if metric == "wanda":
        return wanda_scores(w64, ctx)
    raise DomainError(f"unknown metric: {metric!r}")


def row_loss(w_row: np.ndarray, w_pruned: np.ndarray, x: np.ndarray) -> float:
    """|<w - w_pruned, x>|: first-order output perturbation of one row."""
    a = np.asarray(w_row, dtype=np.float64)
    b = np.asarray(w_pruned, dtype=np.float64)
    xv = np.asarray(x, dtype=np.float64)
    if a.shape != b.shape or a.shape != xv.shape:
        raise DimensionError(
            f"row_loss shapes disagree: {a.shape}, {b.shape}, {xv.shape}")
    return float(abs(np.dot(a - b, xv)))


def layer_loss(w: np.ndarray, w_pruned: np.ndarray, x: np.ndarray) -> float:
    """Sum of row_loss over all rows of a matrix."""
    a = np.atleast_2d(np.asarray(w, dtype=np.float64))
    b = np.atleast_2d(np.asarray(w_pruned, dtype=np.float64))
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(np.abs((a - b) @ np.asarray(x, dtype=np.float64))))
