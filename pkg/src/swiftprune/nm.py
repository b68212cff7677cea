"""N:M structured sparsity: keep the N highest-scoring weights in every
aligned group of M along the row.

Selection order inside a group is deterministic: the (M - N) smallest scores
are pruned by repeated first-minimum extraction, so ties prune the lower
column index first - identical to a stable ascending argsort. A 2:4 group
therefore costs exactly 5 score comparisons (3 to find the first minimum
among 4, 2 for the second among the remaining 3).

Rows whose length is not a multiple of M keep their trailing partial group
dense; the run report counts such groups. The packed representation
(PackedNM / .swnm files) stores kept values plus one byte per value giving
its offset inside the group, which is enough to reconstruct the dense row or
run a matvec directly on the packed form.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from swiftprune import _kernels
from swiftprune.errors import ConfigError, DimensionError, StructureError
from swiftprune.io import read_packed, write_packed
from swiftprune.metrics import EPS_DEN, EPS_S_REL, RowContext, score_matrix
from swiftprune.reports import PruneReport


class NMPattern(NamedTuple):
    n_keep: int
    m_group: int

    @classmethod
    def parse(cls, text: str) -> "NMPattern":
        n_s, sep, m_s = text.partition(":")
        if not sep:
            raise ConfigError(f"N:M pattern must look like '2:4', got {text!r}")
        try:
            pat = cls(int(n_s), int(m_s))
        except ValueError as exc:
            raise ConfigError(f"bad N:M pattern {text!r}") from exc
        return pat.validate()

    def validate(self) -> "NMPattern":
        if not 0 < self.n_keep < self.m_group:
            raise ConfigError(f"N:M pattern needs 0 < N < M, got {self.n_keep}:{self.m_group}")
        if self.m_group > 255:
            raise ConfigError(f"group size capped at 255, got {self.m_group}")
        return self


def select_nm_group(scores: np.ndarray, pattern: NMPattern) -> tuple[np.ndarray, int]:
    """Reference single-group selection. Returns (keep_indices, comparisons)
    with the kept indices in ascending order; ties keep the higher index
    (the lower one is extracted as minimum first).

    Instrumented to count score-to-score comparisons; used by tests and to
    document the cost model. The kernels implement the same order.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.shape[0] != pattern.m_group:
        raise DimensionError(f"group of shape {s.shape} against pattern {pattern}")
    keep = np.ones(pattern.m_group, dtype=bool)
    comparisons = 0
    for _ in range(pattern.m_group - pattern.n_keep):
        best = -1
        for j in range(pattern.m_group):
            if not keep[j]:
                continue
            if best < 0:
                best = j
                continue
            comparisons += 1
            if s[j] < s[best]:
                best = j
        keep[best] = False
    return np.nonzero(keep)[0], comparisons


def _stream_row_nm(w64_row: np.ndarray, ctx: RowContext, pattern: NMPattern) -> np.ndarray:
    # Ablation path: scores inside each group see the S left over from all
    # previously pruned groups of the same row. Python-only; the default
    # fixed-S path below is the kernel one.
    n = ctx.n
    m = pattern.m_group
    s = ctx.s0
    floor = EPS_S_REL * ctx.s0
    mask = np.ones(n, dtype=np.uint8)
    x_sq = ctx.x_sq
    for base in range(0, n - n % m, m):
        scores = np.empty(m)
        for j in range(m):
            den = 1.0 - x_sq[base + j] / s
            scores[j] = 0.5 * w64_row[base + j] ** 2 / den if den > EPS_DEN else np.inf
        keep_idx, _ = select_nm_group(scores, pattern)
        keep = np.zeros(m, dtype=bool)
        keep[keep_idx] = True
        mask[base:base + m] = keep
        removed = float(np.sum(w64_row[base:base + m][~keep] ** 2))
        s_next = s - removed
        s = floor if s_next <= floor else s_next
    return mask


def prune_matrix_nm(w: np.ndarray, ctx: RowContext, pattern: NMPattern,
                    workers: int = 1, *, metric: str = "swiftprune",
                    streaming: bool = False, backend: str | None = None
                    ) -> tuple[np.ndarray, np.ndarray, PruneReport]:
    """Apply N:M selection to every aligned group of every row."""
    from swiftprune.ewma import _chunk_bounds  # shared row partitioner

    pattern.validate()
    kern = _kernels.get_backend(backend)
    w2 = np.atleast_2d(np.asarray(w))
    if w2.shape[1] != ctx.n:
        raise DimensionError(f"weights have {w2.shape[1]} columns, context has {ctx.n}")
    rows, n = w2.shape
    m = pattern.m_group
    full = n - n % m
    mask_u8 = np.ones((rows, n), dtype=np.uint8)

    t0 = time.perf_counter()
    used_workers = 1
    if streaming:
        w64 = np.ascontiguousarray(w2, dtype=np.float64)
        for r in range(rows):
            mask_u8[r] = _stream_row_nm(w64[r], ctx, pattern)
    elif full:
        scores = np.ascontiguousarray(score_matrix(w2, ctx, metric)[:, :full])
        # the kernels want contiguous rows; a column-sliced view is not
        target = mask_u8 if full == n else np.ones((rows, full), dtype=np.uint8)
        bounds = _chunk_bounds(rows, workers)
        used_workers = len(bounds)
        if len(bounds) == 1:
            kern.nm_select_block(scores, pattern.n_keep, m, target)
        else:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
                list(pool.map(
                    lambda b: kern.nm_select_block(
                        scores[b[0]:b[1]], pattern.n_keep, m, target[b[0]:b[1]]),
                    bounds))
        if target is not mask_u8:
            mask_u8[:, :full] = target
    wall = time.perf_counter() - t0

    mask = mask_u8.view(bool)
    pruned = np.where(mask, w2, w2.dtype.type(0))
    pruned_per_row = n - mask.sum(axis=1)
    per_row = pruned_per_row / n
    report = PruneReport(
        mode="nm", metric=metric, rows=rows, cols=n,
        global_sparsity=float(pruned_per_row.sum()) / (rows * n),
        row_sparsity_min=float(per_row.min()),
        row_sparsity_mean=float(per_row.mean()),
        row_sparsity_max=float(per_row.max()),
        partial_nm_groups=rows if n % m else 0,
        wall_time_s=wall,
        backend=kern.BACKEND if not streaming else "python",
        workers=used_workers,
        nm_n=pattern.n_keep, nm_m=pattern.m_group,
        nm_streaming=streaming,
        per_row_sparsity=per_row,
    )
    return pruned, mask, report


@dataclass(frozen=True)
class PackedNM:
    """Dense-free N:M representation: kept values plus per-value group offsets."""

    values: np.ndarray        # (rows, groups, n_keep) kept values, group-major
    group_indices: np.ndarray  # uint8, same shape, offset of each value in its group
    shape: tuple[int, int]
    pattern: NMPattern

    @property
    def kept_per_row(self) -> int:
        return (self.shape[1] // self.pattern.m_group) * self.pattern.n_keep


def pack_nm(pruned: np.ndarray, mask: np.ndarray, pattern: NMPattern) -> PackedNM:
    """Compress a pruned matrix whose mask is exactly N:M on every group."""
    pattern.validate()
    p = np.atleast_2d(np.asarray(pruned))
    mk = np.atleast_2d(np.asarray(mask, dtype=bool))
    if p.shape != mk.shape:
        raise DimensionError(f"pruned {p.shape} and mask {mk.shape} disagree")
    rows, cols = p.shape
    m, keep = pattern.m_group, pattern.n_keep
    if cols % m:
        raise StructureError(f"cols={cols} not divisible by group size {m}")
    groups = mk.reshape(rows, cols // m, m)
    counts = groups.sum(axis=2)
    if not (counts == keep).all():
        bad = np.argwhere(counts != keep)[0]
        raise StructureError(
            f"group (row {bad[0]}, group {bad[1]}) keeps {counts[bad[0], bad[1]]} "
            f"values, pattern wants {keep}")
    offsets = np.nonzero(groups)[2].astype(np.uint8)  # row-major: ascending per group
    values = p[mk]
    return PackedNM(values=values.reshape(rows, cols // m, keep),
                    group_indices=offsets.reshape(rows, cols // m, keep),
                    shape=(rows, cols), pattern=pattern)


def unpack_nm(packed: PackedNM) -> tuple[np.ndarray, np.ndarray]:
    """Reconstruct (dense, mask) from the packed form."""
    rows, cols = packed.shape
    m, keep = packed.pattern.m_group, packed.pattern.n_keep
    groups = cols // m
    idx = packed.group_indices.reshape(rows, groups, keep).astype(np.int64)
    col = (np.arange(groups) * m)[None, :, None] + idx  # (rows, groups, keep)
    dense = np.zeros((rows, cols), dtype=packed.values.dtype)
    rows_idx = np.repeat(np.arange(rows), groups * keep)
    dense[rows_idx, col.ravel()] = packed.values.ravel()
    mask = np.zeros((rows, cols), dtype=bool)
    mask[rows_idx, col.ravel()] = True
    return dense, mask


def masked_matvec(packed: PackedNM, v: np.ndarray) -> np.ndarray:
    """y = W_pruned @ v computed directly on the packed representation."""
    rows, cols = packed.shape
    vv = np.asarray(v, dtype=np.float64)
    if vv.shape != (cols,):
        raise DimensionError(f"vector of shape {vv.shape} against cols={cols}")
    m, keep = packed.pattern.m_group, packed.pattern.n_keep
    groups = cols // m
    idx = packed.group_indices.reshape(rows, groups * keep).astype(np.int64)
    base = np.repeat(np.arange(groups) * m, keep)[None, :]
    gathered = vv[base + idx]  # (rows, groups*keep)
    vals = packed.values.reshape(rows, groups * keep).astype(np.float64)
    return np.einsum("ij,ij->i", vals, gathered)


def write_packed_nm(packed: PackedNM, path: str) -> None:
    write_packed(packed.values, packed.group_indices, packed.shape,
                 packed.pattern.n_keep, packed.pattern.m_group, path)


def read_packed_nm(path: str) -> PackedNM:
    values, indices, shape, n_keep, m_group = read_packed(path)
    grouped = (shape[0], shape[1] // m_group, n_keep)
    return PackedNM(values=values.reshape(grouped),
                    group_indices=indices.reshape(grouped), shape=shape,
                    pattern=NMPattern(n_keep, m_group))
