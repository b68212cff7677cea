"""Scaling benchmark: streaming EWMA pruning vs sort-based top-k vs the
brute-force exact-score oracle.

Timings cover pruning compute only (each pruner's own wall clock), exclude
file I/O, and pin workers=1 so modes are comparable. A fitted log-log slope
per (backend, mode) summarizes how wall time scales with row length: the
streaming pruner is expected near exponent 1, top-k near 1 with a larger
constant (n log n sorting), the oracle near 3.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from swiftprune import _kernels
from swiftprune.errors import ConfigError
from swiftprune.ewma import EwmaParams, prune_matrix
from swiftprune.metrics import RowContext
from swiftprune.select import oracle_prune, topk_prune
from swiftprune.synth import synth_fixture

BENCH_HEADER = "backend,mode,n,rows,reps,seconds"


class BenchRecord(NamedTuple):
    backend: str
    mode: str
    n: int
    rows: int
    reps: int
    seconds: float


def _resolve_backends(backend: str) -> list[str]:
    if backend == "both":
        return list(_kernels.available_backends())
    if backend == "active":
        return [_kernels.backend_name()]
    if backend in ("compiled", "python"):
        if backend not in _kernels.available_backends():
            raise ConfigError(f"backend {backend!r} is not available")
        return [backend]
    raise ConfigError(f"unknown backend {backend!r}")


def run_bench(sizes=(1024, 2048, 4096, 8192), reps: int = 3, rows: int = 64,
              oracle_sizes=(32, 64, 128, 256), oracle_rows: int = 8,
              backend: str = "active", seed: int = 42
              ) -> tuple[list[BenchRecord], dict[tuple[str, str], float]]:
    """Run the benchmark grid. Returns (records, fitted exponents)."""
    if list(sizes) != sorted(sizes):
        raise ConfigError("sizes must be ascending")
    backends = _resolve_backends(backend)
    params = EwmaParams(la=0.5)
    records = []
    for name in backends:
        for n in sizes:
            w, x = synth_fixture(rows, n, seed)
            ctx = RowContext.from_calibration(x)
            t_ewma = min(
                prune_matrix(w, ctx, params, workers=1, backend=name)[2].wall_time_s
                for _ in range(reps))
            records.append(BenchRecord(name, "ewma", n, rows, reps, t_ewma))
            t_topk = min(
                topk_prune(w, ctx, 0.5)[2].wall_time_s for _ in range(reps))
            records.append(BenchRecord(name, "topk", n, rows, reps, t_topk))
        for n in oracle_sizes:
            w, x = synth_fixture(oracle_rows, n, seed)
            ctx = RowContext.from_calibration(x)
            t_oracle = min(
                oracle_prune(w, ctx, 0.5, backend=name)[2].wall_time_s
                for _ in range(reps))
            records.append(BenchRecord(name, "oracle", n, oracle_rows, reps, t_oracle))
    return records, fit_exponents(records)


def fit_exponents(records: list[BenchRecord]) -> dict[tuple[str, str], float]:
    """Log-log slope of seconds against n for every (backend, mode) with at
    least two sizes."""
    groups: dict[tuple[str, str], list[BenchRecord]] = {}
    for rec in records:
        groups.setdefault((rec.backend, rec.mode), []).append(rec)
    out = {}
    for key, recs in groups.items():
        if len({r.n for r in recs}) < 2:
            continue
        ns = np.log([r.n for r in recs])
        ts = np.log([max(r.seconds, 1e-9) for r in recs])
        out[key] = float(np.polyfit(ns, ts, 1)[0])
    return out


def write_bench_csv(records: list[BenchRecord],
                    exponents: dict[tuple[str, str], float], path: str) -> None:
    with open(path, "w") as fh:
        fh.write(BENCH_HEADER + "\n")
        for rec in records:
            fh.write(f"{rec.backend},{rec.mode},{rec.n},{rec.rows},{rec.reps},"
                     f"{rec.seconds:.9g}\n")
        for (name, mode), expo in sorted(exponents.items()):
            fh.write(f"# exponent,{name},{mode},{expo:.6g}\n")


def read_bench_csv(path: str
                   ) -> tuple[list[BenchRecord], dict[tuple[str, str], float]]:
    records = []
    exponents = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != BENCH_HEADER:
            from swiftprune.errors import FormatError
            raise FormatError(f"{path}: unexpected bench header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                _, name, mode, expo = line[1:].strip().split(",")
                exponents[(name.strip(), mode)] = float(expo)
                continue
            name, mode, n, rows, reps, seconds = line.split(",")
            records.append(BenchRecord(name, mode, int(n), int(rows), int(reps),
                                       float(seconds)))
    return records, exponents
