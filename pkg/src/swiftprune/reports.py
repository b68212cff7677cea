"""Flat key=value run reports.

Reports are small and meant to be diffable / greppable, so they use the same
line format as config files. Floats are written with repr (lossless round
trip); optional fields are simply omitted. The full per-row sparsity vector
is kept in memory on the report object but serialized as min/mean/max summary
fields - masks already persist the full information.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class PruneReport:
    mode: str
    metric: str
    rows: int
    cols: int
    global_sparsity: float
    row_sparsity_min: float
    row_sparsity_mean: float
    row_sparsity_max: float
    den_guard_count: int = 0
    s_underflow_rows: int = 0
    partial_nm_groups: int = 0
    wall_time_s: float = 0.0
    backend: str = "python"
    workers: int = 1
    alpha: float | None = None
    beta: float | None = None
    la: float | None = None
    target_sparsity: float | None = None
    nm_n: int | None = None
    nm_m: int | None = None
    seed: int | None = None
    freeze_s: bool | None = None
    nm_streaming: bool | None = None
    per_row_sparsity: np.ndarray | None = field(default=None, repr=False, compare=False)

    _UNSERIALIZED = ("per_row_sparsity",)

    def to_lines(self) -> list[str]:
        return [f"{f.name}={_fmt(getattr(self, f.name))}"
                for f in fields(self)
                if f.name not in self._UNSERIALIZED and getattr(self, f.name) is not None]

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.to_lines()) + "\n")


@dataclass
class CompareReport:
    method_a: str
    method_b: str
    mask_overlap: float
    rank_correlation: float
    loss_a: float
    loss_b: float
    loss_delta: float
    rows_sampled: int
    cols_sampled: int
    sample_seed: int

    def to_lines(self) -> list[str]:
        return [f"{f.name}={_fmt(getattr(self, f.name))}" for f in fields(self)]

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.to_lines()) + "\n")


def read_report(path: str) -> dict[str, str]:
    """Parse any key=value report back into a dict of strings."""
    from swiftprune.io import read_key_values

    return dict(read_key_values(path))
