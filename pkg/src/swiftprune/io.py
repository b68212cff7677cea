"""File formats: weight tensors, bit masks, packed N:M tensors, trace CSVs
and run configuration.

Tensor (.swpt), little-endian throughout:

    magic   4 bytes  b"SWPT"
    version u32      currently 1
    dtype   u8       0 = float32, 1 = float64
    ndim    u8       1 or 2
    dims    ndim*u64
    payload dims-product * itemsize bytes, row-major

Mask (.mask): headerless packed bits in row-major element order, LSB first
within each byte, final byte zero-padded. The shape travels with the tensor
the mask annotates, so reading requires (rows, cols).

Packed N:M tensor (.swnm):

    magic   4 bytes  b"SWNM"
    version u32      currently 1
    dtype   u8       0 = float32, 1 = float64
    n_keep  u8
    m_group u8
    idxbits u8       bits per stored group index; always 8 (byte-aligned)
    rows    u64
    cols    u64      must be divisible by m_group
    values  rows * (cols/m_group) * n_keep floats, kept values in ascending
            column order per group
    indices one u8 per kept value: offset of the value inside its group,
            strictly increasing within each group

Trace CSV: header "row,i,L,est,dev,pruned"; reals printed with 17 significant
digits (lossless float64 round trip), booleans as 0/1.

Config: flat "key=value" lines; blank lines and '#' comments allowed;
unknown or duplicate keys are errors.
"""

from __future__ import annotations

import dataclasses
import math
import struct
from typing import NamedTuple

import numpy as np

from swiftprune.errors import (
    ConfigError,
    DataError,
    DimensionError,
    FormatError,
    StructureError,
    TruncationError,
)

TENSOR_MAGIC = b"SWPT"
PACKED_MAGIC = b"SWNM"
FORMAT_VERSION = 1
INDEX_BITS = 8  # group indices are stored byte-aligned

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_TAGS = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}

MODES = ("ewma", "topk", "nm", "magnitude-threshold")


# ---------------------------------------------------------------------------
# dense tensors

def write_matrix(arr: np.ndarray, path: str) -> None:
    """Write a 1-D or 2-D float32/float64 array. Refuses non-finite data so
    files on disk are always loadable."""
    a = np.ascontiguousarray(arr)
    if a.dtype not in _DTYPE_TAGS:
        raise FormatError(f"unsupported dtype for tensor file: {a.dtype}")
    if a.ndim not in (1, 2):
        raise DimensionError(f"tensor files hold 1-D or 2-D arrays, got {a.ndim}-D")
    if not np.all(np.isfinite(a)):
        raise DataError("refusing to write non-finite values")
    header = TENSOR_MAGIC + struct.pack("<IBB", FORMAT_VERSION, _DTYPE_TAGS[a.dtype], a.ndim)
    header += struct.pack(f"<{a.ndim}Q", *a.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(a.astype(a.dtype.newbyteorder("<"), copy=False).tobytes())


def read_matrix(path: str) -> np.ndarray:
    """Read a tensor file; returns a fresh writable array in its stored
    dtype (float32 or float64)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 10:
        raise TruncationError(f"{path}: file shorter than fixed header")
    if raw[:4] != TENSOR_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    version, dtype_code, ndim = struct.unpack_from("<IBB", raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype_code not in _DTYPE_CODES:
        raise FormatError(f"{path}: unknown dtype code {dtype_code}")
    if ndim not in (1, 2):
        raise FormatError(f"{path}: ndim must be 1 or 2, got {ndim}")
    offset = 10
    if len(raw) < offset + 8 * ndim:
        raise TruncationError(f"{path}: file ends inside the dims header")
    dims = struct.unpack_from(f"<{ndim}Q", raw, offset)
    offset += 8 * ndim
    dtype = _DTYPE_CODES[dtype_code]
    count = math.prod(dims)
    expected = count * dtype.itemsize
    payload = raw[offset:]
    if len(payload) < expected:
        raise TruncationError(
            f"{path}: payload has {len(payload)} bytes, header declares {expected}")
    if len(payload) > expected:
        raise FormatError(f"{path}: {len(payload) - expected} trailing bytes")
    arr = np.frombuffer(payload, dtype=dtype, count=count).reshape(dims)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: payload contains non-finite values")
    out = arr.astype(dtype.newbyteorder("="))  # owned, writable, native order
    return out


def read_vector(path: str) -> np.ndarray:
    """Read a tensor file that must contain a 1-D array."""
    arr = read_matrix(path)
    if arr.ndim != 1:
        raise DimensionError(f"{path}: expected a 1-D tensor, got shape {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# masks

def write_mask(mask: np.ndarray, path: str) -> None:
    m = np.ascontiguousarray(mask)
    if m.dtype != np.bool_:
        if not np.isin(m, (0, 1)).all():
            raise DataError("mask entries must be 0/1")
        m = m.astype(bool)
    packed = np.packbits(m.ravel(), bitorder="little")
    with open(path, "wb") as fh:
        fh.write(packed.tobytes())


def read_mask(path: str, rows: int, cols: int) -> np.ndarray:
    """Read a packed mask of known shape; True = kept."""
    with open(path, "rb") as fh:
        raw = fh.read()
    count = rows * cols
    expected = (count + 7) // 8
    if len(raw) < expected:
        raise TruncationError(f"{path}: {len(raw)} bytes, need {expected} for {rows}x{cols}")
    if len(raw) > expected:
        raise FormatError(f"{path}: {len(raw) - expected} trailing bytes")
    buf = np.frombuffer(raw, dtype=np.uint8)
    bits = np.unpackbits(buf, bitorder="little")
    if count % 8 and bits[count:].any():
        raise FormatError(f"{path}: nonzero padding bits in final byte")
    return bits[:count].reshape(rows, cols).astype(bool)


def mask_sparsity(mask: np.ndarray) -> float:
    """Fraction of entries pruned (False)."""
    m = np.asarray(mask, dtype=bool)
    return float(m.size - np.count_nonzero(m)) / m.size


# ---------------------------------------------------------------------------
# packed N:M tensors

def write_packed(values: np.ndarray, indices: np.ndarray, shape: tuple[int, int],
                 n_keep: int, m_group: int, path: str) -> None:
    rows, cols = shape
    values = np.ascontiguousarray(values)
    if values.dtype not in _DTYPE_TAGS:
        raise FormatError(f"unsupported dtype for packed file: {values.dtype}")
    groups = cols // m_group
    kept = rows * groups * n_keep
    if cols % m_group:
        raise StructureError(f"cols={cols} not divisible by group size {m_group}")
    if values.size != kept or indices.size != kept:
        raise StructureError(
            f"packed payload size {values.size}/{indices.size}, expected {kept}")
    header = PACKED_MAGIC + struct.pack(
        "<IBBBBQQ", FORMAT_VERSION, _DTYPE_TAGS[values.dtype], n_keep, m_group,
        INDEX_BITS, rows, cols)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(values.astype(values.dtype.newbyteorder("<"), copy=False).tobytes())
        fh.write(np.ascontiguousarray(indices, dtype=np.uint8).tobytes())


def read_packed(path: str):
    """Read a packed N:M file. Returns (values, indices, shape, n_keep,
    m_group); validation re-checks the structural N:M invariants."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 28:
        raise TruncationError(f"{path}: file shorter than fixed header")
    if raw[:4] != PACKED_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    version, dtype_code, n_keep, m_group, idx_bits, rows, cols = struct.unpack_from(
        "<IBBBBQQ", raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype_code not in _DTYPE_CODES:
        raise FormatError(f"{path}: unknown dtype code {dtype_code}")
    if idx_bits != INDEX_BITS:
        raise FormatError(f"{path}: unsupported index width {idx_bits} bits")
    if not 0 < n_keep < m_group:
        raise StructureError(f"{path}: invalid pattern {n_keep}:{m_group}")
    if cols % m_group:
        raise StructureError(f"{path}: cols={cols} not divisible by {m_group}")
    dtype = _DTYPE_CODES[dtype_code]
    kept = rows * (cols // m_group) * n_keep
    offset = 28
    val_bytes = kept * dtype.itemsize
    if len(raw) < offset + val_bytes + kept:
        raise TruncationError(f"{path}: payload truncated")
    if len(raw) > offset + val_bytes + kept:
        raise FormatError(f"{path}: trailing bytes")
    values = np.frombuffer(raw, dtype=dtype, count=kept, offset=offset).astype(
        dtype.newbyteorder("="))
    indices = np.frombuffer(raw, dtype=np.uint8, count=kept, offset=offset + val_bytes).copy()
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: non-finite packed values")
    idx = indices.reshape(rows, cols // m_group, n_keep).astype(np.int64)
    if idx.max(initial=0) >= m_group:
        raise StructureError(f"{path}: group index out of range")
    if n_keep > 1 and not (np.diff(idx, axis=2) > 0).all():
        raise StructureError(f"{path}: group indices not strictly increasing")
    return values, indices, (int(rows), int(cols)), int(n_keep), int(m_group)


# ---------------------------------------------------------------------------
# trace CSV

class TraceRecord(NamedTuple):
    row: int
    i: int
    L: float
    est: float
    dev: float
    pruned: bool


TRACE_HEADER = "row,i,L,est,dev,pruned"


def _check_trace(records) -> None:
    seen = set()
    for rec in records:
        if math.isnan(rec.L) or math.isnan(rec.est) or math.isnan(rec.dev):
            raise DataError(f"trace record {rec.row},{rec.i} contains NaN")
        if rec.dev < 0.0:
            raise DataError(f"trace record {rec.row},{rec.i} has negative dev")
        key = (rec.row, rec.i)
        if key in seen:
            raise DataError(f"duplicate trace key {key}")
        seen.add(key)


def write_trace(records: list[TraceRecord], path: str) -> None:
    _check_trace(records)
    with open(path, "w") as fh:
        fh.write(TRACE_HEADER + "\n")
        for rec in records:
            fh.write(f"{rec.row},{rec.i},{rec.L:.17g},{rec.est:.17g},"
                     f"{rec.dev:.17g},{int(rec.pruned)}\n")


def read_trace(path: str) -> list[TraceRecord]:
    """Parse a trace CSV back into records. Lines starting with '#'
    (the overlay summary series appended by the trace command) are skipped."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise FormatError(f"{path}: missing trace header")
    records = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise FormatError(f"{path}:{ln}: expected 6 fields, got {len(parts)}")
        try:
            rec = TraceRecord(int(parts[0]), int(parts[1]), float(parts[2]),
                              float(parts[3]), float(parts[4]), bool(int(parts[5])))
        except ValueError as exc:
            raise FormatError(f"{path}:{ln}: {exc}") from exc
        if int(parts[5]) not in (0, 1):
            raise FormatError(f"{path}:{ln}: pruned flag must be 0 or 1")
        records.append(rec)
    _check_trace(records)
    return records


def append_trace_summaries(path: str, summaries: dict[str, np.ndarray]) -> None:
    """Append '#'-prefixed summary series (e.g. the running true mean/MAD of
    L) to an existing trace file, one line per series."""
    with open(path, "a") as fh:
        for name, series in summaries.items():
            body = ",".join(f"{float(v):.17g}" for v in np.asarray(series))
            fh.write(f"# {name},{body}\n")


def read_trace_summaries(path: str) -> dict[str, np.ndarray]:
    out = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                continue
            parts = line[1:].strip().split(",")
            out[parts[0]] = np.array([float(v) for v in parts[1:]])
    return out


# ---------------------------------------------------------------------------
# run configuration

@dataclasses.dataclass
class RunConfig:
    """Everything that determines a pruning run (besides the input tensors)."""

    mode: str = "ewma"
    metric: str = "swiftprune"
    alpha: float = 0.125
    beta: float = 0.125
    la: float = 4.0
    target_sparsity: float = 0.5
    nm_n: int = 2
    nm_m: int = 4
    seed: int = 42
    workers: int = 1
    freeze_s: bool = False      # ablation: keep S fixed at s0 during streaming
    nm_streaming: bool = False  # ablation: let N:M scores see streaming S updates

    def validate(self) -> "RunConfig":
        from swiftprune.metrics import METRICS  # local import, no cycle at module load

        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}, got {self.metric!r}")
        self.alpha = float(self.alpha)
        self.beta = float(self.beta)
        self.la = float(self.la)
        self.target_sparsity = float(self.target_sparsity)
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie strictly inside (0, 1), got {v}")
        if not math.isfinite(self.la):
            raise ConfigError(f"la must be a finite float, got {self.la}")
        if not 0.0 <= self.target_sparsity <= 1.0:
            raise ConfigError(f"sparsity must lie in [0, 1], got {self.target_sparsity}")
        if not (isinstance(self.nm_n, int) and isinstance(self.nm_m, int)
                and 0 < self.nm_n < self.nm_m):
            raise ConfigError(f"N:M pattern needs 0 < N < M, got {self.nm_n}:{self.nm_m}")
        if self.nm_m > 255:
            raise ConfigError(f"group size capped at 255 by the packed format, got {self.nm_m}")
        if not (isinstance(self.workers, int) and self.workers >= 1):
            raise ConfigError(f"workers must be a positive integer, got {self.workers}")
        if not isinstance(self.seed, int):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        return self


def _parse_bool(key: str, value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key} must be boolean, got {value!r}")


def read_key_values(path: str) -> list[tuple[str, str]]:
    """Parse flat key=value lines; '#' comments and blank lines allowed."""
    pairs = []
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected key=value, got {raw.strip()!r}")
            key, value = line.split("=", 1)
            pairs.append((key.strip(), value.strip()))
    return pairs


def read_config(path: str) -> RunConfig:
    cfg = RunConfig()
    seen = set()
    for key, value in read_key_values(path):
        if key in seen:
            raise ConfigError(f"{path}: duplicate key {key!r}")
        seen.add(key)
        try:
            if key in ("mode", "metric"):
                setattr(cfg, key, value)
            elif key == "sparsity":
                cfg.target_sparsity = float(value)
            elif key in ("alpha", "beta", "la"):
                setattr(cfg, key, float(value))
            elif key in ("seed", "workers"):
                setattr(cfg, key, int(value))
            elif key == "nm":
                n_s, _, m_s = value.partition(":")
                cfg.nm_n, cfg.nm_m = int(n_s), int(m_s)
            elif key in ("freeze_s", "nm_streaming"):
                setattr(cfg, key, _parse_bool(key, value))
            else:
                raise ConfigError(f"{path}: unknown config key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value for {key!r}: {value!r}") from exc
    return cfg.validate()


def write_config(cfg: RunConfig, path: str) -> None:
    cfg.validate()
    with open(path, "w") as fh:
        fh.write(f"mode={cfg.mode}\nmetric={cfg.metric}\n")
        fh.write(f"alpha={cfg.alpha!r}\nbeta={cfg.beta!r}\nla={cfg.la!r}\n")
        fh.write(f"sparsity={cfg.target_sparsity!r}\nnm={cfg.nm_n}:{cfg.nm_m}\n")
        fh.write(f"seed={cfg.seed}\nworkers={cfg.workers}\n")
        fh.write(f"freeze_s={str(cfg.freeze_s).lower()}\n")
        fh.write(f"nm_streaming={str(cfg.nm_streaming).lower()}\n")
