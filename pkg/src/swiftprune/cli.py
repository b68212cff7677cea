"""Command-line harness.

Subcommands: prune, trace, compare, bench, calibrate, synth. Flags mirror
RunConfig keys; a config file provides the base and explicit flags override
it. Exit codes: 0 success, 2 dimension/config error, 3 file format error,
4 numerical guard escalation.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from swiftprune import io as spio
from swiftprune.bench import run_bench, write_bench_csv
from swiftprune.compare import run_compare
from swiftprune.errors import (
    ConfigError,
    DataError,
    DimensionError,
    DomainError,
    FormatError,
    NumericalError,
    StructureError,
    SwiftPruneError,
)
from swiftprune.ewma import EwmaParams, la_for_sparsity, prune_row
from swiftprune.metrics import RowContext
from swiftprune.nm import NMPattern, pack_nm, write_packed_nm
from swiftprune.select import prune_with_config
from swiftprune.synth import FAMILIES, synth_fixture

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FORMAT = 3
EXIT_NUMERICAL = 4


def _exit_code(exc: SwiftPruneError) -> int:
    if isinstance(exc, (FormatError, StructureError, DataError)):
        return EXIT_FORMAT
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(exc, (ConfigError, DimensionError, DomainError)):
        return EXIT_CONFIG
    return EXIT_CONFIG


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--mode", choices=spio.MODES)
    p.add_argument("--metric")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--la", type=float)
    p.add_argument("--sparsity", type=float, help="target sparsity for topk/threshold modes")
    p.add_argument("--nm", metavar="N:M", help="structured pattern, e.g. 2:4")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--freeze-s", action="store_const", const=True, default=None,
                   help="ablation: do not subtract pruned energy from S")
    p.add_argument("--nm-streaming", action="store_const", const=True, default=None,
                   help="ablation: apply streaming S updates in nm mode")


def _load_config(args: argparse.Namespace) -> spio.RunConfig:
    cfg = spio.read_config(args.config) if args.config else spio.RunConfig()
    for key in ("mode", "metric", "alpha", "beta", "la", "seed", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "sparsity", None) is not None:
        cfg.target_sparsity = args.sparsity
    if getattr(args, "nm", None) is not None:
        pattern = NMPattern.parse(args.nm)
        cfg.nm_n, cfg.nm_m = pattern.n_keep, pattern.m_group
    if getattr(args, "freeze_s", None) is not None:
        cfg.freeze_s = args.freeze_s
    if getattr(args, "nm_streaming", None) is not None:
        cfg.nm_streaming = args.nm_streaming
    return cfg.validate()


def _load_inputs(args: argparse.Namespace) -> tuple[np.ndarray, RowContext]:
    weights = spio.read_matrix(args.weights)
    if weights.ndim == 1:
        weights = weights.reshape(1, -1)
    calib = spio.read_matrix(args.calib)
    ctx = RowContext.from_calibration(calib)
    if weights.shape[1] != ctx.n:
        raise DimensionError(
            f"weights have {weights.shape[1]} columns, calibration has {ctx.n}")
    return weights, ctx


def _echo_config(report, cfg: spio.RunConfig) -> None:
    report.seed = cfg.seed
    report.alpha = cfg.alpha
    report.beta = cfg.beta
    report.la = cfg.la
    report.target_sparsity = cfg.target_sparsity
    report.nm_n = cfg.nm_n
    report.nm_m = cfg.nm_m
    report.freeze_s = cfg.freeze_s
    report.nm_streaming = cfg.nm_streaming


def cmd_prune(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    weights, ctx = _load_inputs(args)
    pruned, mask, report = prune_with_config(weights, ctx, cfg)
    _echo_config(report, cfg)
    prefix = args.out
    spio.write_matrix(pruned, prefix + ".swpt")
    spio.write_mask(mask, prefix + ".mask")
    if cfg.mode == "nm" and weights.shape[1] % cfg.nm_m == 0:
        packed = pack_nm(pruned, mask, NMPattern(cfg.nm_n, cfg.nm_m))
        write_packed_nm(packed, prefix + ".swnm")
    report.write(prefix + ".report")
    if args.trace:
        if cfg.mode != "ewma":
            raise ConfigError("--trace requires mode=ewma")
        params = EwmaParams(alpha=cfg.alpha, beta=cfg.beta, la=cfg.la)
        records = []
        for r in range(weights.shape[0]):
            res = prune_row(weights[r], ctx, params, trace=True,
                            metric=cfg.metric, freeze_s=cfg.freeze_s, row_index=r)
            records.extend(res.trace)
        spio.write_trace(records, prefix + ".trace.csv")
    print(f"pruned {report.rows}x{report.cols} [{cfg.mode}/{cfg.metric}] "
          f"sparsity={report.global_sparsity:.6g} backend={report.backend} "
          f"wall={report.wall_time_s:.4g}s")
    print(f"wrote {prefix}.swpt {prefix}.mask {prefix}.report")
    return EXIT_OK


def _running_overlay(l_values: np.ndarray) -> dict[str, np.ndarray]:
    """Running sample mean and mean absolute deviation of the well-posed
    scores, aligned with trace steps (guard steps carry the previous value).
    Quadratic in row length; intended for trace-sized rows."""
    n = l_values.shape[0]
    mean_series = np.zeros(n)
    mad_series = np.zeros(n)
    finite = np.isfinite(l_values)
    vals = l_values[finite]
    positions = np.flatnonzero(finite)
    cum = np.cumsum(vals)
    for k, pos in enumerate(positions):
        mean = cum[k] / (k + 1)
        mean_series[pos] = mean
        mad_series[pos] = float(np.mean(np.abs(vals[:k + 1] - mean)))
    # guard positions carry the previous tracked value forward
    last_m = 0.0
    last_d = 0.0
    for i in range(n):
        if finite[i]:
            last_m = mean_series[i]
            last_d = mad_series[i]
        else:
            mean_series[i] = last_m
            mad_series[i] = last_d
    return {"running_mean": mean_series, "running_mad": mad_series}


def cmd_trace(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if cfg.mode != "ewma":
        raise ConfigError(f"trace requires mode=ewma, got {cfg.mode!r}")
    weights, ctx = _load_inputs(args)
    if not 0 <= args.row < weights.shape[0]:
        raise DimensionError(f"row {args.row} out of range for {weights.shape[0]} rows")
    params = EwmaParams(alpha=cfg.alpha, beta=cfg.beta, la=cfg.la)
    res = prune_row(weights[args.row], ctx, params, trace=True,
                    metric=cfg.metric, freeze_s=cfg.freeze_s, row_index=args.row)
    spio.write_trace(res.trace, args.out)
    l_values = np.array([rec.L for rec in res.trace])
    spio.append_trace_summaries(args.out, _running_overlay(l_values))
    print(f"traced row {args.row}: {res.pruned_count}/{ctx.n} pruned, "
          f"{res.den_guards} guard steps -> {args.out}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    cfg_a = spio.read_config(args.config_a)
    cfg_b = spio.read_config(args.config_b)
    weights, ctx = _load_inputs(args)
    report = run_compare(weights, ctx, cfg_a, cfg_b, sample_seed=args.sample_seed)
    for line in report.to_lines():
        print(line)
    if args.out:
        report.write(args.out)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    oracle_sizes = [int(s) for s in args.oracle_sizes.split(",")] if args.oracle_sizes else []
    records, exponents = run_bench(
        sizes=sizes, reps=args.reps, rows=args.rows,
        oracle_sizes=oracle_sizes, oracle_rows=args.oracle_rows,
        backend=args.backend, seed=args.seed if args.seed is not None else 42)
    write_bench_csv(records, exponents, args.out)
    for (name, mode), expo in sorted(exponents.items()):
        print(f"exponent {name}/{mode}: {expo:.3f}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    weights, ctx = _load_inputs(args)
    targets = [float(t) for t in args.targets.split(",")]
    rows = []
    for target in targets:
        la = la_for_sparsity(target)
        run_cfg = spio.RunConfig(mode="ewma", metric=cfg.metric, alpha=cfg.alpha,
                                 beta=cfg.beta, la=la, workers=cfg.workers,
                                 seed=cfg.seed)
        _, _, report = prune_with_config(weights, ctx, run_cfg)
        rows.append((target, la, report.global_sparsity))
    print("target,la,achieved")
    for target, la, achieved in rows:
        print(f"{target:g},{la:g},{achieved:.6g}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("target,la,achieved\n")
            for target, la, achieved in rows:
                fh.write(f"{target:g},{la:g},{achieved:.9g}\n")
    by_la = sorted(rows, key=lambda r: r[1])
    achieved_seq = [r[2] for r in by_la]
    if any(b > a for a, b in zip(achieved_seq, achieved_seq[1:])):
        raise NumericalError(
            "achieved sparsity is not monotone decreasing in la; "
            "the la table does not transfer to this weight distribution")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    weights, calib = synth_fixture(args.rows, args.cols, args.seed,
                                   family=args.family, dtype=args.dtype)
    spio.write_matrix(weights, args.out + ".swpt")
    spio.write_matrix(calib, args.out + ".calib.swpt")
    print(f"wrote {args.out}.swpt ({args.rows}x{args.cols} {args.family}) "
          f"and {args.out}.calib.swpt")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swiftprune",
        description="Post-training weight pruning: streaming EWMA selection, "
                    "N:M structured sparsity, exact-Hessian oracles. Set "
                    "SWIFTPRUNE_BACKEND=python|compiled to force a kernel "
                    "backend.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prune", help="prune a weight matrix end to end")
    p.add_argument("--weights", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--trace", action="store_true",
                   help="also write <out>.trace.csv (ewma mode)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("trace", help="emit the EWMA trace of one row")
    p.add_argument("--weights", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--row", type=int, required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    _add_config_flags(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("compare", help="compare two pruning configurations")
    p.add_argument("--weights", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--config-a", required=True)
    p.add_argument("--config-b", required=True)
    p.add_argument("--out")
    p.add_argument("--sample-seed", type=int, default=0)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="scaling benchmark across modes/backends")
    p.add_argument("--sizes", default="1024,2048,4096,8192")
    p.add_argument("--oracle-sizes", default="32,64,128,256")
    p.add_argument("--rows", type=int, default=64)
    p.add_argument("--oracle-rows", type=int, default=8)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--bench-backend", dest="backend", default="active",
                   choices=("active", "compiled", "python", "both"))
    p.add_argument("--out", default="bench.csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("calibrate", help="measure achieved sparsity per la anchor")
    p.add_argument("--weights", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--targets", default="0.5,0.6,0.7,0.8,0.9")
    p.add_argument("--out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("synth", help="write a deterministic synthetic fixture")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--family", choices=FAMILIES, default="gaussian")
    p.add_argument("--dtype", choices=("f32", "f64"), default="f32")
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SwiftPruneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
