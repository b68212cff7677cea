"""Method-vs-method comparison reports and report file round-trips."""

import numpy as np
import pytest

from swiftprune import (
    EwmaParams,
    RowContext,
    RunConfig,
    prune_matrix,
    read_report,
    run_compare,
    synth_fixture,
)
from swiftprune.reports import CompareReport, PruneReport


def test_method_against_itself_is_identity(rng, random_ctx):
    ctx = random_ctx(128, seed=301)
    w = rng.normal(size=(10, 128))
    cfg = RunConfig(mode="topk", metric="swiftprune", target_sparsity=0.5)
    report = run_compare(w, ctx, cfg, cfg)
    assert report.mask_overlap == 1.0
    assert report.rank_correlation == 1.0
    assert report.loss_delta == 0.0
    assert report.method_a == report.method_b == "topk:swiftprune"


def test_exact_vs_approx_high_agreement(rng, random_ctx):
    ctx = random_ctx(1024, seed=303)
    w = rng.normal(size=(8, 1024))
    cfg_a = RunConfig(mode="topk", metric="swiftprune", target_sparsity=0.5)
    cfg_b = RunConfig(mode="topk", metric="exact", target_sparsity=0.5)
    report = run_compare(w, ctx, cfg_a, cfg_b)
    assert report.mask_overlap >= 0.99
    assert report.rank_correlation >= 0.99


def test_swiftprune_vs_magnitude_differ_on_nonuniform_x(rng):
    # a spread-out calibration vector makes the activation weighting matter,
    # so the two metrics cannot pick identical masks
    x = np.geomspace(0.05, 4.0, 256)
    ctx = RowContext.from_calibration(x)
    w = rng.normal(size=(6, 256))
    cfg_a = RunConfig(mode="topk", metric="swiftprune", target_sparsity=0.5)
    cfg_b = RunConfig(mode="topk", metric="magnitude", target_sparsity=0.5)
    report = run_compare(w, ctx, cfg_a, cfg_b)
    assert report.mask_overlap < 1.0


def test_sample_seed_is_recorded(rng, random_ctx):
    ctx = random_ctx(64, seed=307)
    w = rng.normal(size=(40, 64))
    cfg = RunConfig(mode="topk", target_sparsity=0.5)
    report = run_compare(w, ctx, cfg, cfg, sample_seed=11)
    assert report.sample_seed == 11
    assert report.rows_sampled <= 16  # row cap keeps tau affordable


def test_compare_report_file_roundtrip(tmp_path):
    report = CompareReport(method_a="a", method_b="b", mask_overlap=0.5,
                           rank_correlation=0.25, loss_a=1.0, loss_b=2.0,
                           loss_delta=-1.0, rows_sampled=4, cols_sampled=8,
                           sample_seed=0)
    path = str(tmp_path / "cmp.report")
    with open(path, "w") as fh:
        fh.write("\n".join(report.to_lines()) + "\n")
    back = read_report(path)
    assert back["method_a"] == "a"
    assert float(back["loss_delta"]) == -1.0


def test_prune_report_file_roundtrip(tmp_path, rng, random_ctx):
    ctx = random_ctx(64, seed=311)
    w = rng.normal(size=(4, 64))
    _, _, report = prune_matrix(w, ctx, EwmaParams(la=0.5))
    path = str(tmp_path / "run.report")
    with open(path, "w") as fh:
        fh.write("\n".join(report.to_lines()) + "\n")
    back = read_report(path)
    assert back["mode"] == "ewma"
    assert int(back["rows"]) == 4
    assert float(back["global_sparsity"]) == report.global_sparsity
    # the in-memory row vector never serializes
    assert "per_row_sparsity" not in back


def test_report_skips_unset_fields(rng, random_ctx):
    ctx = random_ctx(32, seed=313)
    w = rng.normal(size=(2, 32))
    _, _, report = prune_matrix(w, ctx, EwmaParams())
    lines = report.to_lines()
    keys = {line.split("=")[0] for line in lines}
    assert "nm_n" not in keys  # not an N:M run
    assert "alpha" in keys
