"""Streaming EWMA pruning: the per-step update, row/matrix drivers and la."""

import math

import numpy as np
import pytest

from swiftprune import (
    ConfigError,
    EwmaParams,
    NumericalError,
    RowContext,
    ewma_step,
    init_state,
    la_for_sparsity,
    prune_matrix,
    prune_row,
    synth_fixture,
)

# dyadic hand fixture: x = [2, 0, 2] gives S = 8 and score denominators
# [1/2, 1, 0]; w = [2, 2, 0] then yields the exact scores [4, 2, +inf]
HAND_X = np.array([2.0, 0.0, 2.0])
HAND_W = np.array([2.0, 2.0, 0.0])


def hand_ctx():
    return RowContext.from_calibration(HAND_X)


def test_hand_trace_via_ewma_step():
    params = EwmaParams()  # alpha = beta = 0.125, la = 4
    state = init_state(hand_ctx())
    assert state.S == 8.0

    pruned, state, score = ewma_step(state, 2.0, 2.0, params)
    assert (pruned, score) == (False, 4.0)
    assert (state.est, state.dev) == (4.0, 0.0)

    pruned, state, score = ewma_step(state, 2.0, 0.0, params)
    assert (pruned, score) == (True, 2.0)
    # dev sees the already-updated est: 0.125 * |3.75 - 2|
    assert (state.est, state.dev) == (3.75, 0.21875)
    assert state.S == 4.0

    # after the prune the last column holds all remaining energy: guard step
    pruned, state, score = ewma_step(state, 0.0, 2.0, params)
    assert pruned is False
    assert score == math.inf
    assert (state.est, state.dev, state.S) == (3.75, 0.21875, 4.0)


def test_hand_trace_via_prune_row():
    res = prune_row(HAND_W, hand_ctx(), EwmaParams(), trace=True)
    np.testing.assert_array_equal(res.mask, [True, False, True])
    np.testing.assert_array_equal(res.kept, [2.0, 0.0, 0.0])
    assert res.pruned_count == 1
    assert res.den_guards == 1
    assert not res.s_clamped
    ls = [t.L for t in res.trace]
    assert ls == [4.0, 2.0, math.inf]
    assert [t.est for t in res.trace] == [4.0, 3.75, 3.75]
    assert [t.dev for t in res.trace] == [0.0, 0.21875, 0.21875]
    assert [t.pruned for t in res.trace] == [False, True, False]


def test_trace_and_plain_runs_agree():
    res_t = prune_row(HAND_W, hand_ctx(), EwmaParams(), trace=True)
    res_p = prune_row(HAND_W, hand_ctx(), EwmaParams())
    assert res_p.trace is None
    np.testing.assert_array_equal(res_t.mask, res_p.mask)
    np.testing.assert_array_equal(res_t.kept, res_p.kept)


def test_position_zero_immunity():
    # the first well-posed score seeds est, and strict < can never fire on it
    for la in (-2.0, 0.0, 4.0):
        for seed in range(50):
            r = np.random.default_rng(seed)
            x = r.normal(size=32)
            x[np.abs(x) < 1e-3] = 1e-3
            w = r.normal(size=32)
            res = prune_row(w, RowContext.from_calibration(x), EwmaParams(la=la))
            assert res.mask[0]


def test_constant_stream_is_fixed_point():
    # identical scores forever: est == score exactly, dev == 0, no prunes,
    # regardless of la (dev never warms up, strict < never fires)
    x = np.full(64, 0.5)
    w = np.full(64, 1.5)
    for la in (-1.5, 0.0, 4.0):
        res = prune_row(w, RowContext.from_calibration(x), EwmaParams(la=la), trace=True)
        assert res.pruned_count == 0
        ls = {t.L for t in res.trace}
        assert len(ls) == 1
        assert all(t.est == res.trace[0].L and t.dev == 0.0 for t in res.trace)


def test_all_zero_row_prunes_nothing():
    ctx = RowContext.from_calibration(np.ones(16))
    res = prune_row(np.zeros(16), ctx, EwmaParams())
    assert res.pruned_count == 0
    assert res.mask.all()


def test_tie_with_threshold_is_kept():
    # score == est - la*dev must keep (strict comparison)
    state = init_state(RowContext.from_calibration(np.full(4, 0.5)))
    params = EwmaParams(la=0.0)
    _, state, first = ewma_step(state, 2.0, 0.5, params)
    pruned, state, second = ewma_step(state, 2.0, 0.5, params)
    assert first == second
    assert pruned is False


def test_s_underflow_clamps_and_guards():
    # pruning w=3 out of a row with S=8 rips more energy than the pool holds;
    # S clamps at its floor and every later denominator is ill-posed
    ctx = RowContext.from_calibration(np.ones(8))
    w = np.array([10.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0])
    res = prune_row(w, ctx, EwmaParams(la=0.0))
    assert res.s_clamped
    assert res.den_guards == 6
    np.testing.assert_array_equal(res.mask, [1, 0, 1, 1, 1, 1, 1, 1])
    np.testing.assert_array_equal(res.kept, np.where(res.mask, w, 0.0))


def test_guard_skips_tracker_update():
    # an ill-posed step must leave est/dev exactly as they were
    res = prune_row(HAND_W, hand_ctx(), EwmaParams(), trace=True)
    guard_rec = res.trace[2]
    assert guard_rec.L == math.inf
    assert guard_rec.est == res.trace[1].est
    assert guard_rec.dev == res.trace[1].dev


def test_nonfinite_score_aborts_with_row_and_step():
    ctx = RowContext.from_calibration(np.ones(3))
    with pytest.raises(NumericalError, match=r"row 0: non-finite score at step 1"):
        prune_row(np.array([1.0, 1e200, 1.0]), ctx, EwmaParams())


def test_prune_matrix_propagates_row_failures():
    ctx = RowContext.from_calibration(np.ones(3))
    w = np.ones((4, 3))
    w[2, 1] = 1e200
    with pytest.raises(NumericalError, match=r"row 2"):
        prune_matrix(w, ctx, EwmaParams())


def test_prune_matrix_matches_prune_row(rng, random_ctx):
    ctx = random_ctx(128, seed=17)
    w = rng.normal(size=(12, 128))
    params = EwmaParams(la=0.5)
    pruned, mask, report = prune_matrix(w, ctx, params)
    for i in range(12):
        row = prune_row(w[i], ctx, params, row_index=i)
        np.testing.assert_array_equal(mask[i], row.mask)
        np.testing.assert_array_equal(pruned[i], row.kept)
    assert report.rows == 12 and report.cols == 128
    assert report.global_sparsity == pytest.approx(1.0 - mask.mean(), rel=1e-12)
    assert len(report.per_row_sparsity) == 12
    assert report.row_sparsity_min <= report.row_sparsity_mean <= report.row_sparsity_max


def test_prune_matrix_worker_determinism(rng, random_ctx):
    ctx = random_ctx(256, seed=23)
    w = rng.normal(size=(16, 256))
    params = EwmaParams(la=-0.2)
    base_pruned, base_mask, _ = prune_matrix(w, ctx, params, workers=1)
    for workers in (2, 3, 8):
        pruned, mask, report = prune_matrix(w, ctx, params, workers=workers)
        np.testing.assert_array_equal(mask, base_mask)
        assert pruned.tobytes() == base_pruned.tobytes()
        assert report.workers == workers


def test_prune_matrix_preserves_kept_bits_in_f32(random_ctx):
    # float32 inputs stay float32 and kept values are bit-identical
    r = np.random.default_rng(31)
    ctx = random_ctx(64, seed=31)
    w = r.normal(size=(4, 64)).astype(np.float32)
    pruned, mask, _ = prune_matrix(w, ctx, EwmaParams(la=0.5))
    assert pruned.dtype == np.float32
    np.testing.assert_array_equal(pruned[mask], w[mask])
    assert not pruned[~mask].any()


def test_freeze_s_only_differs_when_prunes_feed_back(rng, random_ctx):
    ctx = random_ctx(128, seed=41)
    w = rng.normal(size=(8, 128))
    frozen, fmask, freport = prune_matrix(w, ctx, EwmaParams(la=-0.5), freeze_s=True)
    live, lmask, _ = prune_matrix(w, ctx, EwmaParams(la=-0.5))
    # heavy pruning at la=-0.5 drains S, so the integrated run must diverge
    assert not np.array_equal(fmask, lmask)
    assert freport.metric == "swiftprune"
    # on the constant fixture nothing prunes, so both paths agree exactly
    cw, cx = synth_fixture(6, 64, seed=2, family="constant")
    cctx = RowContext.from_calibration(cx)
    _, m_frozen, _ = prune_matrix(cw, cctx, EwmaParams(), freeze_s=True)
    _, m_live, _ = prune_matrix(cw, cctx, EwmaParams())
    np.testing.assert_array_equal(m_frozen, m_live)
    assert m_frozen.all()


def test_static_metric_streams(rng, random_ctx):
    # baseline metrics run through the same est/dev machinery on static scores
    ctx = random_ctx(96, seed=43)
    w = rng.normal(size=(6, 96))
    for metric in ("magnitude", "wanda", "exact"):
        pruned, mask, report = prune_matrix(w, ctx, EwmaParams(la=0.2), metric=metric)
        assert report.metric == metric
        assert 0.0 < report.global_sparsity < 1.0
        np.testing.assert_array_equal(pruned, np.where(mask, w, 0.0))


def test_ewma_params_validation():
    with pytest.raises(ConfigError):
        EwmaParams(alpha=0.0)
    with pytest.raises(ConfigError):
        EwmaParams(alpha=1.5)
    with pytest.raises(ConfigError):
        EwmaParams(beta=-0.1)
    with pytest.raises(ConfigError):
        EwmaParams(la=math.nan)


def test_la_table_anchors():
    anchors = {0.5: 0.5, 0.6: 0.2, 0.7: -0.2, 0.8: -0.9, 0.9: -1.5}
    for target, la in anchors.items():
        assert la_for_sparsity(target) == la


def test_la_interpolation_midpoint():
    assert la_for_sparsity(0.75) == pytest.approx(-0.55, rel=1e-12)
    assert la_for_sparsity(0.55) == pytest.approx(0.35, rel=1e-12)


def test_la_out_of_range():
    for target in (0.49, 0.91, -1.0):
        with pytest.raises(ConfigError):
            la_for_sparsity(target)


def test_la_monotone_sparsity(rng, random_ctx):
    # larger la -> higher threshold deficit -> fewer prunes
    ctx = random_ctx(512, seed=53)
    w = rng.normal(size=(8, 512))
    sparsities = []
    for la in (-1.5, -0.9, -0.2, 0.2, 0.5, 4.0):
        _, _, report = prune_matrix(w, ctx, EwmaParams(la=la))
        sparsities.append(report.global_sparsity)
    assert all(a >= b for a, b in zip(sparsities, sparsities[1:]))


def test_terminal_dev_tracks_stream_mad():
    # on a stationary stream the terminal dev sits near the stream's mean
    # absolute deviation from est. A single terminal dev carries ~20%
    # smoothing noise (beta keeps only a ~15-sample window), so the check
    # runs over many seeded streams and compares the averages.
    devs, mads = [], []
    for seed in range(50):
        r = np.random.default_rng(seed)
        scores = np.clip(r.normal(1.0, 0.05, size=10_000), 0.25, None)
        w = np.sqrt(2.0 * scores)
        ctx = RowContext.from_calibration(np.full(10_000, 1e-3))
        res = prune_row(w, ctx, EwmaParams(), trace=True, freeze_s=True)
        ls = np.array([t.L for t in res.trace])
        est = res.trace[-1].est
        devs.append(res.trace[-1].dev)
        mads.append(np.abs(ls - est).mean())
    mean_dev, mean_mad = np.mean(devs), np.mean(mads)
    assert abs(mean_dev - mean_mad) <= 0.25 * mean_mad
