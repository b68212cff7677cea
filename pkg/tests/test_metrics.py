"""Contribution scores, Hessian identities and the approximation deviation."""

import numpy as np
import pytest

from swiftprune import (
    ContributionScore,
    DataError,
    DimensionError,
    DomainError,
    RowContext,
    approximation_deviation,
    contribution,
    exact_contribution,
    hessian_matrix,
    hqq_inv_brute,
    hqq_inv_closed,
    layer_loss,
    magnitude_scores,
    row_loss,
    score_matrix,
    wanda_score,
    wanda_scores,
)

# fixtures small enough to verify by hand: for x=[1,2] the dampened Hessian
# is [[7,4],[4,13]], det 75, so (H^-1)_00 = 13/75 and (H^-1)_11 = 7/75
CTX_12 = RowContext.from_calibration(np.array([1.0, 2.0]))


def test_contribution_hand_value():
    got = contribution(2.0, 1.0, 4.0)
    assert got == ContributionScore(8.0 / 3.0, True)


def test_contribution_zero_weight():
    assert contribution(0.0, 1.0, 4.0).value == 0.0


def test_contribution_guard_at_and_past_boundary():
    # x^2 == S and x^2 > S both yield the +inf keep-forever sentinel
    for x in (2.0, 3.0):
        score = contribution(1.0, x, 4.0)
        assert score.value == np.inf
        assert not score.well_posed


def test_contribution_rejects_nonpositive_s():
    with pytest.raises(DomainError):
        contribution(1.0, 1.0, 0.0)


def test_hessian_matrix_hand_value():
    np.testing.assert_array_equal(hessian_matrix(CTX_12),
                                  [[7.0, 4.0], [4.0, 13.0]])


def test_hqq_inv_closed_hand_values():
    assert hqq_inv_closed(CTX_12, 0) == pytest.approx(13.0 / 75.0, rel=1e-15)
    assert hqq_inv_closed(CTX_12, 1) == pytest.approx(7.0 / 75.0, rel=1e-15)


def test_hqq_inv_brute_matches_hand_value():
    assert hqq_inv_brute(CTX_12, 1) == pytest.approx(7.0 / 75.0, rel=1e-12)


def test_closed_matches_brute_on_random_contexts(random_ctx):
    for seed in range(40):
        n = int(np.random.default_rng(seed).integers(1, 65))
        ctx = random_ctx(n, seed=seed)
        for q in range(n):
            brute = hqq_inv_brute(ctx, q)
            assert hqq_inv_closed(ctx, q) == pytest.approx(brute, rel=1e-9)


def test_determinant_identity(random_ctx):
    # det H = 2 (2S/n)^{n-1} (S/n + S): the cofactor argument behind the
    # closed form, checked against a dense determinant
    for seed in range(20):
        n = int(np.random.default_rng(seed + 100).integers(1, 33))
        ctx = random_ctx(n, seed=seed + 100)
        s = ctx.s0
        closed = 2.0 * (2.0 * s / n) ** (n - 1) * (s / n + s)
        assert np.linalg.det(hessian_matrix(ctx)) == pytest.approx(closed, rel=1e-6)


def test_exact_contribution_hand_value():
    assert exact_contribution(2.0, CTX_12, 0) == pytest.approx(150.0 / 13.0, rel=1e-12)


def test_exact_contribution_zero_weight():
    assert exact_contribution(0.0, CTX_12, 1) == 0.0


def test_deviation_hand_value():
    # x = ones(4): S = 4, deviation = 1 / ((n+1)(S - 1)) = 1/15 at every q
    ctx = RowContext.from_calibration(np.ones(4))
    for q in range(4):
        assert approximation_deviation(ctx, q) == pytest.approx(1.0 / 15.0, rel=1e-12)


def test_deviation_identity_property(random_ctx):
    for seed in range(40):
        n = int(np.random.default_rng(seed + 7).integers(2, 65))
        ctx = random_ctx(n, seed=seed + 7)
        q = int(np.random.default_rng(seed + 7).integers(n))
        expected = ctx.x_sq[q] / ((n + 1) * (ctx.s0 - ctx.x_sq[q]))
        assert approximation_deviation(ctx, q) == pytest.approx(expected, rel=1e-12)


def test_deviation_domain_error():
    ctx = RowContext.from_calibration(np.array([1e-9, 5.0]))
    with pytest.raises(DomainError):
        approximation_deviation(ctx, 1)


def test_from_calibration_batch_pooling():
    # a (B, n) batch pools per column by RMS, so S matches the batch second
    # moment divided by B
    batch = np.array([[1.0, 2.0], [3.0, 2.0]])
    ctx = RowContext.from_calibration(batch)
    np.testing.assert_allclose(ctx.x, [np.sqrt(5.0), 2.0])
    assert ctx.s0 == pytest.approx(9.0)


def test_from_calibration_rejects_bad_input():
    with pytest.raises(DataError):
        RowContext.from_calibration(np.array([1.0, np.nan]))
    with pytest.raises(DimensionError):
        RowContext.from_calibration(np.zeros((2, 2, 2)))
    with pytest.raises(DomainError):
        RowContext.from_calibration(np.zeros(4))


def test_context_arrays_are_read_only():
    ctx = RowContext.from_calibration(np.array([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        ctx.x[0] = 9.0


def test_score_matrix_matches_scalar_contribution(rng, random_ctx):
    ctx = random_ctx(32, seed=5)
    w = rng.normal(size=(6, 32))
    scores = score_matrix(w, ctx)
    for i in range(6):
        for q in range(32):
            assert scores[i, q] == contribution(w[i, q], ctx.x[q], ctx.s0).value


def test_score_matrix_guard_sentinel():
    # one column holding nearly all the energy is ill-posed: +inf, never pruned
    ctx = RowContext.from_calibration(np.array([10.0, 1e-9]))
    scores = score_matrix(np.ones((1, 2)), ctx)
    assert scores[0, 0] == np.inf
    assert np.isfinite(scores[0, 1])


def test_score_matrix_exact_metric(rng, random_ctx):
    ctx = random_ctx(16, seed=11)
    w = rng.normal(size=(3, 16))
    scores = score_matrix(w, ctx, metric="exact")
    for i in range(3):
        for q in range(16):
            assert scores[i, q] == pytest.approx(
                exact_contribution(w[i, q], ctx, q), rel=1e-12)


def test_score_matrix_baseline_metrics(rng, random_ctx):
    ctx = random_ctx(16, seed=12)
    w = rng.normal(size=(3, 16))
    np.testing.assert_array_equal(score_matrix(w, ctx, "magnitude"), np.abs(w))
    np.testing.assert_array_equal(score_matrix(w, ctx, "wanda"), wanda_scores(w, ctx))
    assert wanda_score(-3.0, 2.0) == 6.0


def test_score_matrix_unknown_metric(random_ctx):
    with pytest.raises(Exception):
        score_matrix(np.ones((1, 4)), random_ctx(4), metric="entropy")


def test_scores_scale_quadratically_in_w(rng, random_ctx):
    # doubling w multiplies every score by exactly 4 (power of two, no rounding)
    ctx = random_ctx(64, seed=3)
    w = rng.normal(size=(4, 64))
    np.testing.assert_array_equal(score_matrix(2.0 * w, ctx), 4.0 * score_matrix(w, ctx))


def test_scores_invariant_under_x_rescaling(rng):
    # x -> 2x leaves x_q^2/S untouched, so the stream scores are bit-identical
    r = np.random.default_rng(21)
    x = r.normal(size=64)
    w = r.normal(size=(4, 64))
    a = score_matrix(w, RowContext.from_calibration(x))
    b = score_matrix(w, RowContext.from_calibration(2.0 * x))
    np.testing.assert_array_equal(a, b)


def test_ranking_tracks_exact_scores(rng, random_ctx):
    # the approximate and exact scores must order a row almost identically
    ctx = random_ctx(256, seed=8)
    w = rng.normal(size=256)
    approx = np.argsort(score_matrix(w, ctx)[0], kind="stable")
    exact = np.argsort(score_matrix(w, ctx, "exact")[0], kind="stable")
    agree = np.mean(approx == exact)
    assert agree > 0.95


def test_row_loss_hand_value():
    w = np.array([1.0, 1.0])
    pruned = np.array([0.0, 1.0])
    assert row_loss(w, pruned, np.array([3.0, 4.0])) == 3.0


def test_row_loss_shape_check():
    with pytest.raises(DimensionError):
        row_loss(np.ones(3), np.ones(2), np.ones(3))


def test_layer_loss_sums_rows():
    w = np.array([[1.0, 0.0], [0.0, 2.0]])
    pruned = np.zeros((2, 2))
    x = np.array([3.0, 4.0])
    assert layer_loss(w, pruned, x) == row_loss(w[0], pruned[0], x) + row_loss(
        w[1], pruned[1], x)


def test_layer_loss_batch_calibration(rng):
    # with a (n, B) sample matrix the loss accumulates over every sample
    w = rng.normal(size=(2, 4))
    xb = rng.normal(size=(4, 3))
    total = layer_loss(w, np.zeros_like(w), xb)
    manual = np.abs(w @ xb).sum()
    assert total == pytest.approx(manual, rel=1e-12)
