import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpalign.data import Series
from warpalign.errors import ContractViolation
from warpalign.warp import (
    PiecewiseLinearWarp,
    SoftWarpMatrix,
    WarpPath,
    apply_warp,
    build_soft_matrix,
    check_constraints,
    eval_tau,
    hard_warp_path,
    normalize_durations,
)


def random_warp(rng, segments=None, out_len=None) -> PiecewiseLinearWarp:
    k = segments or int(rng.integers(1, 9))
    t = out_len or int(rng.integers(8, 257))
    slopes = rng.uniform(0.0, 3.0, size=k)
    raw = rng.uniform(0.0, 1.0, size=k)
    return PiecewiseLinearWarp(slopes, normalize_durations(raw, t), t)


class TestNormalizeDurations:
    def test_uniform_symmetry(self):
        np.testing.assert_allclose(normalize_durations([1, 1, 1, 1], 100), [25, 25, 25, 25])

    def test_single_support(self):
        np.testing.assert_allclose(normalize_durations([2, 0, 0, 0], 80), [80, 0, 0, 0])

    def test_degenerate_fallback_uniform(self):
        np.testing.assert_allclose(normalize_durations([0, 0, 0, 0], 40), [10, 10, 10, 10])

    def test_sum_matches_target(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            raw = rng.uniform(0, 5, size=int(rng.integers(1, 9)))
            out = normalize_durations(raw, 64)
            assert abs(out.sum() - 64) < 1e-9


class TestEvalTau:
    def test_identity_warp(self):
        warp = PiecewiseLinearWarp.identity(32)
        grid = np.linspace(0, 32, 65)
        np.testing.assert_allclose(eval_tau(warp, grid), grid)

    def test_two_segment_hand_values(self):
        # slope 2 for 3 steps then slope 0.5 for 5 steps, evaluated by hand
        warp = PiecewiseLinearWarp([2.0, 0.5], [3.0, 5.0], 8)
        assert eval_tau(warp, 2.0) == pytest.approx(4.0)
        assert eval_tau(warp, 3.0) == pytest.approx(6.0)
        assert eval_tau(warp, 4.0) == pytest.approx(6.5)
        assert eval_tau(warp, 8.0) == pytest.approx(8.5)

    def test_zero_duration_segment_is_skipped_continuously(self):
        warp = PiecewiseLinearWarp([1.0, 5.0, 1.0], [4.0, 0.0, 4.0], 8)
        grid = np.linspace(0, 8, 161)
        values = eval_tau(warp, grid)
        assert np.all(np.diff(values) >= -1e-12)
        np.testing.assert_allclose(values[0], 0.0)
        np.testing.assert_allclose(eval_tau(warp, 4.0), 4.0)
        np.testing.assert_allclose(eval_tau(warp, 8.0), 8.0)

    def test_out_of_domain_rejected(self):
        warp = PiecewiseLinearWarp.identity(8)
        with pytest.raises(ContractViolation):
            eval_tau(warp, -0.5)
        with pytest.raises(ContractViolation):
            eval_tau(warp, 8.5)

    def test_starts_at_zero(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            assert eval_tau(random_warp(rng), 0.0) == 0.0


class TestCheckConstraints:
    def test_identity_all_pass(self):
        report = check_constraints(PiecewiseLinearWarp.identity(16))
        assert report.boundary and report.monotonicity and report.continuity
        assert report.all_satisfied

    def test_negative_slope_fails_monotonicity(self):
        warp = PiecewiseLinearWarp([1.0, -0.1, 1.0, 1.0], [4.0, 4.0, 4.0, 4.0], 16)
        report = check_constraints(warp)
        assert not report.monotonicity
        assert report.boundary and report.continuity

    def test_wrong_duration_sum_fails_boundary(self):
        warp = PiecewiseLinearWarp([1.0, 1.0], [6.0, 7.0], 16)  # sums to 13, not 16
        report = check_constraints(warp)
        assert not report.boundary


class TestBuildSoftMatrix:
    def test_identity_matrix(self):
        warp = PiecewiseLinearWarp.identity(8)
        w = build_soft_matrix(warp, 8)
        np.testing.assert_allclose(w.matrix, np.eye(8))

    def test_fractional_coordinates_hand_case(self):
        # tau over grid [0, 1, 2] evaluates to [0, 0.5, 2]
        warp = PiecewiseLinearWarp([0.5, 1.5], [1.0, 2.0], 3)
        np.testing.assert_allclose(eval_tau(warp, np.arange(3.0)), [0.0, 0.5, 2.0])
        w = build_soft_matrix(warp, 3)
        np.testing.assert_allclose(
            w.matrix, [[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]]
        )

    def test_overshoot_clamps_to_last_column(self):
        warp = PiecewiseLinearWarp([5.0, 5.0], [2.0, 2.0], 4)  # tau(i) = 5i
        w = build_soft_matrix(warp, 4)
        np.testing.assert_allclose(w.matrix[2], [0.0, 0.0, 0.0, 1.0])
        np.testing.assert_allclose(w.matrix[3], [0.0, 0.0, 0.0, 1.0])

    def test_rows_stochastic_with_adjacent_support(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            warp = random_warp(rng)
            src_len = int(rng.integers(2, 257))
            w = build_soft_matrix(warp, src_len).matrix
            assert np.all(w >= 0) and np.all(w <= 1)
            np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-9)
            for row in w:
                nz = np.nonzero(row)[0]
                assert 1 <= nz.size <= 2
                if nz.size == 2:
                    assert nz[1] - nz[0] == 1


class TestApplyWarp:
    def test_identity(self):
        series = Series(np.array([3.0, 1.0, 4.0, 1.0]))
        w = SoftWarpMatrix(np.eye(4))
        np.testing.assert_array_equal(apply_warp(w, series).values, series.values)

    def test_hand_matrix_vector_product(self):
        warp = PiecewiseLinearWarp([0.5, 1.5], [1.0, 2.0], 3)
        w = build_soft_matrix(warp, 3)
        out = apply_warp(w, Series(np.array([0.0, 2.0, 4.0])))
        np.testing.assert_allclose(out.values[0], [0.0, 1.0, 4.0])

    def test_constant_series_invariant(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            warp = random_warp(rng)
            series = Series(np.full(10, 2.5))
            out = apply_warp(build_soft_matrix(warp, 10), series)
            np.testing.assert_allclose(out.values, 2.5)

    def test_commutes_with_positive_scaling(self):
        rng = np.random.default_rng(4)
        series = Series(rng.normal(size=12))
        scaled = Series(3.5 * series.values)
        warp = random_warp(rng, out_len=20)
        w = build_soft_matrix(warp, 12)
        np.testing.assert_allclose(
            apply_warp(w, scaled).values, 3.5 * apply_warp(w, series).values, atol=1e-12
        )

    def test_shape_mismatch_rejected(self):
        w = SoftWarpMatrix(np.eye(4))
        with pytest.raises(ContractViolation):
            apply_warp(w, Series(np.arange(5.0)))

    def test_multirow_series_warped_rowwise(self):
        warp = PiecewiseLinearWarp([0.5, 1.5], [1.0, 2.0], 3)
        w = build_soft_matrix(warp, 3)
        series = Series(np.array([[0.0, 2.0, 4.0], [4.0, 2.0, 0.0]]))
        out = apply_warp(w, series)
        np.testing.assert_allclose(out.values, [[0.0, 1.0, 4.0], [4.0, 3.0, 0.0]])


class TestHardWarpPath:
    def test_identity_diagonal(self):
        path = hard_warp_path(PiecewiseLinearWarp.identity(4), 4)
        assert path.pairs == ((1, 1), (2, 2), (3, 3), (4, 4))

    def test_fast_warp_pads_with_source_repeats(self):
        warp = PiecewiseLinearWarp([2.0, 2.0], [2.0, 2.0], 4)  # tau(i) = 2i
        path = hard_warp_path(warp, 8)
        path.check(4, 8)
        steps = {
            (b[0] - a[0], b[1] - a[1]) for a, b in zip(path.pairs, path.pairs[1:])
        }
        assert (0, 1) in steps

    def test_random_paths_always_valid(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            warp = random_warp(rng)
            src_len = int(rng.integers(2, 65))
            path = hard_warp_path(warp, src_len)
            path.check(warp.out_len, src_len)  # raises on violation
            assert path.pairs[0] == (1, 1)
            assert path.pairs[-1] == (warp.out_len, src_len)


class TestWarpPathCheck:
    def test_rejects_bad_start(self):
        with pytest.raises(ContractViolation):
            WarpPath(((1, 2), (2, 3))).check(2, 3)

    def test_rejects_jump(self):
        with pytest.raises(ContractViolation):
            WarpPath(((1, 1), (3, 3))).check(3, 3)

    def test_rejects_backward_step(self):
        with pytest.raises(ContractViolation):
            WarpPath(((1, 1), (2, 2), (2, 1))).check(2, 1)


@given(
    seed=st.integers(min_value=0, max_value=2**31),
    segments=st.integers(min_value=1, max_value=8),
    out_len=st.integers(min_value=8, max_value=128),
)
@settings(max_examples=60, deadline=None)
def test_property_tau_monotone_and_anchored(seed, segments, out_len):
    rng = np.random.default_rng(seed)
    warp = random_warp(rng, segments=segments, out_len=out_len)
    grid = np.linspace(0.0, out_len, 257)
    values = eval_tau(warp, grid)
    assert values[0] == 0.0
    assert np.all(np.diff(values) >= -1e-9)
    assert abs(warp.durations.sum() - out_len) <= 1e-6
