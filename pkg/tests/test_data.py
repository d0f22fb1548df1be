import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpalign.data import (
    ClassGroup,
    LabeledDataset,
    Series,
    equalize_lengths,
    equalize_lengths_to,
    group_by_label,
    grow_series,
    parse_ucr_tsv,
    shrink_series,
)
from warpalign.errors import ContractViolation, FormatError, ParseError


def make_dataset(arrays, labels, name="t"):
    return LabeledDataset(
        tuple((lab, Series(np.asarray(a, dtype=float))) for lab, a in zip(labels, arrays)),
        name=name,
    )


class TestSeries:
    def test_univariate_promoted_to_2d(self):
        s = Series(np.array([0.5, 0.7, 0.9]))
        assert s.values.shape == (1, 3)
        assert s.dims == 1 and s.length == 3

    def test_too_short_rejected(self):
        with pytest.raises(ContractViolation):
            Series(np.array([1.0]))

    def test_non_finite_rejected(self):
        with pytest.raises(ContractViolation):
            Series(np.array([1.0, np.nan]))

    def test_values_immutable(self):
        s = Series(np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            s.values[0, 0] = 5.0


class TestParseUcrTsv:
    def test_basic_line(self, tmp_path):
        path = tmp_path / "X_TRAIN.tsv"
        path.write_text("1\t0.5\t0.7\t0.9\n")
        ds = parse_ucr_tsv(path)
        assert len(ds) == 1
        label, series = ds.items[0]
        assert label == 1
        assert series.dims == 1
        np.testing.assert_array_equal(series.values[0], [0.5, 0.7, 0.9])
        assert ds.name == "X"

    def test_short_record_is_parse_error(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("2\t1.0\n")
        with pytest.raises(ParseError, match="bad.tsv:1"):
            parse_ucr_tsv(path)

    def test_non_numeric_value_is_parse_error(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("1\t0.5\t0.6\n1\t0.5\tpotato\n")
        with pytest.raises(ParseError, match="bad.tsv:2"):
            parse_ucr_tsv(path)

    def test_empty_file_is_format_error(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("")
        with pytest.raises(FormatError):
            parse_ucr_tsv(path)

    def test_scientific_notation_and_negative_labels(self, tmp_path):
        path = tmp_path / "sci.tsv"
        path.write_text("-1\t1e-3\t-2.5E2\t4\n")
        ds = parse_ucr_tsv(path)
        assert ds.items[0][0] == -1
        np.testing.assert_allclose(ds.items[0][1].values[0], [1e-3, -250.0, 4.0])

    def test_non_integer_labels_densely_mapped(self, tmp_path):
        path = tmp_path / "lab.tsv"
        path.write_text("cat\t1\t2\ndog\t3\t4\ncat\t5\t6\n")
        ds = parse_ucr_tsv(path)
        assert ds.labels == [0, 1, 0]


class TestShrinkSeries:
    def test_equal_length_is_noop(self):
        s = Series(np.array([1.0, 2.0, 3.0, 4.0]))
        out = shrink_series(s, 4, seed=0)
        np.testing.assert_array_equal(out.values, s.values)

    def test_single_removal_among_expected(self):
        # exhaustive oracle: removing one interior point of [1..5] leaves
        # one of exactly three possible outputs
        expected = {(1, 3, 4, 5), (1, 2, 4, 5), (1, 2, 3, 5)}
        s = Series(np.array([1.0, 2.0, 3.0, 4.0, 5.0]))
        seen = set()
        for seed in range(12):
            out = shrink_series(s, 4, seed=seed)
            assert out.length == 4
            key = tuple(out.values[0])
            assert key in expected
            seen.add(key)
        assert len(seen) > 1  # sampling actually varies with the seed

    def test_down_to_two_keeps_endpoints_only(self):
        s = Series(np.array([3.0, 9.0, 7.0, 5.0, 4.0]))
        out = shrink_series(s, 2, seed=1)
        np.testing.assert_array_equal(out.values[0], [3.0, 4.0])

    def test_target_above_length_rejected(self):
        with pytest.raises(ContractViolation):
            shrink_series(Series(np.array([1.0, 2.0])), 3, seed=0)

    def test_deterministic_given_seed(self):
        s = Series(np.arange(20, dtype=float))
        a = shrink_series(s, 9, seed=5)
        b = shrink_series(s, 9, seed=5)
        np.testing.assert_array_equal(a.values, b.values)


class TestGrowSeries:
    def test_single_slot_midpoint_forced(self):
        out = grow_series(Series(np.array([0.0, 2.0])), 3, seed=0)
        np.testing.assert_array_equal(out.values[0], [0.0, 1.0, 2.0])

    def test_constant_series_stays_constant(self):
        out = grow_series(Series(np.array([1.0, 1.0, 1.0])), 5, seed=3)
        np.testing.assert_array_equal(out.values[0], np.ones(5))

    def test_inserted_value_from_enumerated_slots(self):
        # both possible single insertions in [0, 4, 8] are midpoints 2 or 6
        out = grow_series(Series(np.array([0.0, 4.0, 8.0])), 4, seed=7)
        inserted = set(out.values[0]) - {0.0, 4.0, 8.0}
        assert inserted in ({2.0}, {6.0})

    def test_target_not_above_length_rejected(self):
        with pytest.raises(ContractViolation):
            grow_series(Series(np.array([1.0, 2.0, 3.0])), 3, seed=0)

    def test_heavy_growth_supported(self):
        out = grow_series(Series(np.array([0.0, 8.0])), 40, seed=2)
        assert out.length == 40
        assert out.values[0, 0] == 0.0 and out.values[0, -1] == 8.0


class TestEqualizeLengths:
    def test_uniform_dataset_unchanged(self):
        ds = make_dataset([np.arange(8)] * 3, [1, 1, 2])
        assert equalize_lengths(ds, seed=0) is ds

    def test_mean_rounding_forced(self):
        ds = make_dataset([np.arange(4), np.arange(6)], [1, 2])
        out = equalize_lengths(ds, seed=0)
        assert out.lengths() == [5, 5]

    def test_recounted_lengths_match_target(self):
        ds = make_dataset([np.arange(3), np.arange(5), np.arange(7)], [1, 1, 1])
        out = equalize_lengths(ds, seed=4)
        # independent re-count of every transformed series
        assert [s.values.shape[1] for s in out.series] == [5, 5, 5]

    def test_idempotent(self):
        ds = make_dataset([np.arange(3), np.arange(9), np.arange(6)], [1, 2, 1])
        once = equalize_lengths(ds, seed=9)
        twice = equalize_lengths(once, seed=9)
        for a, b in zip(once.series, twice.series):
            np.testing.assert_array_equal(a.values, b.values)

    def test_explicit_target(self):
        ds = make_dataset([np.arange(4), np.arange(10)], [1, 2])
        out = equalize_lengths_to(ds, 6, seed=1)
        assert out.lengths() == [6, 6]

    @given(
        lengths=st.lists(st.integers(min_value=2, max_value=30), min_size=1, max_size=8),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    @settings(max_examples=40, deadline=None)
    def test_property_lengths_and_endpoints(self, lengths, seed):
        rng = np.random.default_rng(0)
        arrays = [rng.normal(size=n) for n in lengths]
        ds = make_dataset(arrays, [1] * len(arrays))
        out = equalize_lengths(ds, seed=seed)
        target = int(np.floor(np.mean(lengths) + 0.5))
        assert all(n == target for n in out.lengths())
        for original, result in zip(arrays, out.series):
            assert result.values[0, 0] == original[0]
            assert result.values[0, -1] == original[-1]

    @given(seed=st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=25, deadline=None)
    def test_property_monotone_growth(self, seed):
        values = np.cumsum(np.abs(np.random.default_rng(3).normal(size=6))) + 1.0
        out = grow_series(Series(values), 15, seed=seed)
        assert np.all(np.diff(out.values[0]) >= 0)


class TestGroupByLabel:
    def test_partition_preserves_order(self):
        ds = make_dataset([np.arange(4) + i for i in range(3)], [1, 2, 1])
        groups = group_by_label(ds)
        assert [g.label for g in groups] == [1, 2]
        assert len(groups[0]) == 2 and len(groups[1]) == 1
        np.testing.assert_array_equal(groups[0].series[0].values[0], np.arange(4))
        np.testing.assert_array_equal(groups[0].series[1].values[0], np.arange(4) + 2)

    def test_single_label(self):
        ds = make_dataset([np.arange(4)] * 3, [7, 7, 7])
        groups = group_by_label(ds)
        assert len(groups) == 1 and groups[0].label == 7

    def test_mixed_lengths_rejected(self):
        ds = make_dataset([np.arange(4), np.arange(5)], [1, 1])
        with pytest.raises(ContractViolation):
            group_by_label(ds)

    def test_class_group_rejects_mixed_shapes(self):
        with pytest.raises(ContractViolation):
            ClassGroup(1, (Series(np.arange(3.0)), Series(np.arange(4.0))))
