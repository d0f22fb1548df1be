"""Dataset ingestion, representation, and length equalization for UCR-format data.

The on-disk layout is the UCR Archive 2018 TSV convention: one record per
line, first field the class label, remaining fields the sample values,
tab-separated. Files are named ``<Name>_TRAIN.tsv`` / ``<Name>_TEST.tsv``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractViolation, FormatError, ParseError

__all__ = [
    "Series",
    "LabeledDataset",
    "ClassGroup",
    "parse_ucr_tsv",
    "equalize_lengths",
    "equalize_lengths_to",
    "shrink_series",
    "grow_series",
    "group_by_label",
]


@dataclass(frozen=True)
class Series:
    """A numeric time series of shape (dims, length).

    Values are stored as an immutable float64 array. Univariate series use
    ``dims == 1``.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2:
            raise ContractViolation(f"series values must be 1-D or 2-D, got ndim={arr.ndim}")
        d, t = arr.shape
        if d < 1 or t < 2:
            raise ContractViolation(f"series needs dims >= 1 and length >= 2, got shape ({d}, {t})")
        if not np.all(np.isfinite(arr)):
            raise ContractViolation("series values must all be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dims(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabeledDataset:
    """An ordered collection of (label, series) pairs."""

    items: tuple[tuple[int, Series], ...]
    name: str = ""

    def __post_init__(self) -> None:
        if not self.items:
            raise ContractViolation("dataset must be non-empty")
        object.__setattr__(self, "items", tuple(self.items))

    def __len__(self) -> int:
        return len(self.items)

    @property
    def labels(self) -> list[int]:
        return [label for label, _ in self.items]

    @property
    def series(self) -> list[Series]:
        return [s for _, s in self.items]

    def lengths(self) -> list[int]:
        return [s.length for _, s in self.items]


@dataclass(frozen=True)
class ClassGroup:
    """All series of one label, equal (dims, length) across members."""

    label: int
    series: tuple[Series, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "series", tuple(self.series))
        shapes = {s.values.shape for s in self.series}
        if len(shapes) > 1:
            raise ContractViolation(
                f"class group {self.label} mixes series shapes: {sorted(shapes)}"
            )

    def __len__(self) -> int:
        return len(self.series)

    @property
    def length(self) -> int:
        return self.series[0].length

    @property
    def dims(self) -> int:
        return self.series[0].dims

    def stacked(self) -> np.ndarray:
        """Member values as one (n, dims, length) array."""
        return np.stack([s.values for s in self.series])


def _parse_label(token: str, mapping: dict[str, int]) -> int:
    """Integer-like tokens parse directly; others get dense first-seen ids."""
    try:
        return int(token)
    except ValueError:
        pass
    try:
        as_float = float(token)
    except ValueError:
        as_float = None
    if as_float is not None and as_float.is_integer():
        return int(as_float)
    if token not in mapping:
        mapping[token] = len(mapping)
    return mapping[token]


def parse_ucr_tsv(path: str | Path) -> LabeledDataset:
    """Read a UCR-layout TSV file into a LabeledDataset.

    Each non-blank line is ``label<TAB>v1<TAB>v2...``. Lines with a
    non-numeric token or fewer than two values raise :class:`ParseError`
    with the offending line number; an empty file raises
    :class:`FormatError`.
    """
    path = Path(path)
    label_mapping: dict[str, int] = {}
    items: list[tuple[int, Series]] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) == 1:
                # some archive exports are whitespace-separated
                fields = line.split()
            label = _parse_label(fields[0], label_mapping)
            if len(fields) < 3:
                raise ParseError(f"{path.name}:{lineno}: record has fewer than 2 values")
            try:
                values = np.array([float(tok) for tok in fields[1:]], dtype=np.float64)
            except ValueError as exc:
                raise ParseError(f"{path.name}:{lineno}: non-numeric value ({exc})") from None
            if not np.all(np.isfinite(values)):
                raise ParseError(f"{path.name}:{lineno}: non-finite value")
            items.append((label, Series(values)))
    if not items:
        raise FormatError(f"{path}: no records found")
    return LabeledDataset(tuple(items), name=_dataset_name(path))


def _dataset_name(path: Path) -> str:
    stem = path.stem
    for suffix in ("_TRAIN", "_TEST"):
        if stem.endswith(suffix):
            return stem[: -len(suffix)]
    return stem


def _series_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, index])


def shrink_series(series: Series, target_len: int, seed: int) -> Series:
    """Drop random interior time steps until ``target_len`` remain.

    Removal indices are sampled without replacement from 1..length-2 so the
    first and last samples always survive. Returns the input unchanged when
    it already has the target length.
    """
    t = series.length
    if target_len == t:
        return series
    if target_len < 2 or target_len > t:
        raise ContractViolation(f"shrink target must be in [2, {t}], got {target_len}")
    rng = _series_rng(seed, 0)
    removed = rng.choice(np.arange(1, t - 1), size=t - target_len, replace=False)
    keep = np.setdiff1d(np.arange(t), removed)
    return Series(series.values[:, keep])


def grow_series(series: Series, target_len: int, seed: int) -> Series:
    """Insert midpoints of randomly chosen adjacent pairs until ``target_len``.

    Insertions are applied one at a time on the growing series, each slot
    drawn uniformly, so repeated growth subdivides intervals rather than
    stacking duplicate points.
    """
    t = series.length
    if target_len <= t:
        raise ContractViolation(f"grow target must exceed {t}, got {target_len}")
    rng = _series_rng(seed, 1)
    values = series.values
    while values.shape[1] < target_len:
        slot = int(rng.integers(0, values.shape[1] - 1))
        mid = (values[:, slot] + values[:, slot + 1]) / 2.0
        values = np.concatenate(
            [values[:, : slot + 1], mid[:, np.newaxis], values[:, slot + 1 :]], axis=1
        )
    return Series(values)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def equalize_lengths(dataset: LabeledDataset, seed: int) -> LabeledDataset:
    """Resample every series to the rounded mean length of the dataset.

    Longer series lose random interior samples, shorter ones gain midpoint
    insertions; already-uniform datasets come back unchanged.
    """
    target = _round_half_up(float(np.mean(dataset.lengths())))
    return equalize_lengths_to(dataset, target, seed)


def equalize_lengths_to(dataset: LabeledDataset, target_len: int, seed: int) -> LabeledDataset:
    """Resample every series to an explicit target length.

    Used for test splits, which must match the length the model was
    trained at rather than their own mean.
    """
    if all(length == target_len for length in dataset.lengths()):
        return dataset
    items = []
    for index, (label, series) in enumerate(dataset.items):
        if series.length > target_len:
            series = shrink_series(series, target_len, seed + index)
        elif series.length < target_len:
            series = grow_series(series, target_len, seed + index)
        items.append((label, series))
    return LabeledDataset(tuple(items), name=dataset.name)


def group_by_label(dataset: LabeledDataset) -> list[ClassGroup]:
    """Partition a length-equalized dataset into per-label groups.

    Groups come back ordered by label; within a group the dataset order is
    preserved. Mixed lengths within one label violate the contract.
    """
    buckets: dict[int, list[Series]] = {}
    for label, series in dataset.items:
        buckets.setdefault(label, []).append(series)
    groups = []
    for label in sorted(buckets):
        members = buckets[label]
        shapes = {s.values.shape for s in members}
        if len(shapes) > 1:
            raise ContractViolation(f"label {label} has mixed series shapes: {sorted(shapes)}")
        groups.append(ClassGroup(label, tuple(members)))
    return groups
