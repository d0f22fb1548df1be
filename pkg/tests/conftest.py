"""Shared fixtures and synthetic data builders."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from warpalign.data import ClassGroup, LabeledDataset, Series

TESTS_DIR = Path(__file__).parent


def gunpoint_dir() -> Path | None:
    """Directory holding GunPoint_TRAIN.tsv / GunPoint_TEST.tsv, if present.

    Checked locations: $WARPALIGN_UCR_DIR (optionally with a GunPoint
    subdirectory) and tests/data/GunPoint.
    """
    candidates = []
    env = os.environ.get("WARPALIGN_UCR_DIR")
    if env:
        candidates += [Path(env), Path(env) / "GunPoint"]
    candidates.append(TESTS_DIR / "data" / "GunPoint")
    for root in candidates:
        if (root / "GunPoint_TRAIN.tsv").exists() and (root / "GunPoint_TEST.tsv").exists():
            return root
    return None


def bump(grid: np.ndarray, center: float, width: float, amp: float = 1.0) -> np.ndarray:
    return amp * np.exp(-0.5 * ((grid - center) / width) ** 2)


def make_bump_group(
    n: int, length: int, seed: int, max_shift_frac: float = 0.10, label: int = 1
) -> ClassGroup:
    """Gaussian bumps with random temporal shifts, one class."""
    rng = np.random.default_rng(seed)
    grid = np.arange(length, dtype=float)
    members = []
    for _ in range(n):
        shift = rng.uniform(-max_shift_frac * length, max_shift_frac * length)
        members.append(Series(bump(grid, length / 2 + shift, length / 12)))
    return ClassGroup(label, tuple(members))


def make_two_class_dataset(
    n_train_per_class: int, n_test_per_class: int, length: int, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Separable bump-vs-ramp toy problem with random shifts."""
    rng = np.random.default_rng(seed)
    grid = np.arange(length, dtype=float)

    def make_bump() -> Series:
        return Series(bump(grid, length / 2 + rng.uniform(-5, 5), length / 14))

    def make_ramp() -> Series:
        shift = rng.uniform(-4, 4)
        return Series(np.clip((grid - shift) / (0.6 * length), 0.0, 1.0))

    def build(n: int, name: str) -> LabeledDataset:
        items = []
        for _ in range(n):
            items.append((1, make_bump()))
            items.append((2, make_ramp()))
        return LabeledDataset(tuple(items), name=name)

    return build(n_train_per_class, "Toy"), build(n_test_per_class, "Toy")


def write_ucr_tsv(path: Path, dataset: LabeledDataset) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label, series in dataset.items:
            values = "\t".join(format(v, ".10g") for v in series.values.reshape(-1))
            fh.write(f"{label}\t{values}\n")


@pytest.fixture
def toy_dataset_dir(tmp_path: Path) -> Path:
    """UCR-layout directory with a small separable two-class dataset."""
    train, test = make_two_class_dataset(6, 5, 48, seed=11)
    write_ucr_tsv(tmp_path / "Toy_TRAIN.tsv", train)
    write_ucr_tsv(tmp_path / "Toy_TEST.tsv", test)
    return tmp_path
