"""Grouped alignment training, inference, classifiers, and benchmark metrics.

Training runs one warper network per class group: every signal is warped,
scored against the rest of the group with the penalized signed-square
loss, and updated one optimizer step at a time. After a configurable
warm-up epoch each signal's working copy is replaced by its warped version
immediately after its update, so alignment compounds within an epoch.
Restarts and periodic snapshots are ranked by held-out alignment loss.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import dba_average, dtw, dtw_distance_to_set
from .data import ClassGroup, LabeledDataset, Series, group_by_label
from .errors import ContractViolation, TrainingError
from .losses import (
    LossConfig,
    alignment_loss_and_grad,
    mean_pairwise_loss,
    signed_square_loss,
)
from .network import NetConfig, WarperNetwork, init_network, save_checkpoint
from .warp import PiecewiseLinearWarp, apply_warp, build_soft_matrix, normalize_durations

__all__ = [
    "TrainConfig",
    "ClassWarper",
    "AlignmentReport",
    "ClassAlignmentStats",
    "TimingRow",
    "train_class_warper",
    "infer_warp",
    "warped_average",
    "classify_nn",
    "classify_dtw_nn",
    "classify_dba_nn",
    "classify_ours",
    "mpce",
    "mtsa_objective",
    "timing_bench",
]


@dataclass(frozen=True)
class TrainConfig:
    """Training-loop hyperparameters; defaults follow the experiment setup."""

    epochs: int = 25
    checkpoint_every: int = 5
    lr: float = 1e-3
    substitution_start_epoch: int = 6
    validation_fraction: float = 0.2
    seeds: tuple[int, ...] = (0, 1, 2)

    def __post_init__(self) -> None:
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if self.epochs < 1:
            raise ContractViolation("epochs must be >= 1")
        if not 1 <= self.checkpoint_every <= self.epochs:
            raise ContractViolation("checkpoint interval must lie in [1, epochs]")
        if not 0 <= self.validation_fraction < 1:
            raise ContractViolation("validation fraction must lie in [0, 1)")
        if self.substitution_start_epoch < 1:
            raise ContractViolation("substitution start epoch must be >= 1")
        if not self.seeds:
            raise ContractViolation("need at least one restart seed")
        if self.lr <= 0:
            raise ContractViolation("learning rate must be positive")


@dataclass
class ClassWarper:
    """A trained per-class warper with its aligned training set."""

    label: int
    network: WarperNetwork
    warped_group: ClassGroup
    history: tuple[float, ...] = ()

    def warp_params(self, series: Series) -> PiecewiseLinearWarp:
        slopes, raw_t, _ = self.network.forward(series)
        durations = normalize_durations(raw_t, self.network.config.input_len)
        return PiecewiseLinearWarp(slopes, durations, self.network.config.input_len)


@dataclass(frozen=True)
class ClassAlignmentStats:
    label: int
    pre_loss: float
    post_loss: float | None = None


@dataclass
class AlignmentReport:
    """Per-dataset results container used by the report writers."""

    dataset: str
    per_class: list[ClassAlignmentStats] = field(default_factory=list)
    accuracies: dict[str, float] = field(default_factory=dict)
    train_seconds: float | None = None
    test_seconds: float | None = None
    mpce: float | None = None
    cs_org: float | None = None
    cs_warp: float | None = None


@dataclass(frozen=True)
class TimingRow:
    """One row of the train/test wall-clock comparison table."""

    dataset: str
    label: int
    n_train: int
    our_train_s: float
    our_test_s: float
    our_whole_s: float
    dba_whole_s: float


def _split_validation(n: int, fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Stable train/holdout index split; holdout may be empty for tiny groups."""
    val_count = int(n * fraction)
    val_count = min(val_count, n - 2)
    if val_count <= 0:
        return list(range(n)), []
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, 0x5EED])
    order = rng.permutation(n)
    val = sorted(int(i) for i in order[:val_count])
    train = sorted(int(i) for i in order[val_count:])
    return train, val


def _warp_values(net: WarperNetwork, values: np.ndarray) -> np.ndarray:
    slopes, raw_t, _ = net.forward(Series(values))
    out_len = net.config.input_len
    warp = PiecewiseLinearWarp(slopes, normalize_durations(raw_t, out_len), out_len)
    return apply_warp(build_soft_matrix(warp, values.shape[1]), Series(values)).values


def _mean_alignment_loss(
    warped: np.ndarray, others: Sequence[np.ndarray], epsilon: float
) -> float:
    total = 0.0
    for other in others:
        rows = [
            signed_square_loss(warped[r], other[r], epsilon) for r in range(warped.shape[0])
        ]
        total += float(np.mean(rows))
    return total / len(others)


def _validation_loss(
    net: WarperNetwork,
    holdout: Sequence[np.ndarray],
    working: Sequence[np.ndarray],
    epsilon: float,
) -> float:
    losses = [
        _mean_alignment_loss(_warp_values(net, values), working, epsilon)
        for values in holdout
    ]
    return float(np.mean(losses))


@dataclass
class _Snapshot:
    metric: float
    seed: int
    epoch: int
    loss: float
    network: WarperNetwork
    working: list[np.ndarray]


def train_class_warper(
    group: ClassGroup,
    net_cfg: NetConfig,
    train_cfg: TrainConfig,
    loss_cfg: LossConfig,
    *,
    dataset_name: str = "",
    checkpoint_dir: str | Path | None = None,
) -> ClassWarper:
    """Train a warper network on one class group.

    Runs one restart per configured seed; snapshots every
    ``checkpoint_every`` epochs are scored by alignment loss on the
    held-out fraction (falling back to training loss when the group is too
    small to hold anything out) and the best snapshot wins. Held-out
    members join the returned warped group through a single inference
    pass so the group keeps its original size and order.
    """
    n = len(group)
    if n < 2:
        raise ContractViolation(f"group {group.label} needs >= 2 members, has {n}")
    if group.length != net_cfg.input_len:
        raise ContractViolation(
            f"group length {group.length} != network input length {net_cfg.input_len}"
        )
    out_len = net_cfg.input_len
    train_idx, val_idx = _split_validation(
        n, train_cfg.validation_fraction, train_cfg.seeds[0]
    )
    originals = [s.values.copy() for s in group.series]
    holdout = [originals[i] for i in val_idx]

    best: _Snapshot | None = None
    best_history: tuple[float, ...] = ()
    for seed in train_cfg.seeds:
        net = init_network(net_cfg, seed)
        working = [originals[i].copy() for i in train_idx]
        history: list[float] = []
        for epoch in range(1, train_cfg.epochs + 1):
            epoch_losses = []
            for pos in range(len(working)):
                slopes, raw_t, tape = net.forward(Series(working[pos]))
                targets = [working[j] for j in range(len(working)) if j != pos]
                loss, g_slopes, g_raw, warped = alignment_loss_and_grad(
                    working[pos], targets, slopes, raw_t, out_len, loss_cfg
                )
                if not np.isfinite(loss):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}, signal {pos} "
                        f"(label {group.label}, seed {seed})"
                    )
                grads = net.backward(tape, (g_slopes, g_raw))
                net.step(grads, train_cfg.lr)
                if epoch >= train_cfg.substitution_start_epoch:
                    working[pos] = warped
                epoch_losses.append(loss)
            history.append(float(np.mean(epoch_losses)))
            if epoch % train_cfg.checkpoint_every == 0:
                if holdout:
                    metric = _validation_loss(net, holdout, working, loss_cfg.epsilon)
                else:
                    metric = history[-1]
                snap = _Snapshot(
                    metric=metric,
                    seed=seed,
                    epoch=epoch,
                    loss=history[-1],
                    network=net.clone(),
                    working=[w.copy() for w in working],
                )
                if checkpoint_dir is not None:
                    path = Path(checkpoint_dir) / (
                        f"{dataset_name or 'dataset'}.{group.label}"
                        f".seed{seed}.epoch{epoch}.wrpn"
                    )
                    save_checkpoint(
                        snap.network,
                        path,
                        dataset=dataset_name,
                        label=group.label,
                        epoch=epoch,
                        loss=history[-1],
                    )
                if best is None or snap.metric < best.metric:
                    best = snap
                    best_history = tuple(history)
        if best is not None and best.seed == seed:
            best_history = tuple(history)

    assert best is not None  # epochs >= checkpoint_every guarantees a snapshot
    final_values: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for slot, original_index in enumerate(train_idx):
        final_values[original_index] = best.working[slot]
    for original_index in val_idx:
        final_values[original_index] = _warp_values(best.network, originals[original_index])
    warped_group = ClassGroup(group.label, tuple(Series(v) for v in final_values))
    return ClassWarper(
        label=group.label,
        network=best.network,
        warped_group=warped_group,
        history=best_history,
    )


def infer_warp(warper: ClassWarper, test: Series) -> Series:
    """Warp a test series with a trained class warper (no gradients)."""
    cfg = warper.network.config
    if test.length != cfg.input_len:
        raise ContractViolation(
            f"test length {test.length} != trained length {cfg.input_len}"
        )
    return Series(_warp_values(warper.network, test.values))


def warped_average(warper: ClassWarper) -> Series:
    """Arithmetic mean of the final warped training group."""
    return Series(warper.warped_group.stacked().mean(axis=0))


def _euclidean_nn_accuracy(train: LabeledDataset, test: LabeledDataset) -> float:
    train_mat = np.stack([s.values.reshape(-1) for s in train.series])
    test_mat = np.stack([s.values.reshape(-1) for s in test.series])
    train_labels = np.asarray(train.labels)
    correct = 0
    for row, label in zip(test_mat, test.labels):
        dists = np.linalg.norm(train_mat - row, axis=1)
        correct += int(train_labels[int(np.argmin(dists))] == label)
    return correct / len(test)


def classify_nn(train: LabeledDataset, test: LabeledDataset) -> float:
    """Euclidean 1-nearest-neighbor accuracy (ties -> lowest train index)."""
    if len(train) == 0 or len(test) == 0:
        raise ContractViolation("train and test sets must be non-empty")
    return _euclidean_nn_accuracy(train, test)


def classify_dtw_nn(train: LabeledDataset, test: LabeledDataset) -> float:
    """1-nearest-neighbor accuracy with DTW distance in place of Euclidean."""
    if len(train) == 0 or len(test) == 0:
        raise ContractViolation("train and test sets must be non-empty")
    labels = train.labels
    correct = 0
    for test_label, series in zip(test.labels, test.series):
        best = np.inf
        best_idx = 0
        for idx, member in enumerate(train.series):
            d = dtw(series, member).distance
            if d < best:
                best = d
                best_idx = idx
        correct += int(labels[best_idx] == test_label)
    return correct / len(test)


def classify_dba_nn(
    train: LabeledDataset,
    test: LabeledDataset,
    max_iter: int = 30,
    tol: float = 1e-6,
) -> float:
    """Nearest-centroid accuracy with one barycenter per class."""
    if len(train) == 0 or len(test) == 0:
        raise ContractViolation("train and test sets must be non-empty")
    groups = group_by_label(train)
    centroids = [
        (g.label, dba_average(g, max_iter=max_iter, tol=tol).barycenter) for g in groups
    ]
    correct = 0
    for test_label, series in zip(test.labels, test.series):
        best = np.inf
        best_label = centroids[0][0]
        for label, centroid in centroids:
            d = dtw(series, centroid).distance
            if d < best:
                best = d
                best_label = label
        correct += int(best_label == test_label)
    return correct / len(test)


def classify_ours(
    warpers: Sequence[ClassWarper],
    test: LabeledDataset,
    loss_cfg: LossConfig | None = None,
) -> float:
    """Assign each test series to the class whose warper aligns it best.

    The candidate series is warped by every class warper and scored with
    the signed-square loss against that class's warped average; the lowest
    loss wins (ties -> lowest label).
    """
    if not warpers:
        raise ContractViolation("need at least one class warper")
    loss_cfg = loss_cfg or LossConfig()
    ordered = sorted(warpers, key=lambda w: w.label)
    known = {w.label for w in ordered}
    missing = sorted(set(test.labels) - known)
    if missing:
        raise ContractViolation(f"no trained warper for labels {missing}")
    averages = [(w.label, warped_average(w).values) for w in ordered]
    correct = 0
    for test_label, series in zip(test.labels, test.series):
        best = np.inf
        best_label = averages[0][0]
        for warper, (label, avg) in zip(ordered, averages):
            warped = infer_warp(warper, series).values
            rows = [
                signed_square_loss(warped[r], avg[r], loss_cfg.epsilon)
                for r in range(warped.shape[0])
            ]
            loss = float(np.mean(rows))
            if loss < best:
                best = loss
                best_label = label
        correct += int(best_label == test_label)
    return correct / len(test)


def mpce(accuracies: Sequence[tuple[float, int]]) -> float:
    """Mean per-class error across datasets: mean of (1 - acc) / class count."""
    if not accuracies:
        raise ContractViolation("need at least one (accuracy, class_count) entry")
    terms = []
    for acc, n_classes in accuracies:
        if not 0.0 <= acc <= 1.0 or n_classes < 1:
            raise ContractViolation(f"bad entry ({acc}, {n_classes})")
        terms.append((1.0 - acc) / n_classes)
    return float(np.mean(terms))


def mtsa_objective(series_set: Sequence[Series], form: str = "matrix") -> float:
    """Sum of squared Frobenius distances over all ordered pairs.

    The matrix and function-composition formulations coincide once the
    warps are realized, so ``form`` only labels the provenance of the
    inputs. Diagnostic: the trainer does not optimize this quantity.
    """
    if form not in ("matrix", "functional"):
        raise ContractViolation(f"unknown objective form {form!r}")
    stacked = np.stack([s.values for s in series_set]).reshape(len(series_set), -1)
    n = stacked.shape[0]
    sq_norms = float(np.sum(stacked * stacked))
    total = stacked.sum(axis=0)
    return float(2.0 * n * sq_norms - 2.0 * float(np.dot(total, total)))


def timing_bench(
    train_dataset: LabeledDataset,
    test_dataset: LabeledDataset,
    label: int,
    net_cfg: NetConfig | None = None,
    train_cfg: TrainConfig | None = None,
    loss_cfg: LossConfig | None = None,
    dba_max_iter: int = 30,
) -> TimingRow:
    """Wall-clock comparison: our train+infer versus DBA + per-test DTW."""
    groups = {g.label: g for g in group_by_label(train_dataset)}
    if label not in groups:
        raise ContractViolation(f"label {label} not present in training data")
    group = groups[label]
    net_cfg = net_cfg or NetConfig(input_len=group.length, input_dim=group.dims)
    train_cfg = train_cfg or TrainConfig()
    loss_cfg = loss_cfg or LossConfig()
    test_series = [s for lab, s in test_dataset.items if lab == label] or list(
        test_dataset.series
    )

    start = time.perf_counter()
    warper = train_class_warper(
        group, net_cfg, train_cfg, loss_cfg, dataset_name=train_dataset.name
    )
    our_train = time.perf_counter() - start

    start = time.perf_counter()
    for series in test_series:
        infer_warp(warper, series)
    our_test = time.perf_counter() - start

    start = time.perf_counter()
    state = dba_average(group, max_iter=dba_max_iter)
    for series in test_series:
        dtw(series, state.barycenter)
    dba_whole = time.perf_counter() - start

    return TimingRow(
        dataset=train_dataset.name,
        label=label,
        n_train=len(group),
        our_train_s=our_train,
        our_test_s=our_test,
        our_whole_s=our_train + our_test,
        dba_whole_s=dba_whole,
    )
