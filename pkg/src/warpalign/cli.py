"""Command-line interface: train, align, average, classify, bench.

Reports are written as CSV or JSON with provenance comment headers, and
each report path also renders a matplotlib figure next to the delimited
output (disable with ``--no-figures``). Exit codes: 0 success, 1
validation error, 2 missing input, 3 training failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path
from statistics import median
from typing import Sequence

from . import figures
from .baselines import dba_average
from .data import (
    ClassGroup,
    LabeledDataset,
    equalize_lengths,
    equalize_lengths_to,
    group_by_label,
    parse_ucr_tsv,
)
from .errors import ContractViolation, TrainingError, WarpAlignError
from .losses import LossConfig, mean_pairwise_loss
from .network import NetConfig, load_checkpoint, save_checkpoint
from .pipeline import (
    ClassWarper,
    TrainConfig,
    classify_dba_nn,
    classify_dtw_nn,
    classify_nn,
    classify_ours,
    infer_warp,
    mpce,
    timing_bench,
    train_class_warper,
    warped_average,
)
from .reports import ACCURACY_COLUMNS, TIMING_COLUMNS, atomic_write_text, write_json, write_report

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_MISSING_INPUT = 2
EXIT_TRAINING = 3

_METHOD_ORDER = ("nn", "dtw", "dba", "ours")
_METHOD_COLUMN = {"nn": "base", "dtw": "dtw", "dba": "dba", "ours": "ours"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="warpalign",
        description="Multiple time series alignment toolkit over UCR-format datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("train", "train one warper network per class and save checkpoints"),
        ("align", "warp test signals with trained class warpers"),
        ("average", "emit simple / barycenter / warped class representatives"),
        ("classify", "nearest-neighbor style accuracy comparison"),
        ("bench", "wall-clock comparison against the barycenter baseline"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--data", required=True, help="directory holding <Name>_TRAIN.tsv / <Name>_TEST.tsv")
        cmd.add_argument("--name", required=True, help="dataset name(s), comma-separated")
        cmd.add_argument("--label", type=int, default=None, help="restrict to one class label")
        cmd.add_argument("--method", default="all", choices=["nn", "dtw", "dba", "ours", "all"])
        cmd.add_argument("--epochs", type=int, default=25)
        cmd.add_argument("--checkpoint-every", type=int, default=5)
        cmd.add_argument("--lr", type=float, default=1e-3)
        cmd.add_argument("--lambda1", type=float, default=0.5)
        cmd.add_argument("--lambda2", type=float, default=0.5)
        cmd.add_argument("--k", type=int, default=4, help="warp segment count")
        cmd.add_argument("--substitution-start", type=int, default=6)
        cmd.add_argument("--validation-fraction", type=float, default=0.2)
        cmd.add_argument("--seed", default="0,1,2", help="restart seeds, comma-separated")
        cmd.add_argument("--out", default="warpalign_out", help="output directory")
        cmd.add_argument("--format", default="csv", choices=["csv", "json"])
        cmd.add_argument("--repeat", type=int, default=1, help="bench repetitions (median reported)")
        cmd.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    return parser


def _parse_seeds(raw: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(tok) for tok in str(raw).split(",") if tok.strip() != "")
    except ValueError:
        raise ContractViolation(f"bad seed list {raw!r}") from None
    if not seeds:
        raise ContractViolation("need at least one seed")
    return seeds


def _dataset_names(raw: str) -> list[str]:
    names = [tok.strip() for tok in raw.split(",") if tok.strip()]
    if not names:
        raise ContractViolation("no dataset name given")
    return names


def _resolve_split(data_dir: Path, name: str, split: str) -> Path:
    candidates = [
        data_dir / f"{name}_{split}.tsv",
        data_dir / name / f"{name}_{split}.tsv",
    ]
    for candidate in candidates:
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"no {split} file for dataset {name!r} under {data_dir}")


def _load_equalized(
    data_dir: Path, name: str, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    train = parse_ucr_tsv(_resolve_split(data_dir, name, "TRAIN"))
    test = parse_ucr_tsv(_resolve_split(data_dir, name, "TEST"))
    train = equalize_lengths(train, seed)
    target = train.series[0].length
    test = equalize_lengths_to(test, target, seed ^ 0x7E57)
    return train, test


def _configs(args: argparse.Namespace, input_len: int, input_dim: int):
    net_cfg = NetConfig(input_len=input_len, input_dim=input_dim, k_segments=args.k)
    train_cfg = TrainConfig(
        epochs=args.epochs,
        checkpoint_every=args.checkpoint_every,
        lr=args.lr,
        substitution_start_epoch=args.substitution_start,
        validation_fraction=args.validation_fraction,
        seeds=_parse_seeds(args.seed),
    )
    loss_cfg = LossConfig(lambda1=args.lambda1, lambda2=args.lambda2)
    return net_cfg, train_cfg, loss_cfg


def _provenance(args: argparse.Namespace, name: str) -> dict:
    return {
        "dataset": name,
        "epochs": args.epochs,
        "checkpoint_every": args.checkpoint_every,
        "lr": args.lr,
        "lambda1": args.lambda1,
        "lambda2": args.lambda2,
        "k": args.k,
        "substitution_start": args.substitution_start,
        "validation_fraction": args.validation_fraction,
        "seeds": args.seed,
    }


def _max_workers() -> int:
    raw = os.environ.get("WARPALIGN_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _checkpoint_path(out_dir: Path, name: str, label: int) -> Path:
    return out_dir / f"{name}.{label}.wrpn"


def _warped_tsv_path(out_dir: Path, name: str, label: int) -> Path:
    return out_dir / f"{name}.{label}.warped.tsv"


def _write_warped_tsv(path: Path, group: ClassGroup) -> None:
    lines = []
    for series in group.series:
        values = "\t".join(format(v, ".17g") for v in series.values.reshape(-1))
        lines.append(f"{group.label}\t{values}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def _load_class_warper(out_dir: Path, name: str, label: int) -> ClassWarper:
    ckpt_path = _checkpoint_path(out_dir, name, label)
    warped_path = _warped_tsv_path(out_dir, name, label)
    if not ckpt_path.exists():
        raise FileNotFoundError(f"missing checkpoint {ckpt_path}")
    if not warped_path.exists():
        raise FileNotFoundError(f"missing warped training set {warped_path}")
    checkpoint = load_checkpoint(ckpt_path)
    warped = parse_ucr_tsv(warped_path)
    return ClassWarper(
        label=label,
        network=checkpoint.network,
        warped_group=ClassGroup(label, tuple(warped.series)),
    )


def _select_labels(groups: list[ClassGroup], requested: int | None) -> list[ClassGroup]:
    if requested is None:
        return groups
    matching = [g for g in groups if g.label == requested]
    if not matching:
        known = [g.label for g in groups]
        raise ContractViolation(f"label {requested} not in dataset (labels: {known})")
    return matching


def cmd_train(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = _dataset_names(args.name)[0]
    train, _ = _load_equalized(Path(args.data), name, _parse_seeds(args.seed)[0])
    groups = _select_labels(group_by_label(train), args.label)
    net_cfg, train_cfg, loss_cfg = _configs(args, train.series[0].length, train.series[0].dims)

    def run(group: ClassGroup) -> ClassWarper:
        return train_class_warper(
            group,
            net_cfg,
            train_cfg,
            loss_cfg,
            dataset_name=name,
            checkpoint_dir=out_dir / "checkpoints",
        )

    workers = min(_max_workers(), len(groups))
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            warpers = list(pool.map(run, groups))
    else:
        warpers = [run(g) for g in groups]

    report = {"dataset": name, "config": _provenance(args, name), "classes": []}
    histories = {}
    for group, warper in zip(groups, warpers):
        save_checkpoint(
            warper.network,
            _checkpoint_path(out_dir, name, group.label),
            dataset=name,
            label=group.label,
            epoch=train_cfg.epochs,
            loss=warper.history[-1] if warper.history else float("nan"),
        )
        _write_warped_tsv(_warped_tsv_path(out_dir, name, group.label), warper.warped_group)
        pre = mean_pairwise_loss(group) if len(group) >= 2 else None
        post = mean_pairwise_loss(warper.warped_group) if len(warper.warped_group) >= 2 else None
        report["classes"].append(
            {
                "label": group.label,
                "n_train": len(group),
                "pre_pairwise_loss": pre,
                "post_pairwise_loss": post,
                "loss_history": list(warper.history),
            }
        )
        histories[group.label] = list(warper.history)
        print(f"trained {name} label {group.label}: pre={pre:.4f} post={post:.4f}")
    write_json(out_dir / f"{name}.train_report.json", report)
    if not args.no_figures:
        figures.save_history_figure(
            out_dir / f"{name}.loss_history.png", histories, title=f"{name} training loss"
        )
    return EXIT_OK


def cmd_align(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    name = _dataset_names(args.name)[0]
    train, test = _load_equalized(Path(args.data), name, _parse_seeds(args.seed)[0])
    groups = _select_labels(group_by_label(train), args.label)
    for group in groups:
        warper = _load_class_warper(out_dir, name, group.label)
        indexed = [
            (idx, series)
            for idx, (label, series) in enumerate(test.items)
            if label == group.label
        ]
        if not indexed:
            raise ContractViolation(f"no test signals with label {group.label}")
        rows = []
        originals = []
        warped_list = []
        for idx, series in indexed:
            warped = infer_warp(warper, series)
            originals.append(series.values)
            warped_list.append(warped.values)
            flat = warped.values.reshape(-1)
            rows.extend(
                {"series_id": idx, "t": t, "role": "warped", "value": float(v)}
                for t, v in enumerate(flat)
            )
        out = write_report(
            out_dir / f"{name}.{group.label}.align",
            ("series_id", "t", "role", "value"),
            rows,
            args.format,
            provenance=_provenance(args, name),
        )
        if not args.no_figures:
            figures.save_alignment_figure(
                out.with_suffix(".png"),
                [s.values for s in warper.warped_group.series],
                originals,
                warped_list,
                title=f"{name} label {group.label}",
            )
        print(f"aligned {len(indexed)} test signals for {name} label {group.label} -> {out}")
    return EXIT_OK


def cmd_average(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    name = _dataset_names(args.name)[0]
    train, _ = _load_equalized(Path(args.data), name, _parse_seeds(args.seed)[0])
    groups = _select_labels(group_by_label(train), args.label)
    for group in groups:
        warper = _load_class_warper(out_dir, name, group.label)
        simple = group.stacked().mean(axis=0).reshape(-1)
        dba = dba_average(group).barycenter.values.reshape(-1)
        warped_avg = warped_average(warper).values.reshape(-1)
        members = [s.values.reshape(-1) for s in group.series]
        columns = (
            ["t"]
            + [f"member_{i}" for i in range(len(members))]
            + ["avg_simple", "avg_dba", "avg_warped"]
        )
        rows = []
        for t in range(group.length):
            row = {"t": t, "avg_simple": float(simple[t]), "avg_dba": float(dba[t]),
                   "avg_warped": float(warped_avg[t])}
            for i, member in enumerate(members):
                row[f"member_{i}"] = float(member[t])
            rows.append(row)
        out = write_report(
            out_dir / f"{name}.{group.label}.average",
            columns,
            rows,
            args.format,
            provenance=_provenance(args, name),
        )
        if not args.no_figures:
            figures.save_average_figure(
                out.with_suffix(".png"),
                members,
                simple,
                dba,
                [s.values for s in warper.warped_group.series],
                warped_avg,
                title=f"{name} label {group.label}",
            )
        print(f"averages for {name} label {group.label} -> {out}")
    return EXIT_OK


def _classify_one(
    args: argparse.Namespace, name: str, methods: list[str]
) -> tuple[list[dict], dict]:
    out_dir = Path(args.out)
    train, test = _load_equalized(Path(args.data), name, _parse_seeds(args.seed)[0])
    groups = group_by_label(train)
    n_classes = len(groups)
    loss_cfg = LossConfig(lambda1=args.lambda1, lambda2=args.lambda2)

    method_rows = []
    table_row: dict = {"dataset": name}
    table_row["cs_org"] = mean_pairwise_loss(train.series) if len(train) >= 2 else None
    for method in methods:
        start = time.perf_counter()
        if method == "nn":
            acc = classify_nn(train, test)
        elif method == "dtw":
            acc = classify_dtw_nn(train, test)
        elif method == "dba":
            acc = classify_dba_nn(train, test)
        else:
            warpers = [_load_class_warper(out_dir, name, g.label) for g in groups]
            acc = classify_ours(warpers, test, loss_cfg)
            all_warped = [s for w in warpers for s in w.warped_group.series]
            table_row["cs_warp"] = (
                mean_pairwise_loss(all_warped) if len(all_warped) >= 2 else None
            )
        elapsed = time.perf_counter() - start
        method_rows.append(
            {
                "dataset": name,
                "method": method,
                "accuracy": acc,
                "seconds": elapsed,
                "n_classes": n_classes,
            }
        )
        table_row[_METHOD_COLUMN[method]] = acc
        print(f"{name} {method}: accuracy={acc:.4f} ({elapsed:.2f}s)")
    return method_rows, table_row


def cmd_classify(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = _dataset_names(args.name)
    methods = list(_METHOD_ORDER) if args.method == "all" else [args.method]
    all_method_rows: list[dict] = []
    table_rows: list[dict] = []
    for name in names:
        method_rows, table_row = _classify_one(args, name, methods)
        all_method_rows.extend(method_rows)
        table_rows.append(table_row)
        if not args.no_figures:
            figures.save_accuracy_figure(
                out_dir / f"{name}.accuracy.png",
                {row["method"]: row["accuracy"] for row in method_rows},
                title=f"{name} accuracy",
            )
    if len(names) > 1:
        summary: dict = {"dataset": "MPCE", "cs_org": None, "cs_warp": None}
        for method in methods:
            entries = [
                (row["accuracy"], row["n_classes"])
                for row in all_method_rows
                if row["method"] == method
            ]
            summary[_METHOD_COLUMN[method]] = mpce(entries)
        table_rows.append(summary)
    provenance = _provenance(args, ",".join(names))
    write_report(
        out_dir / "classify_methods",
        ("dataset", "method", "accuracy", "seconds"),
        all_method_rows,
        args.format,
        provenance=provenance,
    )
    write_report(
        out_dir / "classify_accuracy",
        ACCURACY_COLUMNS,
        table_rows,
        args.format,
        provenance=provenance,
    )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = _dataset_names(args.name)[0]
    train, test = _load_equalized(Path(args.data), name, _parse_seeds(args.seed)[0])
    groups = _select_labels(group_by_label(train), args.label)
    net_cfg, train_cfg, loss_cfg = _configs(args, train.series[0].length, train.series[0].dims)
    if args.repeat < 1:
        raise ContractViolation("--repeat must be >= 1")
    rows = []
    for group in groups:
        samples = [
            timing_bench(train, test, group.label, net_cfg, train_cfg, loss_cfg)
            for _ in range(args.repeat)
        ]
        rows.append(
            {
                "dataset": name,
                "label": group.label,
                "n_train": samples[0].n_train,
                "our_train_s": median(s.our_train_s for s in samples),
                "our_test_s": median(s.our_test_s for s in samples),
                "our_whole_s": median(s.our_whole_s for s in samples),
                "dba_whole_s": median(s.dba_whole_s for s in samples),
            }
        )
        print(
            f"bench {name} label {group.label}: ours={rows[-1]['our_whole_s']:.3f}s "
            f"dba={rows[-1]['dba_whole_s']:.3f}s"
        )
    out = write_report(
        out_dir / f"{name}.bench",
        TIMING_COLUMNS,
        rows,
        args.format,
        provenance=_provenance(args, name),
    )
    if not args.no_figures:
        figures.save_timing_figure(out.with_suffix(".png"), rows, title=f"{name} timing")
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "align": cmd_align,
    "average": cmd_average,
    "classify": cmd_classify,
    "bench": cmd_bench,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage problems; those are validation errors here
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except TrainingError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except WarpAlignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
