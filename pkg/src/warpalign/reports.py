"""CSV/JSON report emission with provenance headers and atomic writes."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Mapping, Sequence

ACCURACY_COLUMNS = ("dataset", "base", "dtw", "dba", "ours", "cs_org", "cs_warp")
TIMING_COLUMNS = (
    "dataset",
    "label",
    "n_train",
    "our_train_s",
    "our_test_s",
    "our_whole_s",
    "dba_whole_s",
)

__all__ = [
    "ACCURACY_COLUMNS",
    "TIMING_COLUMNS",
    "atomic_write_text",
    "write_csv",
    "write_json",
    "write_report",
]


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a sibling temp file and rename so readers never see partials."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def write_csv(
    path: str | Path,
    columns: Sequence[str],
    rows: Sequence[Mapping[str, Any]],
    provenance: Mapping[str, Any] | None = None,
) -> None:
    """Write rows with a fixed column order and '#'-prefixed provenance lines."""
    buf = io.StringIO()
    for key, value in (provenance or {}).items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(row.get(col)) for col in columns])
    atomic_write_text(path, buf.getvalue())


def write_json(path: str | Path, payload: Any) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_report(
    path_base: str | Path,
    columns: Sequence[str],
    rows: Sequence[Mapping[str, Any]],
    fmt: str,
    provenance: Mapping[str, Any] | None = None,
) -> Path:
    """Emit rows as ``<base>.csv`` or ``<base>.json`` depending on ``fmt``."""
    base = Path(path_base)
    if fmt == "csv":
        out = base.parent / (base.name + ".csv")
        write_csv(out, columns, rows, provenance)
    else:
        out = base.parent / (base.name + ".json")
        payload = {
            "provenance": dict(provenance or {}),
            "columns": list(columns),
            "rows": [
                {col: row.get(col) for col in columns}
                for row in rows
            ],
        }
        write_json(out, payload)
    return out
