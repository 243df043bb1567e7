"""
CSV tables and JSON-line summaries.

Output carries no timestamps and uses a fixed key order, so identical
inputs give byte-identical files.
"""
import csv
import json
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional, TextIO

import numpy as np
from pydantic import BaseModel


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; complex numbers become [re, im]."""
    if isinstance(value, BaseModel):
        return {k: to_jsonable(v) for k, v in value}
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def json_line(record: Any) -> str:
    return json.dumps(to_jsonable(record), sort_keys=True, allow_nan=True)


@contextmanager
def open_sink(path: Optional[str | Path]) -> Iterator[TextIO]:
    """The file at path, or stdout when path is None or '-'."""
    if path is None or str(path) == "-":
        yield sys.stdout
        return
    with open(path, "w", newline="") as handle:
        yield handle


def write_json_lines(records: Iterable[Any], sink: TextIO) -> None:
    for record in records:
        sink.write(json_line(record) + "\n")


def write_csv(header: list[str], rows: Iterable[Iterable[Any]], sink: TextIO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(list(row))


def cover_rows(disks) -> tuple[list[str], list[list[Any]]]:
    """Cover disks as CSV; complex centers are split into (re, im)."""
    if disks and isinstance(disks[0].center, complex):
        header = ["center_re", "center_im", "radius", "branch_count", "seq_hash"]
        rows = [[d.center.real, d.center.imag, d.radius, d.branch_count, d.seq_hash] for d in disks]
    else:
        header = ["center", "radius", "branch_count", "seq_hash"]
        rows = [[float(d.center), d.radius, d.branch_count, d.seq_hash] for d in disks]
    return header, rows
