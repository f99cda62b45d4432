"""Delimited-text and json-lines table helpers shared by the output writers."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

FORMATS = ("csv", "json-lines")


def fmt_number(x) -> str:
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    return f"{float(x):.15g}"


def write_table(header, rows, path=None, fmt: str = "csv") -> str:
    """Render ``rows`` under ``header``; write to ``path`` when given.

    Floats are printed with 15 significant digits.
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    buf = io.StringIO()
    if fmt == "csv":
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt_number(v) for v in row])
    else:
        for row in rows:
            record = {k: (v if isinstance(v, str) or v is None else float(fmt_number(v)))
                      for k, v in zip(header, row)}
            buf.write(json.dumps(record) + "\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_table(path, fmt: str | None = None):
    """Inverse of :func:`write_table`; returns ``(header, rows)`` with floats where possible."""
    text = Path(path).read_text()
    if fmt is None:
        fmt = "json-lines" if text.lstrip().startswith("{") else "csv"
    if fmt == "json-lines":
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
        header = list(records[0]) if records else []
        return header, [[r[k] for k in header] for r in records]
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = []
    for row in reader:
        parsed = []
        for v in row:
            try:
                parsed.append(float(v))
            except ValueError:
                parsed.append(v)
        rows.append(parsed)
    return header, rows
