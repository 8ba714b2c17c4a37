"""CSV writing shared by path and density exports."""

from __future__ import annotations

import csv
import io
from pathlib import Path


def write_csv(target, header, rows) -> None:
    """Write rows to a path or text file-like; values via repr-precision str."""
    if hasattr(target, "write"):
        writer = csv.writer(target, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    else:
        with open(Path(target), "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)


def csv_text(header, rows) -> str:
    """Same output as :func:`write_csv`, returned as a string."""
    buffer = io.StringIO()
    write_csv(buffer, header, rows)
    return buffer.getvalue()
