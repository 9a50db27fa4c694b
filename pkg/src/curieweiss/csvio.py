"""Plot-ready CSV output: header row, 17 significant digits, ``\\n`` line endings."""

from __future__ import annotations

import io
from typing import Iterable, Sequence


def fmt(x) -> str:
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    try:
        import numpy as np

        if isinstance(x, np.integer):
            return str(int(x))
    except ImportError:  # pragma: no cover
        pass
    return format(float(x), ".17g")


def write_rows(fh: io.TextIOBase, header: Sequence[str], rows: Iterable[Sequence],
               comments: Sequence[str] = ()) -> None:
    for c in comments:
        fh.write(f"# {c}\n")
    fh.write(",".join(header) + "\n")
    for row in rows:
        fh.write(",".join(fmt(v) for v in row) + "\n")


def to_string(header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO(newline="")
    write_rows(buf, header, rows, comments)
    return buf.getvalue()
