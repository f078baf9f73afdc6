"""CSV emission helpers.

All report files share one contract: comma-delimited, UTF-8, LF line endings,
floats printed with 10 significant digits. Keeping the formatting in one place
is what makes byte-identical reruns cheap to guarantee.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence


def fmt_float(x: float) -> str:
    """Render a float with 10 significant digits (negative zero canonicalized)."""
    x = float(x)
    if x == 0.0:
        x = 0.0
    return format(x, ".10g")


def fmt_cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return fmt_float(value)
    return str(value)


def write_csv(
    path: str | Path,
    header: Sequence[str],
    rows: Iterable[Sequence],
    footer_comments: Sequence[str] = (),
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt_cell(v) for v in row])
        for comment in footer_comments:
            fh.write(f"# {comment}\n")
