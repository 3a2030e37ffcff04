"""Bit-exact CSV serialization of return panels.

Floats are written with ``repr`` so parsing recovers the identical bits;
the round trip panel -> CSV -> panel is an equality of arrays, not an
approximation.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..core.panel import ReturnPanel
from ..errors import DomainError

_MAGIC = "# ivolnet panel v1"


def panel_to_csv(panel: ReturnPanel, path: str | Path) -> None:
    lines = [
        _MAGIC,
        f"# delta_n={panel.delta_n!r}",
        f"# factor_count={panel.factor_count}",
        "day," + ",".join(panel.labels),
    ]
    for day, row in zip(panel.day_index, panel.log_prices):
        lines.append(str(int(day)) + "," + ",".join(repr(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def panel_from_csv(path: str | Path) -> ReturnPanel:
    text = Path(path).read_text().splitlines()
    if len(text) < 5 or text[0] != _MAGIC:
        raise DomainError(f"{path} is not a panel file (missing header)")
    if not text[1].startswith("# delta_n=") or not text[2].startswith("# factor_count="):
        raise DomainError(f"{path}: malformed metadata header")
    delta_n = float(text[1].split("=", 1)[1])
    factor_count = int(text[2].split("=", 1)[1])
    header = text[3].split(",")
    if header[0] != "day":
        raise DomainError(f"{path}: first column must be 'day'")
    labels = tuple(header[1:])
    days, rows = [], []
    for line in text[4:]:
        if not line:
            continue
        parts = line.split(",")
        days.append(int(parts[0]))
        rows.append([float(x) for x in parts[1:]])
    return ReturnPanel(
        labels=labels,
        log_prices=np.array(rows, dtype=float),
        delta_n=delta_n,
        day_index=np.array(days, dtype=np.int64),
        factor_count=factor_count,
    )
