"""Tick-file ingestion: session filtering, previous-tick resampling,
and overnight-return removal.

Input files are per-asset CSVs with header ``timestamp,price`` and
ISO-8601 timestamps. Cleaning is deliberately minimal (the inputs are
assumed to be trades): keep in-session rows, collapse duplicate
timestamps to their median price, sample previous-tick onto the common
intraday grid, and anchor each day at its first grid price so no
cross-day increment ever enters the panel.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from ..core.panel import ReturnPanel
from ..errors import DomainError, EmptySession, NonmonotoneTimestamps


def _parse_session(session: tuple[str, str]) -> tuple[int, int]:
    def seconds(hhmm: str) -> int:
        hh, mm = hhmm.split(":")
        return int(hh) * 3600 + int(mm) * 60

    start, end = seconds(session[0]), seconds(session[1])
    if not 0 <= start < end <= 24 * 3600:
        raise DomainError(f"invalid session {session}")
    return start, end


def load_ticks(path: str | Path) -> pd.DataFrame:
    df = pd.read_csv(path)
    cols = [c.strip().lower() for c in df.columns]
    if cols[:2] != ["timestamp", "price"]:
        raise DomainError(f"{path}: expected header 'timestamp,price', got {list(df.columns)}")
    ts = pd.to_datetime(df.iloc[:, 0], format="ISO8601")
    if not ts.is_monotonic_increasing:
        raise NonmonotoneTimestamps(f"{path}: timestamps must be non-decreasing")
    price = pd.to_numeric(df.iloc[:, 1])
    if np.any(~np.isfinite(price)) or np.any(price <= 0.0):
        raise DomainError(f"{path}: prices must be positive and finite")
    return pd.DataFrame({"ts": ts, "price": price.astype(float)})


def _resample_day(day_ticks: pd.DataFrame, grid_secs: np.ndarray) -> np.ndarray:
    """Previous-tick prices on the day's grid; the first grid points are
    backfilled with the day's first trade."""
    secs = (
        day_ticks["ts"].dt.hour * 3600
        + day_ticks["ts"].dt.minute * 60
        + day_ticks["ts"].dt.second
        + day_ticks["ts"].dt.microsecond / 1e6
    ).to_numpy()
    # duplicate timestamps collapse to their median price
    dedup = day_ticks.assign(sec=secs).groupby("sec")["price"].median()
    tick_secs = dedup.index.to_numpy(dtype=float)
    tick_prices = dedup.to_numpy()
    pos = np.searchsorted(tick_secs, grid_secs, side="right") - 1
    pos = np.maximum(pos, 0)  # backfill before the first trade
    return tick_prices[pos]


def load_and_resample(
    files: dict[str, str | Path],
    grid_step_seconds: float = 300.0,
    session: tuple[str, str] = ("09:30", "16:00"),
    factor_labels: tuple[str, ...] = (),
) -> ReturnPanel:
    """Build a synchronized panel of log prices from per-asset tick files.

    Only days on which every asset has at least one in-session trade are
    kept. Each day's first grid price anchors that day, so the panel has
    (grid points - 1) increments per day and none spanning days. Columns
    named in ``factor_labels`` are moved to the back and marked as the
    return factors.
    """
    for label in factor_labels:
        if label not in files:
            raise DomainError(f"factor label {label!r} has no tick file")
    start, end = _parse_session(session)
    span = end - start
    n_grid = int(span // grid_step_seconds) + 1
    grid_secs = start + np.arange(n_grid) * grid_step_seconds

    per_asset: dict[str, dict] = {}
    for label, path in files.items():
        ticks = load_ticks(path)
        secs = (
            ticks["ts"].dt.hour * 3600 + ticks["ts"].dt.minute * 60 + ticks["ts"].dt.second
        ).to_numpy()
        in_sess = (secs >= start) & (secs <= end)
        ticks = ticks[in_sess]
        if not len(ticks):
            raise EmptySession(f"{label}: no in-session observations")
        by_day = dict(tuple(ticks.groupby(ticks["ts"].dt.normalize())))
        per_asset[label] = by_day

    labels = tuple(k for k in files if k not in factor_labels) + tuple(factor_labels)
    common_days = sorted(set.intersection(*(set(v.keys()) for v in per_asset.values())))
    if not common_days:
        raise EmptySession("no common trading days across assets")

    d = len(labels)
    n_days = len(common_days)
    n_obs = n_grid + (n_days - 1) * (n_grid - 1)
    log_prices = np.empty((n_obs, d))
    day_index = np.empty(n_obs, dtype=np.int64)
    for a, label in enumerate(labels):
        row = 0
        level = None
        for k, day in enumerate(common_days):
            prices = _resample_day(per_asset[label][day], grid_secs)
            logp = np.log(prices)
            if k == 0:
                log_prices[row : row + n_grid, a] = logp
                if a == 0:
                    day_index[row : row + n_grid] = 0
                level = logp[-1]
                row += n_grid
            else:
                adj = level + (logp[1:] - logp[0])
                log_prices[row : row + n_grid - 1, a] = adj
                if a == 0:
                    day_index[row : row + n_grid - 1] = k
                level = adj[-1]
                row += n_grid - 1

    delta_n = grid_step_seconds / (252.0 * 6.5 * 3600.0)
    return ReturnPanel(
        labels=labels,
        log_prices=log_prices,
        delta_n=delta_n,
        day_index=day_index,
        factor_count=len(factor_labels),
    )
