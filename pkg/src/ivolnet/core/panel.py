"""Synchronized high-frequency return panels.

A panel holds log prices on a regular intraday grid with overnight
returns already removed, so consecutive observations always differ by
one within-day step. The last ``factor_count`` columns are the observable
return factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, DomainError


@dataclass(frozen=True)
class ReturnPanel:
    """Grid of d log-price series sampled every ``delta_n`` years.

    Attributes:
        labels: asset identifiers, stocks first, factors last.
        log_prices: (n+1, d) array of log prices.
        delta_n: sampling step in years.
        day_index: (n+1,) integer day id per observation; increment i
            (from row i-1 to row i) belongs to day ``day_index[i]``.
        factor_count: number of trailing factor columns.
    """

    labels: tuple[str, ...]
    log_prices: np.ndarray
    delta_n: float
    day_index: np.ndarray
    factor_count: int = 0

    def __post_init__(self):
        lp = np.asarray(self.log_prices, dtype=float)
        di = np.asarray(self.day_index, dtype=np.int64)
        object.__setattr__(self, "log_prices", lp)
        object.__setattr__(self, "day_index", di)
        if lp.ndim != 2:
            raise DimensionMismatch("log_prices must be a 2-d (n+1, d) array")
        if lp.shape[1] != len(self.labels):
            raise DimensionMismatch(
                f"{len(self.labels)} labels but {lp.shape[1]} price columns"
            )
        if lp.shape[0] < 2:
            raise DomainError("panel needs at least two observations")
        if not np.all(np.isfinite(lp)):
            raise DomainError("log_prices contain non-finite cells")
        if di.shape != (lp.shape[0],):
            raise DimensionMismatch("day_index must have one entry per observation")
        if np.any(np.diff(di) < 0):
            raise DomainError("day_index must be non-decreasing")
        if not 0 <= self.factor_count <= lp.shape[1]:
            raise DomainError("factor_count out of range")
        if self.delta_n <= 0:
            raise DomainError("delta_n must be positive")

    @property
    def d(self) -> int:
        return self.log_prices.shape[1]

    @property
    def d_stocks(self) -> int:
        return self.d - self.factor_count

    @property
    def n_increments(self) -> int:
        return self.log_prices.shape[0] - 1

    @property
    def factor_indices(self) -> tuple[int, ...]:
        return tuple(range(self.d_stocks, self.d))

    def increments(self) -> np.ndarray:
        """(n, d) array of one-step log returns."""
        return np.diff(self.log_prices, axis=0)

    def increment_days(self) -> np.ndarray:
        """(n,) day id of each increment (day of its right endpoint)."""
        return self.day_index[1:]

    def subset(self, stocks: list[int] | tuple[int, ...]) -> "ReturnPanel":
        """Panel restricted to the given stock columns plus all factor columns."""
        stocks = list(stocks)
        if any(not 0 <= j < self.d_stocks for j in stocks):
            raise DomainError(f"stock indices {stocks} out of range [0, {self.d_stocks})")
        cols = stocks + list(self.factor_indices)
        return ReturnPanel(
            labels=tuple(self.labels[c] for c in cols),
            log_prices=self.log_prices[:, cols],
            delta_n=self.delta_n,
            day_index=self.day_index,
            factor_count=self.factor_count,
        )
