"""Spot covariance estimation with price-jump truncation and vol-jump events.

The local estimator averages outer products of kept one-step returns over
a forward window of k_n observations. An increment is kept only if every
asset's component stays below that asset's day-local threshold; otherwise
the whole d-vector is zeroed, so a jump in any one series removes the
increment for all series.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core.config import EstimatorConfig
from .core.panel import ReturnPanel
from .core.paths import SpotCovPath, VolJumpMask
from .errors import (
    DomainError,
    NonPositiveThreshold,
    PanelTooShort,
    TooFewObservations,
)


def bipower_sigma2(returns: np.ndarray, delta_n: float) -> float:
    """Annualized bipower variation of one asset-day.

    With m one-step returns r_1..r_m the estimate is
    (pi/2) * sum_{i=2..m} |r_i| |r_{i-1}| / ((m - 1) * delta_n),
    which is robust to price jumps.
    """
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1:
        raise DomainError("bipower_sigma2 expects a 1-d return vector")
    m = r.shape[0]
    if m < 2:
        raise TooFewObservations(f"bipower needs at least 2 increments, got {m}")
    a = np.abs(r)
    return float((np.pi / 2.0) * np.sum(a[1:] * a[:-1]) / ((m - 1) * delta_n))


@dataclass(frozen=True)
class TruncationThresholds:
    """Per-day, per-asset price-truncation levels.

    ``u[k, a]`` applies to increments of asset ``a`` on day ``days[k]``.
    """

    days: np.ndarray      # (K,) sorted unique day ids
    u: np.ndarray         # (K, d)

    def __post_init__(self):
        days = np.asarray(self.days, dtype=np.int64)
        u = np.asarray(self.u, dtype=float)
        object.__setattr__(self, "days", days)
        object.__setattr__(self, "u", u)
        if u.shape[0] != days.shape[0]:
            raise DomainError("one threshold row per day required")
        if np.any(~np.isfinite(u)) or np.any(u <= 0.0):
            raise NonPositiveThreshold("all truncation thresholds must be positive and finite")

    def per_increment(self, increment_days: np.ndarray) -> np.ndarray:
        """(n, d) thresholds aligned with the panel's increments."""
        pos = np.searchsorted(self.days, increment_days)
        if np.any(pos >= len(self.days)) or np.any(self.days[pos] != increment_days):
            raise DomainError("increments reference days with no threshold")
        return self.u[pos]


def compute_thresholds(panel: ReturnPanel, cfg: EstimatorConfig) -> TruncationThresholds:
    """Day-local thresholds trunc_mult * sigma_hat * delta_n^varpi per asset.

    sigma_hat is the square root of the asset's annualized bipower
    variation over that day; adjacent-return products never span days.
    """
    incr = panel.increments()
    days = panel.increment_days()
    uniq, starts = np.unique(days, return_index=True)
    counts = np.diff(np.append(starts, incr.shape[0]))
    if np.any(counts < 2):
        bad = uniq[counts < 2]
        raise TooFewObservations(f"days {bad.tolist()} have fewer than 2 increments")

    a = np.abs(incr)
    prod = a[1:] * a[:-1]                      # (n-1, d) adjacent products
    sums = np.add.reduceat(prod, starts, axis=0)
    # a reduceat block [s_k, s_{k+1}) ends with the cross-day product; drop it
    cross = starts[1:] - 1
    sums[:-1] -= prod[cross]
    sigma2 = (np.pi / 2.0) * sums / ((counts - 1)[:, None] * panel.delta_n)
    u = cfg.trunc_mult * panel.delta_n**cfg.varpi * np.sqrt(sigma2)
    if np.any(u <= 0.0):
        raise NonPositiveThreshold(
            "zero bipower variation on some asset-day; cannot form a truncation threshold"
        )
    return TruncationThresholds(days=uniq, u=u)


def estimate_spot_path(
    panel: ReturnPanel,
    cfg: EstimatorConfig,
    thresholds: TruncationThresholds | None = None,
    truncate: bool = True,
) -> SpotCovPath:
    """Local truncated realized covariance along the panel.

    Returns one d x d matrix per window start, n - k_n + 1 in total.
    Windows may span day boundaries: overnight returns never enter the
    panel, so the grid is treated as continuous.
    """
    kn = cfg.k_n
    n = panel.n_increments
    if n < kn + 1:
        raise PanelTooShort(f"need at least k_n + 1 = {kn + 1} increments, got {n}")
    cfg.check_panel_length(n)

    incr = panel.increments()
    if truncate:
        if thresholds is None:
            thresholds = compute_thresholds(panel, cfg)
        u = thresholds.per_increment(panel.increment_days())
        keep = np.all(np.abs(incr) <= u, axis=1)
        kept = np.where(keep[:, None], incr, 0.0)
    else:
        keep = np.ones(n, dtype=bool)
        kept = incr

    outer = kept[:, :, None] * kept[:, None, :]          # (n, d, d)
    csum = np.concatenate([np.zeros((1, panel.d, panel.d)), np.cumsum(outer, axis=0)])
    values = (csum[kn:] - csum[:-kn]) / (kn * panel.delta_n)

    zeroed = (~keep).astype(np.int64)
    zsum = np.concatenate([[0], np.cumsum(zeroed)])
    hits = zsum[kn:] - zsum[:-kn]
    return SpotCovPath(values=values, k_n=kn, delta_n=panel.delta_n, trunc_hits=hits)


def detect_vol_jump_events(
    path: SpotCovPath,
    cfg: EstimatorConfig,
    norm: str = "diag",
    threshold: str = "abs",
) -> VolJumpMask:
    """Flag windows around which the spot estimate moves too much.

    The event at idx compares the estimates k_n windows ahead and behind.
    ``norm`` selects what is compared:
        diag -- any diagonal entry (per-asset rule), the default;
        fro  -- Frobenius norm of the full matrix difference.
    ``threshold`` selects the cutoff:
        abs  -- cfg.vol_jump_abs in annualized-variance units (default);
        vol  -- ten volatility points, i.e. |sqrt(C_gg)| moving by more
                than sqrt(cfg.vol_jump_abs) (diag norm only);
        rate -- delta_n ** cfg.varpi_prime, the asymptotic prescription.
    """
    N = path.length
    kn = path.k_n
    no_jump = np.zeros(N, dtype=bool)
    defined = np.zeros(N, dtype=bool)
    if N <= 2 * kn:
        raise PanelTooShort("path too short for any defined vol-jump event")

    fwd = path.values[2 * kn:]           # idx + kn for idx in [kn, N - kn)
    bwd = path.values[: N - 2 * kn]      # idx - kn
    diff = fwd - bwd
    if threshold == "rate":
        cut = path.delta_n**cfg.varpi_prime
    else:
        cut = cfg.vol_jump_abs

    if norm == "fro":
        move = np.sqrt(np.sum(diff * diff, axis=(1, 2)))
        ok = move < cut
    elif norm == "diag":
        if threshold == "vol":
            dfwd = np.sqrt(np.maximum(np.einsum("ndd->nd", fwd), 0.0))
            dbwd = np.sqrt(np.maximum(np.einsum("ndd->nd", bwd), 0.0))
            move = np.max(np.abs(dfwd - dbwd), axis=1)
            ok = move <= np.sqrt(cut)
        else:
            move = np.max(np.abs(np.einsum("ndd->nd", diff)), axis=1)
            ok = move <= cut
    else:
        raise DomainError(f"unknown norm mode {norm!r}")

    defined[kn : N - kn] = True
    no_jump[kn : N - kn] = ok
    return VolJumpMask(no_jump=no_jump, defined=defined)
