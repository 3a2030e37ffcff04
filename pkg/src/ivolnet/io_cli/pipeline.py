"""Pairwise estimation fan-out across a panel's stock universe.

Each pair of stocks is estimated on its own three-plus-factor subpanel
(two stocks plus every factor column), with its own truncated spot path,
which mirrors how the quantities are computed in practice and keeps the
per-pair cost independent of the universe size. Day-level truncation
thresholds are computed once on the full panel and sliced per pair.
"""

from __future__ import annotations

import os
from multiprocessing import get_context

import numpy as np
import pandas as pd

from ..core.config import EstimatorConfig
from ..core.functionals import selector
from ..core.panel import ReturnPanel
from ..errors import DomainError
from ..factors import analyze_pair
from ..inference import fdr_bh
from ..spot import (
    TruncationThresholds,
    compute_thresholds,
    detect_vol_jump_events,
    estimate_spot_path,
)

QUANTITIES = (
    "qc_idiovol",
    "corr_idiovol",
    "qc_resid",
    "corr_resid",
    "r2",
    "q_measure",
)
TEST_NAMES = ("no_idiovol_dependence", "no_factor_loading", "no_residual_dependence")

_SCAN: dict = {}


def _scan_one(pair: tuple[int, int]) -> dict:
    panel: ReturnPanel = _SCAN["panel"]
    cfg: EstimatorConfig = _SCAN["cfg"]
    thr: TruncationThresholds = _SCAN["thr"]
    method: str = _SCAN["method"]
    pi_cols: tuple[int, ...] | None = _SCAN["pi_cols"]
    with_tests: bool = _SCAN["with_tests"]

    i, j = pair
    sub = panel.subset([i, j])
    cols = [i, j] + list(panel.factor_indices)
    thr_sub = TruncationThresholds(days=thr.days, u=thr.u[:, cols])
    path = estimate_spot_path(sub, cfg, thresholds=thr_sub)
    mask = detect_vol_jump_events(path, cfg) if cfg.vol_trunc_enabled else None
    sub_fi = sub.factor_indices
    pi_funcs = None
    if pi_cols is not None:
        # positions of the chosen factors inside the subpanel
        sub_pi = tuple(sub_fi[list(panel.factor_indices).index(c)] for c in pi_cols)
        pi_funcs = tuple(selector(c, c, sub.d) for c in sub_pi)
    analysis = analyze_pair(
        path, 0, 1, sub_fi, pi_funcs=pi_funcs, mask=mask,
        methods=(method,), with_sigma=with_tests,
    )
    row: dict = {
        "i": i,
        "j": j,
        "label_i": panel.labels[i],
        "label_j": panel.labels[j],
        "method": method,
    }
    q = analysis.quantities[method]
    for name in QUANTITIES:
        row[name] = q[name].value
        row[f"{name}_se"] = q[name].se
    m = len(sub_fi if pi_cols is None else pi_cols)
    for k in range(m):
        row[f"gamma_i[{k}]"] = q[f"gamma_j[{k}]"].value
        row[f"gamma_i[{k}]_se"] = q[f"gamma_j[{k}]"].se
        row[f"gamma_j[{k}]"] = q[f"gamma_s[{k}]"].value
        row[f"gamma_j[{k}]_se"] = q[f"gamma_s[{k}]"].se
    if with_tests:
        for tname, tres in analysis.tests[method].items():
            row[f"p_{tname}"] = tres.p_value
            row[f"stat_{tname}"] = tres.statistic
            row[f"valid_{tname}"] = tres.valid
    return row


def scan_pairs(
    panel: ReturnPanel,
    cfg: EstimatorConfig,
    method: str = "an",
    pairs: list[tuple[int, int]] | None = None,
    pi_factor_labels: tuple[str, ...] | None = None,
    with_tests: bool = True,
    n_jobs: int = 0,
) -> pd.DataFrame:
    """Estimate every requested stock pair; returns one row per pair."""
    if panel.factor_count < 1:
        raise DomainError("pairwise estimation needs at least one factor column")
    if pairs is None:
        ds = panel.d_stocks
        pairs = [(i, j) for i in range(ds) for j in range(i + 1, ds)]
    pi_cols: tuple[int, ...] | None = None
    if pi_factor_labels is not None:
        lookup = {panel.labels[c]: c for c in panel.factor_indices}
        missing = [x for x in pi_factor_labels if x not in lookup]
        if missing:
            raise DomainError(f"unknown factor labels for the idiovol factors: {missing}")
        pi_cols = tuple(lookup[x] for x in pi_factor_labels)

    thr = compute_thresholds(panel, cfg)
    _SCAN.update(panel=panel, cfg=cfg, thr=thr, method=method,
                 pi_cols=pi_cols, with_tests=with_tests)
    try:
        jobs = n_jobs if n_jobs > 0 else min(os.cpu_count() or 1, 8)
        if jobs > 1 and len(pairs) > 1:
            with get_context("fork").Pool(jobs) as pool:
                rows = pool.map(_scan_one, pairs, chunksize=8)
        else:
            rows = [_scan_one(p) for p in pairs]
    finally:
        _SCAN.clear()
    return pd.DataFrame(rows)


def attach_fdr(scan: pd.DataFrame, q: float = 0.05, dependent: bool = False) -> pd.DataFrame:
    """Add FDR-controlled rejection columns for each test family."""
    out = scan.copy()
    for tname in TEST_NAMES:
        col = f"p_{tname}"
        if col in out.columns:
            res = fdr_bh(out[col].to_numpy(dtype=float), q, dependent=dependent)
            out[f"reject_{tname}"] = res.reject
    return out


def heatmap_matrix(
    scan: pd.DataFrame,
    labels: tuple[str, ...],
    value_col: str = "corr_idiovol",
    reject_col: str = "reject_no_idiovol_dependence",
) -> pd.DataFrame:
    """Symmetric matrix of rejected-pair values; zero elsewhere and on the diagonal."""
    d = len(labels)
    M = np.zeros((d, d))
    for _, row in scan.iterrows():
        if reject_col in scan.columns and bool(row[reject_col]):
            v = row[value_col]
            if np.isfinite(v):
                M[int(row["i"]), int(row["j"])] = v
                M[int(row["j"]), int(row["i"])] = v
    return pd.DataFrame(M, index=list(labels), columns=list(labels))


def edge_list(
    scan: pd.DataFrame,
    value_col: str = "corr_idiovol",
    reject_col: str = "reject_no_idiovol_dependence",
) -> pd.DataFrame:
    """Network edges (one per rejected pair) with the estimated value as weight."""
    cols = ["label_i", "label_j", value_col]
    if reject_col not in scan.columns:
        return pd.DataFrame(columns=cols)
    sel = scan[scan[reject_col].astype(bool)]
    return sel[cols].rename(columns={value_col: "weight"}).reset_index(drop=True)
