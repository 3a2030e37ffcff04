"""Monte Carlo harness: estimator error tables and test rejection rates.

Replications run in parallel with per-replication random streams derived
from (seed, stream, rep), so results do not depend on scheduling. In
fixed-volatility mode one volatility realization (and the market
Brownian driving it) is shared across replications while idiosyncratic
shocks and jumps are redrawn, matching how the error tables are usually
reported.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from multiprocessing import get_context

import numpy as np
import pandas as pd

from ..core.config import EstimatorConfig
from ..errors import ConfigError
from ..factors import analyze_pair
from ..spot import compute_thresholds, detect_vol_jump_events, estimate_spot_path
from .dgp import SimConfig, VolRealization, build_panel, simulate_volatility
from .oracles import estimand_oracles, oracle_quadcov

ESTIMANDS = ("gamma", "r2", "corr_idiovol", "corr_resid", "qc_idiovol", "qc_resid")
TESTS = ("no_idiovol_dependence", "no_factor_loading", "no_residual_dependence")


@dataclass(frozen=True)
class MCConfig:
    """One Monte Carlo experiment over a fixed stock pair."""

    sim: SimConfig
    n_reps: int = 100
    thetas: tuple[float, ...] = (2.5,)
    methods: tuple[str, ...] = ("lin", "an", "naive")
    fixed_vol: bool = True
    vol_trunc: bool = False
    with_tests: bool = True
    pair: tuple[int, int] = (0, 1)
    alphas: tuple[float, ...] = (0.10, 0.05, 0.01)
    n_jobs: int = 0

    def jobs(self) -> int:
        if self.n_jobs > 0:
            return self.n_jobs
        return min(os.cpu_count() or 1, 8)


@dataclass
class MCResult:
    estimates: pd.DataFrame  # rep, method, theta, estimand, value, oracle
    tests: pd.DataFrame      # rep, method, theta, test, statistic, p_value, valid
    config: MCConfig

    def summary_table(self) -> pd.DataFrame:
        """Median bias, IQR, and RMSE per estimand, method, and window scale."""
        df = self.estimates.copy()
        df["bias"] = df["value"] - df["oracle"]
        rows = []
        for (est, method, theta), grp in df.groupby(["estimand", "method", "theta"]):
            v = grp["value"].to_numpy()
            b = grp["bias"].to_numpy()
            ok = np.isfinite(b)
            rows.append(
                {
                    "estimand": est,
                    "method": method,
                    "theta": theta,
                    "median_bias": float(np.median(b[ok])) if ok.any() else np.nan,
                    "iqr": float(np.subtract(*np.percentile(v[ok], [75, 25])))
                    if ok.any()
                    else np.nan,
                    "rmse": float(np.sqrt(np.mean(b[ok] ** 2))) if ok.any() else np.nan,
                    "n_invalid": int(np.count_nonzero(~ok)),
                }
            )
        return pd.DataFrame(rows)

    def rejection_table(self) -> pd.DataFrame:
        """Rejection rates (percent) per test, level, method, and window scale."""
        rows = []
        for (test, method, theta), grp in self.tests.groupby(["test", "method", "theta"]):
            p = grp["p_value"].to_numpy()
            valid = grp["valid"].to_numpy(dtype=bool) & np.isfinite(p)
            for alpha in self.config.alphas:
                rate = float(np.mean(p[valid] <= alpha)) * 100.0 if valid.any() else np.nan
                rows.append(
                    {
                        "test": test,
                        "alpha": alpha,
                        "method": method,
                        "theta": theta,
                        "rejection_pct": rate,
                        "n_valid": int(np.count_nonzero(valid)),
                        "n_invalid": int(np.count_nonzero(~valid)),
                    }
                )
        return pd.DataFrame(rows)

    def to_csv(self, outdir) -> None:
        os.makedirs(outdir, exist_ok=True)
        summary = self.summary_table()
        for stat in ("median_bias", "iqr", "rmse"):
            wide = summary.pivot_table(
                index="estimand", columns=["method", "theta"], values=stat, sort=False
            )
            wide.to_csv(os.path.join(outdir, f"{stat}.csv"))
        if len(self.tests):
            self.rejection_table().to_csv(
                os.path.join(outdir, "rejection_rates.csv"), index=False
            )
        self.estimates.to_csv(os.path.join(outdir, "estimates.csv"), index=False)


# -- one replication ----------------------------------------------------------


def _estimator_config(sim: SimConfig, theta: float, vol_trunc: bool) -> EstimatorConfig:
    return EstimatorConfig(delta_n=sim.delta_n, theta=theta, vol_trunc_enabled=vol_trunc)


def _run_rep(mc: MCConfig, vol: VolRealization | None, rep: int):
    sim = mc.sim
    vol_r = vol if vol is not None else simulate_volatility(sim, rep)
    panel, latent = build_panel(sim, vol_r, rep)
    j, s = mc.pair
    sub = panel.subset([j, s])
    oracles = estimand_oracles(latent, j, s)
    thresholds = None
    est_rows, test_rows = [], []
    for theta in mc.thetas:
        cfg = _estimator_config(sim, theta, mc.vol_trunc)
        if thresholds is None:
            thresholds = compute_thresholds(sub, cfg)
        path = estimate_spot_path(sub, cfg, thresholds=thresholds)
        mask = detect_vol_jump_events(path, cfg) if mc.vol_trunc else None
        analysis = analyze_pair(
            path, 0, 1, (2,), mask=mask, methods=mc.methods, with_sigma=mc.with_tests
        )
        for method in mc.methods:
            q = analysis.quantities[method]
            named = {
                "gamma": q["gamma_j[0]"].value,
                "r2": q["r2"].value,
                "corr_idiovol": q["corr_idiovol"].value,
                "corr_resid": q["corr_resid"].value,
                "qc_idiovol": q["qc_idiovol"].value,
                "qc_resid": q["qc_resid"].value,
            }
            for est, val in named.items():
                okey = "gamma" if est == "gamma" else est
                est_rows.append((rep, method, theta, est, val, oracles[okey]))
            if mc.with_tests and method in analysis.tests:
                for tname, tres in analysis.tests[method].items():
                    test_rows.append(
                        (rep, method, theta, tname, tres.statistic, tres.p_value, tres.valid)
                    )
    return est_rows, test_rows


_WORKER: dict = {}


def _pool_rep(rep: int):
    return _run_rep(_WORKER["mc"], _WORKER.get("vol"), rep)


def mc_run(mc: MCConfig) -> MCResult:
    """Run the experiment and collect estimator errors and test outcomes."""
    if mc.n_reps < 1:
        raise ConfigError("n_reps must be at least 1")
    vol = simulate_volatility(mc.sim, 0) if mc.fixed_vol else None
    jobs = mc.jobs()
    if jobs > 1 and mc.n_reps > 1:
        _WORKER["mc"], _WORKER["vol"] = mc, vol
        try:
            with get_context("fork").Pool(jobs) as pool:
                results = pool.map(_pool_rep, range(mc.n_reps), chunksize=1)
        finally:
            _WORKER.clear()
    else:
        results = [_run_rep(mc, vol, rep) for rep in range(mc.n_reps)]

    est_rows = [r for rows, _ in results for r in rows]
    test_rows = [r for _, rows in results for r in rows]
    estimates = pd.DataFrame(
        est_rows, columns=["rep", "method", "theta", "estimand", "value", "oracle"]
    )
    tests = pd.DataFrame(
        test_rows,
        columns=["rep", "method", "theta", "test", "statistic", "p_value", "valid"],
    )
    return MCResult(estimates=estimates, tests=tests, config=mc)


# -- sampling-frequency consistency sweep -------------------------------------


def consistency_sweep(
    sim_finest: SimConfig,
    deltas_n: tuple[float, ...],
    theta: float = 2.5,
    n_reps: int = 200,
    method: str = "lin",
    n_jobs: int = 0,
) -> pd.DataFrame:
    """Estimate the idio-variance covariation at several sampling steps on one
    shared fine grid, holding the volatility realization fixed.

    ``sim_finest`` sets the finest observation step; every requested step
    must be an integer multiple of its fine step. Returns one row per
    (rep, delta_n) with the estimate, the latent oracle, and |error|.
    """
    fine = sim_finest.delta_fine
    cfgs = []
    for dn in deltas_n:
        sub = dn / fine
        if abs(sub - round(sub)) > 1e-9:
            raise ConfigError(f"delta_n={dn} is not a multiple of the fine step {fine}")
        cfgs.append(replace(sim_finest, delta_n=dn, substeps=int(round(sub))))
    vol = simulate_volatility(sim_finest, 0)

    def one_rep(rep: int):
        rows = []
        for cfg_sim in cfgs:
            panel, latent = build_panel(cfg_sim, vol, rep)
            oracle = oracle_quadcov(latent.idio_variance(0), latent.idio_variance(1))
            cfg = _estimator_config(cfg_sim, theta, False)
            path = estimate_spot_path(panel, cfg)
            analysis = analyze_pair(
                path, 0, 1, (2,), methods=(method,), with_sigma=False
            )
            est = analysis.quantities[method]["qc_idiovol"].value
            rows.append((rep, cfg_sim.delta_n, method, est, oracle, abs(est - oracle)))
        return rows

    jobs = n_jobs if n_jobs > 0 else min(os.cpu_count() or 1, 8)
    if jobs > 1 and n_reps > 1:
        _WORKER["sweep"] = one_rep
        try:
            with get_context("fork").Pool(jobs) as pool:
                nested = pool.map(_sweep_rep, range(n_reps), chunksize=1)
        finally:
            _WORKER.clear()
    else:
        nested = [one_rep(rep) for rep in range(n_reps)]
    rows = [r for chunk in nested for r in chunk]
    return pd.DataFrame(
        rows, columns=["rep", "delta_n", "method", "estimate", "oracle", "abs_error"]
    )


def _sweep_rep(rep: int):
    return _WORKER["sweep"](rep)
