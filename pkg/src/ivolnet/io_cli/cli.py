"""Command-line interface.

Commands: simulate (write a synthetic panel), estimate (per-pair
dependence measures with standard errors), test (adds p-values and
FDR-adjusted rejections), report (heatmap matrices and network edge
lists), mc (Monte Carlo summary tables).

Exit codes: 0 success, 2 configuration error, 3 data error, 4 success
but some results carried numeric-validity flags (reported, not fatal).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from ..core.config import EstimatorConfig, parse_flat_config, step_from_minutes
from ..errors import ConfigError, IvolnetError
from ..sim.dgp import SimConfig, simulate_model
from ..sim.mc import MCConfig, mc_run
from . import pipeline
from .panel_csv import panel_from_csv, panel_to_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _merge_config_file(args: argparse.Namespace, keys: list[str]) -> dict:
    """Resolve key=value config-file entries against explicit flags.

    An explicit flag that contradicts the config file is an error rather
    than a silent override in either direction.
    """
    merged: dict = {}
    file_vals: dict = {}
    if getattr(args, "config", None):
        raw = parse_flat_config(args.config)
        for key, sval in raw.items():
            if key not in keys:
                raise ConfigError(f"unknown config key {key!r}")
            file_vals[key] = sval
    for key in keys:
        flag = getattr(args, key, None)
        if key in file_vals:
            fval = _parse_like(file_vals[key], flag)
            if flag is not None and _differs(flag, fval):
                raise ConfigError(
                    f"config file sets {key}={fval!r} but the flag says {flag!r}; "
                    "remove one of them"
                )
            merged[key] = fval
        elif flag is not None:
            merged[key] = flag
    return merged


def _parse_like(sval: str, like):
    if sval in ("true", "false"):
        return sval == "true"
    try:
        return float(sval) if not isinstance(like, bool) else sval == "true"
    except ValueError:
        return sval


def _differs(a, b) -> bool:
    try:
        return not (a == b or float(a) == float(b))
    except (TypeError, ValueError):
        return a != b


def _estimator_config(args) -> EstimatorConfig:
    keys = [f.name for f in fields(EstimatorConfig)]
    merged = _merge_config_file(args, keys)
    if "delta_n" not in merged:
        raise ConfigError("delta_n is required (flag --delta-n or config file)")
    return EstimatorConfig(**merged)


def _parse_pairs(spec: str | None, d_stocks: int):
    if not spec or spec == "all":
        return None
    pairs = []
    for part in spec.split(";"):
        i, _, j = part.partition(",")
        pairs.append((int(i), int(j)))
    for i, j in pairs:
        if not (0 <= i < d_stocks and 0 <= j < d_stocks and i != j):
            raise ConfigError(f"invalid pair ({i}, {j}) for {d_stocks} stocks")
    return pairs


def _add_estimator_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file (keys mirror all flags)")
    p.add_argument("--delta-n", dest="delta_n", type=float,
                   help="observation step in years (see also --delta-min)")
    p.add_argument("--delta-min", dest="delta_min", type=float,
                   help="observation step in minutes (converted to years)")
    p.add_argument("--theta", type=float, help="local window scale (default 2.5)")
    p.add_argument("--varpi", type=float)
    p.add_argument("--trunc-mult", dest="trunc_mult", type=float)
    p.add_argument("--varpi-prime", dest="varpi_prime", type=float)
    p.add_argument("--vol-jump-abs", dest="vol_jump_abs", type=float)
    p.add_argument("--r-jump-activity", dest="r_jump_activity", type=float)
    p.add_argument("--vol-trunc", dest="vol_trunc_enabled", action="store_const", const=True)
    p.add_argument("--no-vol-trunc", dest="vol_trunc_enabled", action="store_const", const=False)


def _resolve_delta(args) -> None:
    if getattr(args, "delta_min", None) is not None:
        if getattr(args, "delta_n", None) is not None:
            raise ConfigError("give either --delta-n or --delta-min, not both")
        args.delta_n = step_from_minutes(args.delta_min)


def _cmd_simulate(args) -> int:
    sim = SimConfig(
        model_id=args.model,
        t_years=args.t_years,
        delta_n=step_from_minutes(args.delta_min),
        substeps=args.substeps,
        seed=args.seed,
        n_stocks=args.stocks,
    )
    panel, latent = simulate_model(sim)
    panel_to_csv(panel, args.out)
    if args.latent_out:
        np.savez_compressed(
            args.latent_out,
            times=latent.times,
            f=latent.f,
            model_id=sim.model_id,
            floor_hits=latent.floor_hits,
        )
    print(f"wrote {args.out}: {panel.n_increments} increments x {panel.d} assets")
    return EXIT_OK


def _scan_with_args(args, with_tests: bool):
    panel = panel_from_csv(args.panel)
    _resolve_delta(args)
    if getattr(args, "delta_n", None) is None and not getattr(args, "config", None):
        args.delta_n = panel.delta_n
    cfg = _estimator_config(args)
    if abs(cfg.delta_n - panel.delta_n) > 1e-15:
        raise ConfigError(
            f"config delta_n={cfg.delta_n} does not match the panel's {panel.delta_n}"
        )
    pi = tuple(args.pi_factors.split(",")) if args.pi_factors else None
    pairs = _parse_pairs(args.pairs, panel.d_stocks)
    scan = pipeline.scan_pairs(
        panel, cfg, method=args.method, pairs=pairs,
        pi_factor_labels=pi, with_tests=with_tests, n_jobs=args.jobs,
    )
    return panel, cfg, scan


def _write_scan(scan, cfg, out_prefix: str, as_json: bool) -> None:
    out = Path(out_prefix)
    out.parent.mkdir(parents=True, exist_ok=True)
    scan.to_csv(f"{out_prefix}.csv", index=False)
    if as_json:
        payload = {
            "fingerprint": cfg.fingerprint(),
            "pairs": json.loads(scan.to_json(orient="records")),
        }
        Path(f"{out_prefix}.json").write_text(json.dumps(payload, indent=2))


def _numeric_flags_present(scan) -> bool:
    cols = [c for c in scan.columns if c.startswith("valid_")]
    bad = any(not bool(v) for c in cols for v in scan[c])
    nan_vals = any(
        scan[c].isna().any() for c in pipeline.QUANTITIES if c in scan.columns
    )
    return bad or nan_vals


def _cmd_estimate(args) -> int:
    _, cfg, scan = _scan_with_args(args, with_tests=True)
    _write_scan(scan, cfg, args.out, as_json=True)
    print(f"wrote {args.out}.csv and {args.out}.json ({len(scan)} pairs)")
    return EXIT_NUMERIC if _numeric_flags_present(scan) else EXIT_OK


def _cmd_test(args) -> int:
    _, cfg, scan = _scan_with_args(args, with_tests=True)
    scan = pipeline.attach_fdr(scan, q=args.fdr_q, dependent=args.fdr_dependent)
    _write_scan(scan, cfg, args.out, as_json=True)
    n_rej = {t: int(scan[f"reject_{t}"].sum()) for t in pipeline.TEST_NAMES
             if f"reject_{t}" in scan.columns}
    print(f"wrote {args.out}.csv/.json; rejections at q={args.fdr_q}: {n_rej}")
    return EXIT_NUMERIC if _numeric_flags_present(scan) else EXIT_OK


def _cmd_report(args) -> int:
    panel, cfg, scan = _scan_with_args(args, with_tests=True)
    scan = pipeline.attach_fdr(scan, q=args.fdr_q, dependent=args.fdr_dependent)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    stock_labels = tuple(panel.labels[: panel.d_stocks])
    for value_col, reject_col, tag in (
        ("corr_idiovol", "reject_no_idiovol_dependence", "idiovol"),
        ("corr_resid", "reject_no_residual_dependence", "resid"),
    ):
        M = pipeline.heatmap_matrix(scan, stock_labels, value_col, reject_col)
        M.to_csv(outdir / f"heatmap_{tag}.csv")
        pipeline.edge_list(scan, value_col, reject_col).to_csv(
            outdir / f"edges_{tag}.csv", index=False
        )
    scan.to_csv(outdir / "pairs.csv", index=False)
    print(f"wrote heatmaps and edge lists to {outdir}")
    return EXIT_NUMERIC if _numeric_flags_present(scan) else EXIT_OK


def _cmd_mc(args) -> int:
    sim = SimConfig(
        model_id=args.model,
        t_years=args.t_years,
        delta_n=step_from_minutes(args.delta_min),
        substeps=args.substeps,
        seed=args.seed,
        n_stocks=args.stocks,
    )
    mc = MCConfig(
        sim=sim,
        n_reps=args.reps,
        thetas=tuple(float(x) for x in args.thetas.split(",")),
        methods=tuple(args.methods.split(",")),
        fixed_vol=args.fixed_vol,
        vol_trunc=args.vol_trunc,
        with_tests=not args.no_tests,
        n_jobs=args.jobs,
    )
    result = mc_run(mc)
    result.to_csv(args.out)
    print(f"wrote Monte Carlo tables to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ivolnet",
        description="Dependence in idiosyncratic volatilities from high-frequency panels",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated panel to CSV")
    p.add_argument("--model", type=int, default=1, choices=(1, 2))
    p.add_argument("--t-years", dest="t_years", type=float, default=1.0)
    p.add_argument("--delta-min", dest="delta_min", type=float, default=5.0)
    p.add_argument("--substeps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stocks", type=int, default=2)
    p.add_argument("--out", required=True)
    p.add_argument("--latent-out", dest="latent_out")
    p.set_defaults(func=_cmd_simulate)

    for name, fn, extra in (
        ("estimate", _cmd_estimate, "per-pair dependence measures with standard errors"),
        ("test", _cmd_test, "adds p-values and FDR-adjusted rejection masks"),
        ("report", _cmd_report, "heatmap matrices and network edge lists"),
    ):
        p = sub.add_parser(name, help=extra)
        p.add_argument("--panel", required=True, help="panel CSV (see simulate)")
        _add_estimator_flags(p)
        p.add_argument("--method", default="an", choices=("an", "lin", "naive"))
        p.add_argument("--pairs", help="semicolon-separated index pairs, e.g. '0,1;0,2' (default all)")
        p.add_argument("--pi-factors", dest="pi_factors",
                       help="comma-separated factor labels used as idiovol factors")
        p.add_argument("--fdr-q", dest="fdr_q", type=float, default=0.05)
        p.add_argument("--fdr-dependent", dest="fdr_dependent", action="store_true")
        p.add_argument("--jobs", type=int, default=0)
        p.add_argument("--out", required=True, help="output path prefix (or directory for report)")
        p.set_defaults(func=fn)

    p = sub.add_parser("mc", help="Monte Carlo error tables and rejection rates")
    p.add_argument("--model", type=int, default=1, choices=(1, 2))
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--t-years", dest="t_years", type=float, default=10.0)
    p.add_argument("--delta-min", dest="delta_min", type=float, default=5.0)
    p.add_argument("--substeps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stocks", type=int, default=2)
    p.add_argument("--thetas", default="2.5")
    p.add_argument("--methods", default="lin,an,naive")
    p.add_argument("--fixed-vol", dest="fixed_vol", action="store_true")
    p.add_argument("--vol-trunc", dest="vol_trunc", action="store_true")
    p.add_argument("--no-tests", dest="no_tests", action="store_true")
    p.add_argument("--jobs", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mc)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IvolnetError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
