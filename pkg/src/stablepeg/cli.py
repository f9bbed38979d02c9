"""Command-line entry point: classify, sweep, dynamics, simulate, analyze."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import dynamics, equilibrium, stats
from .errors import ParseError, StablePegError, ValidationError
from .io import (
    DEFAULT_BANDS,
    bundled_configs,
    load_bundle,
    load_config,
    write_correlation_csv,
    write_deviation_csv,
    write_json,
    write_path_csv,
    write_rows,
    write_zone_csv,
)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_classify(args) -> int:
    cfg = load_config(args.config)
    grid = cfg.grid.thetas(args.grid)
    report = equilibrium.zone_diagram(cfg.spec, cfg.economy, grid)
    write_zone_csv(_out_dir(args) / "zones.csv", report)
    if args.theta is not None:
        print(equilibrium.classify(cfg.spec, cfg.economy, args.theta).value)
    else:
        counts = {z.value: report.zones().count(z) for z in equilibrium.Zone}
        print(json.dumps({"design": cfg.spec.design.value, **counts}))
    return 0


def cmd_sweep(args) -> int:
    names = args.config or bundled_configs()
    reports = []
    for name in names:
        cfg = load_config(name)
        reports.append(equilibrium.zone_diagram(cfg.spec, cfg.economy, cfg.grid.thetas(args.grid)))
        print(f"{name}: {cfg.spec.design.value}")
    write_zone_csv(_out_dir(args) / "zones.csv", reports)
    return 0


def cmd_dynamics(args) -> int:
    cfg = load_config(args.config)
    N = args.n or cfg.dynamics.N
    seed = args.seed if args.seed is not None else cfg.dynamics.seed
    thetas = [args.theta] if args.theta is not None else list(cfg.grid.thetas(args.grid))
    entries, agree = [], 0
    for theta in thetas:
        result = dynamics.run_dynamics(cfg.spec, cfg.economy, float(theta), N,
                                       max_iter=cfg.dynamics.max_iter, seed=seed)
        entry = {"theta": float(theta), **result.to_dict()}
        if args.check:
            analytic = equilibrium.classify(cfg.spec, cfg.economy, float(theta))
            entry["classify"] = analytic.value
            entry["agreement"] = analytic is result.zone_estimate
            agree += entry["agreement"]
        entries.append(entry)
    payload = {"design": cfg.spec.design.value, "N": N, "seed": seed, "runs": entries}
    if args.check:
        payload["agreement"] = {"matched": agree, "total": len(thetas)}
    write_json(_out_dir(args) / "dynamics.json", payload)
    if args.check:
        print(f"agreement {agree}/{len(thetas)}")
        return 0 if agree == len(thetas) else 1
    for e in entries:
        print(f"theta={e['theta']:.6g} price={e['final_state']['price']:.6g} zone={e['zone_estimate']}")
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    theta = args.theta if args.theta is not None else cfg.grid.theta_max
    shock = dynamics.Shock(args.shock_step, args.shock_fraction) if args.shock_fraction > 0 else None
    seed = args.seed if args.seed is not None else cfg.dynamics.seed
    rows = dynamics.simulate_run(cfg.spec, cfg.economy, [theta] * args.steps, shock, args.steps,
                                 N=args.n or cfg.dynamics.N, seed=seed)
    write_path_csv(_out_dir(args) / "path.csv", rows)
    print(f"final price {rows[-1].price:.6g} after {len(rows)} steps")
    return 0


def _parse_bands(items: Sequence[str] | None) -> dict[str, stats.Band]:
    bands = dict(DEFAULT_BANDS)
    for item in items or ():
        try:
            name, rng = item.split("=", 1)
            lo, hi = (float(x) for x in rng.split(","))
        except ValueError:
            raise ParseError(f"expected NAME=lo,hi, got {item!r}", "--band") from None
        bands[name] = stats.Band(lo, hi)
    return bands


def cmd_analyze(args) -> int:
    lag = args.lag
    alpha = args.alpha
    if args.config:
        cfg = load_config(args.config)
        lag = lag or cfg.analysis.lag
        alpha = alpha if alpha is not None else cfg.analysis.alpha
    lag = lag or 1
    alpha = 0.1 if alpha is None else alpha
    bundle = load_bundle(args.prices, args.v, _parse_bands(args.band))
    out = _out_dir(args)

    devs = {n: stats.deviation_report(s) for n, s in sorted(bundle.prices.items())}
    write_deviation_csv(out / "analysis_dev.csv", devs, stats.rank_by_deviation(devs),
                        stats.rank_by_deviation(devs, downward=True))
    pairs = [("deviation", *p) for p in stats.insignificant_pairs(bundle.prices, alpha)]
    pairs += [("downward_deviation", *p) for p in stats.insignificant_pairs(bundle.prices, alpha, downward=True)]
    write_rows(out / "analysis_pairs.csv", ["metric", "a", "b", "p"], pairs)

    corr = {n: stats.causality_report(bundle.prices[n], bundle.v[n], lag)
            for n in sorted(bundle.v) if n in bundle.prices}
    write_correlation_csv(out / "analysis_corr.csv", corr)

    # coins without v data are the fiat case, v = 1
    fiat = set(args.fiat or ())
    names = sorted(n for n in bundle.prices if n in bundle.v or n in fiat)
    points = []
    for n in names:
        v_dev = stats.downward_deviation(bundle.v[n]) if n in bundle.v else 0.0
        points.append([n, v_dev, devs[n].downward_deviation])
    write_rows(out / "analysis_fig.csv", ["name", "v_downward_deviation", "price_downward_deviation"], points)
    summary = {"lag": lag, "alpha": alpha, "coins": len(devs), "with_v": len(corr)}
    if len(points) >= 3:
        try:
            pr = stats.pearson([p[1] for p in points], [p[2] for p in points])
            summary.update(fig_rho=pr.rho, fig_p=pr.p, fig_n=pr.n)
        except StablePegError as exc:
            summary["fig_error"] = str(exc)
    write_json(out / "analysis_summary.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stablepeg", description="Stablecoin peg equilibrium laboratory.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, help="config file or bundled config name")
        p.add_argument("--out-dir", default=".", help="directory for output files")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--grid", type=int, default=None, help="theta grid points")

    p = sub.add_parser("classify", help="zone of one theta and the zone diagram")
    common(p)
    p.add_argument("--theta", type=float, default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", help="zone diagrams for several configs")
    common(p, config_required=False)
    p.add_argument("--config", action="append", help="repeatable; defaults to every bundled config")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("dynamics", help="best-response oracle")
    common(p)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--n", type=int, default=None, help="number of agents")
    p.add_argument("--check", action="store_true", help="compare oracle zones with the classifier")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("simulate", help="price path after a redemption shock")
    common(p)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--shock-step", type=int, default=5)
    p.add_argument("--shock-fraction", type=float, default=0.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="deviation, correlation and causality tables")
    common(p, config_required=False)
    p.add_argument("--config", default=None)
    p.add_argument("--prices", required=True, help="directory of date,price CSVs")
    p.add_argument("--v", default=None, help="directory of date,v CSVs")
    p.add_argument("--lag", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None, help="significance level for t-test pairs")
    p.add_argument("--band", action="append", help="NAME=lo,hi target band")
    p.add_argument("--fiat", action="append", help="coin treated as v = 1")
    p.set_defaults(func=cmd_analyze)
    return parser


def _error_json(exc: Exception) -> str:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ValidationError):
        payload["problems"] = exc.problems
    if isinstance(exc, ParseError) and exc.location:
        payload["location"] = exc.location
    return json.dumps(payload, sort_keys=True)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (StablePegError, OSError, ValueError) as exc:
        print(_error_json(exc), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
