"""``hbs`` command line: plan | simulate | sweep | verify.

Exit codes: 0 ok, 1 verify failure, 2 parse error, 3 domain error,
4 unreachable stop rule.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import planner, simulate, stats, verify
from .config import Config, ConfigError, load_config
from .planner import ParameterError

EXIT_OK, EXIT_VERIFY, EXIT_PARSE, EXIT_DOMAIN, EXIT_UNREACHABLE = 0, 1, 2, 3, 4

_TABLE_ROWS = (
    ("eta_t", "per-arm transmission", "{:.4f}"),
    ("V_ph", "photon-pair visibility", "{:.5f}"),
    ("p_abs", "twofold absorption / attempt", "{:.4e}"),
    ("p_herald", "twofold herald / attempt", "{:.4e}"),
    ("p_dark", "real + dark herald / attempt", "{:.4e}"),
    ("e_dark", "dark-count error", "{:.3e}"),
    ("V_at", "atom-atom visibility", "{:.4f}"),
    ("V_eff", "visibility incl. readout", "{:.4f}"),
    ("S_exp", "expected CHSH value", "{:.4f}"),
    ("N_3sigma", "events for 3 sigma", "{}"),
    ("N_3sigma_real", "  (real-valued threshold)", "{:.2f}"),
    ("N_pvalue", "events for P <= alpha", "{}"),
    ("N_pvalue_real", "  (real-valued threshold)", "{:.2f}"),
    ("T_acq", "acquisition time, 3 sigma [s]", "{:.4g}"),
    ("T_acq_pvalue", "acquisition time, P <= alpha [s]", "{:.4g}"),
    ("locality_margin", "L/c - measurement time [s]", "{:.3e}"),
)


def format_report(report: planner.PlannerReport) -> str:
    lines = []
    for key, label, fmt in _TABLE_ROWS:
        value = getattr(report, key)
        if value is None:
            text = "n/a (no violation)"
        elif isinstance(value, float) and math.isinf(value):
            text = "infinite acquisition"
        else:
            text = fmt.format(value)
            if key.startswith("T_acq"):
                text += f"  ({value / 3600:.2f} h)"
        lines.append(f"{key:<16} {label:<34} {text}")
    if report.infinite_acquisition:
        lines.append("p_herald = 0: infinite acquisition")
    return "\n".join(lines)


def _write_json(path: str | Path | None, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=False) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _resolved(config: Config) -> dict:
    return {"params": config.params.to_dict(), "simulation": dict(config.simulation),
            "config_file": config.source}


def cmd_plan(args) -> int:
    config = load_config(args.config)
    report = planner.plan(config.params)
    if not args.quiet:
        print(format_report(report))
    if args.out:
        _write_json(args.out, {"report": report.to_dict(), **_resolved(config)})
    return EXIT_OK


def _sim_config(args, config: Config) -> simulate.SimConfig:
    sim = config.simulation
    n_trials = args.trials if args.trials is not None else None
    n_heralds = args.heralds if args.heralds is not None else None
    if n_trials is None and n_heralds is None:
        n_trials, n_heralds = sim.get("n_trials"), sim.get("n_heralds")
    if n_trials is None and n_heralds is None:
        raise ConfigError("no stop rule: pass --heralds or --trials (or set one in [simulation])")
    return simulate.SimConfig(
        mode=args.mode or sim.get("mode", simulate.Mode.HERALD_CONDITIONED),
        n_trials=n_trials, n_heralds=n_heralds,
        seed=args.seed if args.seed is not None else sim.get("seed", 0),
        overrides=config.overrides,
        max_attempts=sim.get("max_attempts", simulate.SimConfig.max_attempts),
        threads=simulate.default_threads(),
    )


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    try:
        sim = _sim_config(args, config)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ParameterError(str(exc)) from None
    params = sim.apply(config.params)
    batch, summary = simulate.run_campaign(sim, config.params)

    fixed_n = sim.mode is simulate.Mode.HERALD_CONDITIONED or sim.stop_rule == "n_heralds"
    try:
        est = stats.estimate(batch, fixed_n=fixed_n).to_dict()
    except (stats.InsufficientDataError, ValueError) as exc:
        est = {"error": str(exc)}
    expected = simulate.herald_fraction_exact(params)
    payload = {
        "mode": summary.mode,
        "seed": summary.seed,
        "summary": summary.to_dict(),
        "herald_fraction": summary.n_heralded / summary.n_attempts,
        "herald_fraction_expected": expected["total"],
        "chsh_estimate": est,
        "p_value_note": None if fixed_n else "event count not fixed in advance; local-model bound withheld",
        "loophole": simulate.loophole_check(batch, params).to_dict(),
        "planner": planner.plan(params).to_dict(),
        **_resolved(config),
        "resolved_simulation": {"mode": sim.mode.value, "n_trials": sim.n_trials,
                                "n_heralds": sim.n_heralds, "seed": sim.seed,
                                "overrides": sim.overrides},
    }
    if args.out:
        prefix = Path(args.out)
        csv_path = prefix.with_suffix(".csv")
        with open(csv_path, "w", newline="") as fh:
            simulate.write_records_csv(batch, fh, heralded_only=args.heralded_only)
        _write_json(prefix.with_suffix(".json"), payload)
        if not args.quiet:
            print(f"records -> {csv_path}\nsummary -> {prefix.with_suffix('.json')}")
    if not args.quiet:
        s = est.get("S")
        print(f"mode {summary.mode}: {summary.n_heralded} heralded of {summary.n_attempts} attempts")
        if s is not None:
            print(f"S_hat = {s:.4f} +- {est['std_error']:.4f}   (planner S_exp = {payload['planner']['S_exp']:.4f})")
    if not args.out and not args.quiet:
        _write_json(None, payload)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    if args.param != "p":
        raise ParameterError(f"only the pair probability p can be swept, not {args.param!r}")
    if not 0 < args.start < 1 or not 0 < args.stop < 1 or args.steps < 2:
        raise ParameterError("sweep needs 0 < from, to < 1 and at least 2 steps")
    grid = (np.geomspace if args.spacing == "log" else np.linspace)(args.start, args.stop, args.steps)
    reports = planner.sweep_p(config.params, grid)
    text = planner.reports_csv(reports)
    if args.out:
        Path(args.out).write_text(text)
    elif not args.quiet:
        sys.stdout.write(text)
    best = planner.best_p(reports)
    fom = planner.time_to_certify(best)
    if math.isinf(fom):
        print("no grid point certifies P <= 0.05 in finite time")
    else:
        print(f"best p = {best.p:.4g}: time to P <= {best.alpha} = {fom:.4g} s ({fom / 3600:.2f} h), "
              f"N = {best.N_pvalue}, S_exp = {best.S_exp:.4f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    checks = verify.run_all()
    failed = [c for c in checks if not c.passed]
    for c in checks:
        if not args.quiet or not c.passed:
            print(c.line())
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    if failed:
        names = sorted({c.criterion for c in failed})
        print("FAILED: " + "; ".join(names))
        return EXIT_VERIFY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS,
                        help="INI config file (default: built-in baseline)")
    common.add_argument("--out", metavar="PATH", default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, metavar="U64")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="hbs", description=__doc__.splitlines()[0])
    parser.add_argument("--config", metavar="PATH", default=None)
    parser.add_argument("--out", metavar="PATH", default=None)
    parser.add_argument("--seed", type=int, default=None, metavar="U64")
    parser.add_argument("--quiet", action="store_true", default=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[common], help="closed-form budget")
    p.set_defaults(func=cmd_plan)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo campaign")
    s.add_argument("--mode", choices=["full", "conditioned", "full-chain", "herald-conditioned"])
    stop = s.add_mutually_exclusive_group()
    stop.add_argument("--heralds", type=int, help="stop after this many twofold heralds")
    stop.add_argument("--trials", type=int, help="stop after this many trials")
    s.add_argument("--heralded-only", action="store_true", help="write only heralded records")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", parents=[common], help="sweep the pair probability")
    w.add_argument("--param", default="p")
    w.add_argument("--from", dest="start", type=float, default=1e-4)
    w.add_argument("--to", dest="stop", type=float, default=2e-2)
    w.add_argument("--steps", type=int, default=50)
    w.add_argument("--spacing", choices=["log", "linear"], default="log")
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", parents=[common], help="run the built-in acceptance checks")
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"hbs: config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ParameterError as exc:
        print(f"hbs: parameter error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except simulate.StopRuleUnreachable as exc:
        print(f"hbs: stop rule unreachable: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE


if __name__ == "__main__":
    sys.exit(main())
