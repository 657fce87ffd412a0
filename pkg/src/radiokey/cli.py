"""Command-line front end.

Subcommands: simulate, bounds, sweep, isotope, bb84.  Configuration comes
from a JSON file (--config, or the RADIOKEY_CONFIG environment variable),
with every field optional and documented defaults.  Exit codes: 0 success,
2 configuration error, 3 protocol abort (e.g. privacy amplification left
no key), 4 detection-test failure when running with --verify-detection.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import ConfigError
from .isotope import (
    Catalog,
    ProductionPlan,
    activity_from_irradiation,
    contamination_report,
    dilution_plan,
    nuclei_from_activity,
)
from .postproc import distill_key
from .rng import RngSeed
from .run import (
    RunConfig,
    SWEEP_PARAMETERS,
    load_config,
    run_bounds,
    run_simulation,
    run_sweep,
)
from . import bb84 as bb84_module

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3
EXIT_DETECTION = 4

CONFIG_ENV_VAR = "RADIOKEY_CONFIG"


def _emit(text: str, out_path: str | None):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _resolve_config(args) -> RunConfig:
    path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV_VAR)
    config = load_config(path) if path else RunConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        overrides["trials"] = args.trials
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if overrides:
        import dataclasses

        config = dataclasses.replace(config, **overrides)
    return config


def _cmd_simulate(args) -> int:
    config = _resolve_config(args)
    report = run_simulation(config)
    _emit(report.to_json(include_timing=args.timing), args.out)
    aborted = report.aggregate["aborted_trials"]
    if args.verify_detection:
        rate = report.aggregate["detection_pass_rate"]
        if rate is not None and rate < 1.0:
            print("detection test failed in at least one trial", file=sys.stderr)
            return EXIT_DETECTION
    if report.aggregate["postprocessed_trials"] and aborted:
        print(f"{aborted} trial(s) aborted during key distillation", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def _cmd_bounds(args) -> int:
    config = _resolve_config(args)
    bounds = run_bounds(config)
    if args.format == "csv":
        names = (
            "translucent",
            "intercept_resend",
            "intercept_resend_approx",
            "prearrival",
            "combined",
        )
        data = bounds.to_dict()
        text = (
            ",".join(names) + "\n" + ",".join(repr(data[n]) for n in names) + "\n"
        )
    else:
        text = json.dumps(bounds.to_dict(), indent=2, sort_keys=True) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def _parse_grid(args) -> list[float]:
    if args.values:
        return [float(v) for v in args.values.split(",") if v.strip()]
    if args.grid:
        parts = args.grid.split(":")
        if len(parts) not in (3, 4):
            raise ConfigError("grid: expected start:stop:count[:log]")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if len(parts) == 4 and parts[3] == "log":
            return list(np.geomspace(start, stop, count))
        return list(np.linspace(start, stop, count))
    raise ConfigError("grid: provide --values or --grid")


def _cmd_sweep(args) -> int:
    config = _resolve_config(args)
    values = _parse_grid(args)
    result = run_sweep(config, args.parameter, values, simulate=args.simulate)
    if args.format == "json":
        text = json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n"
    else:
        text = result.to_csv()
    _emit(text, args.out)
    return EXIT_OK


def _load_catalog(args) -> Catalog:
    return Catalog.load(args.catalog) if args.catalog else Catalog.builtin()


def _cmd_isotope(args) -> int:
    catalog = _load_catalog(args)
    if args.isotope_command == "list":
        payload = [
            {
                "name": spec.name,
                "half_life_days": spec.half_life_days,
                "gamma_lines_kev": list(spec.gamma_lines_kev),
                "thick_target_yield_mbq_per_uah": spec.thick_target_yield,
                "notes": spec.notes,
            }
            for spec in catalog
        ]
    elif args.isotope_command == "activity":
        spec = catalog[args.name]
        activity = activity_from_irradiation(spec, args.current_ua, args.hours)
        payload = {
            "name": spec.name,
            "current_ua": args.current_ua,
            "hours": args.hours,
            "activity_bq": activity,
            "nuclei": nuclei_from_activity(activity, spec),
        }
    elif args.isotope_command == "nuclei":
        spec = catalog[args.name]
        payload = {
            "name": spec.name,
            "activity_bq": args.activity_bq,
            "nuclei": nuclei_from_activity(args.activity_bq, spec),
        }
    elif args.isotope_command == "dilution":
        plan = ProductionPlan(
            beam_current_ua=args.current_ua,
            irradiation_hours=args.hours,
            target_mu=args.target_mu,
            sample_volume_mm3=args.sample_volume,
        )
        total = args.total_nuclei
        if total is None:
            spec = catalog[args.name]
            activity = activity_from_irradiation(spec, args.current_ua, args.hours)
            total = nuclei_from_activity(activity, spec)
        payload = dilution_plan(total, plan).to_dict()
    elif args.isotope_command == "contamination":
        payload = [
            entry.to_dict()
            for entry in contamination_report(
                catalog, args.duration_days, primary=args.name
            )
        ]
    else:  # pragma: no cover - argparse enforces choices
        raise ConfigError(f"unknown isotope command {args.isotope_command!r}")
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def _cmd_bb84(args) -> int:
    rng = RngSeed(args.seed).stream("bb84")
    session = bb84_module.bb84_session(args.bits, args.eve, rng)
    payload = {"session": session.to_dict()}
    status = EXIT_OK
    if args.postprocess and session.sifted_alice.size:
        ledger = distill_key(
            session.sifted_alice, session.sifted_bob, eve_bound=0.0, rng=rng
        ).to_dict()
        payload["ledger"] = ledger
        if ledger["status"] != "OK":
            status = EXIT_ABORT
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radiokey",
        description="Simulator and bound calculator for radioactively encoded "
        "key distribution",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run seeded Monte Carlo trials")
    simulate.add_argument("--config", help="JSON config file path")
    simulate.add_argument("--seed", type=int, help="override master seed")
    simulate.add_argument("--trials", type=int, help="override trial count")
    simulate.add_argument("--workers", type=int, help="override worker count")
    simulate.add_argument("--out", help="write the report here instead of stdout")
    simulate.add_argument(
        "--timing", action="store_true", help="include wall-clock (non-reproducible)"
    )
    simulate.add_argument(
        "--verify-detection",
        action="store_true",
        help="exit 4 if any trial fails the tampering test",
    )
    simulate.set_defaults(func=_cmd_simulate)

    bounds = sub.add_parser("bounds", help="evaluate the analytic bounds only")
    bounds.add_argument("--config", help="JSON config file path")
    bounds.add_argument("--out")
    bounds.add_argument("--format", choices=("json", "csv"), default="json")
    bounds.set_defaults(func=_cmd_bounds)

    sweep = sub.add_parser("sweep", help="tabulate bounds over a parameter grid")
    sweep.add_argument("--config", help="JSON config file path")
    sweep.add_argument("--parameter", choices=SWEEP_PARAMETERS, required=True)
    sweep.add_argument("--values", help="comma-separated grid values")
    sweep.add_argument("--grid", help="start:stop:count[:log]")
    sweep.add_argument(
        "--simulate", action="store_true", help="add Monte Carlo columns"
    )
    sweep.add_argument("--seed", type=int, help="override master seed")
    sweep.add_argument("--trials", type=int, help="override trial count")
    sweep.add_argument("--out")
    sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    sweep.set_defaults(func=_cmd_sweep)

    isotope = sub.add_parser("isotope", help="catalog and production arithmetic")
    isotope.add_argument("--catalog", help="catalog JSON path (default: built-in)")
    isotope.add_argument("--out")
    iso_sub = isotope.add_subparsers(dest="isotope_command", required=True)
    iso_list = iso_sub.add_parser("list", help="print the catalog")
    iso_activity = iso_sub.add_parser("activity", help="activity from irradiation")
    iso_activity.add_argument("--name", default="Sn-117m")
    iso_activity.add_argument("--current-ua", type=float, default=1.0, dest="current_ua")
    iso_activity.add_argument("--hours", type=float, default=1.0)
    iso_nuclei = iso_sub.add_parser("nuclei", help="nucleus count from activity")
    iso_nuclei.add_argument("--name", default="Sn-117m")
    iso_nuclei.add_argument("--activity-bq", type=float, required=True, dest="activity_bq")
    iso_dilution = iso_sub.add_parser("dilution", help="samples at a target occupancy")
    iso_dilution.add_argument("--name", default="Sn-117m")
    iso_dilution.add_argument("--current-ua", type=float, default=1.0, dest="current_ua")
    iso_dilution.add_argument("--hours", type=float, default=1.0)
    iso_dilution.add_argument("--target-mu", type=float, default=0.1, dest="target_mu")
    iso_dilution.add_argument(
        "--sample-volume", type=float, default=1.0, dest="sample_volume"
    )
    iso_dilution.add_argument(
        "--total-nuclei", type=float, default=None, dest="total_nuclei"
    )
    iso_contamination = iso_sub.add_parser(
        "contamination", help="contaminant decay over the protocol window"
    )
    iso_contamination.add_argument("--name", default="Sn-117m")
    iso_contamination.add_argument(
        "--duration-days", type=float, required=True, dest="duration_days"
    )
    for sub_parser in (iso_list, iso_activity, iso_nuclei, iso_dilution, iso_contamination):
        sub_parser.set_defaults(func=_cmd_isotope)

    bb84 = sub.add_parser("bb84", help="four-state prepare-and-measure session")
    bb84.add_argument("--bits", type=int, default=10000)
    bb84.add_argument("--eve", action="store_true")
    bb84.add_argument("--seed", type=int, default=1)
    bb84.add_argument(
        "--no-postprocess", dest="postprocess", action="store_false", default=True
    )
    bb84.add_argument("--out")
    bb84.set_defaults(func=_cmd_bb84)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
